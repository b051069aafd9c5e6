//! Metrics, per-channel evaluation, channel ranking, prefix combination
//! search, and the report bundle.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::bandsel::{
    average_diff, condition_band_matrix, csv_err, diff_matrix, select_dominant_bands, BandDiffMatrix,
    DominantBands, SelectionConfig,
};
use crate::error::{Error, Result};
use crate::features::{to_matrix, Dataset, EpochConfig, FeatureTable};
use crate::learn::{kfold_select, Classifier, CvConfig, Hyper, TrainedModel};
use crate::model::{BandLabel, ChannelId, Recording};
use crate::rng::StreamKey;

/// Counts with 2D as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }

    /// Accuracy as an exact fraction `(correct, total)`.
    pub fn accuracy_ratio(&self) -> (usize, usize) {
        (self.tp + self.tn, self.total())
    }
}

pub fn confusion(pred: &[f64], truth: &[f64]) -> Result<ConfusionMatrix> {
    if pred.len() != truth.len() {
        return Err(Error::invalid(format!(
            "{} predictions for {} labels",
            pred.len(),
            truth.len()
        )));
    }
    let mut c = ConfusionMatrix::default();
    for (&p, &t) in pred.iter().zip(truth) {
        match (p > 0.0, t > 0.0) {
            (true, true) => c.tp += 1,
            (false, false) => c.tn += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    /// `tp / (tp + fn)`; absent when there are no positives.
    pub sensitivity: Option<f64>,
    /// `tn / (tn + fp)`; absent when there are no negatives.
    pub specificity: Option<f64>,
}

pub fn metrics(c: &ConfusionMatrix) -> Result<Metrics> {
    let total = c.total();
    if total == 0 {
        return Err(Error::invalid("empty confusion matrix"));
    }
    let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
    Ok(Metrics {
        accuracy: (c.tp + c.tn) as f64 / total as f64,
        sensitivity: ratio(c.tp, c.tp + c.fn_),
        specificity: ratio(c.tn, c.tn + c.fp),
    })
}

/// Test-set result of one tuned classifier on one subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub subject_id: String,
    pub hyper: Hyper,
    pub cv_accuracy: f64,
    pub confusion: ConfusionMatrix,
    pub metrics: Metrics,
}

/// Tunes by k-fold CV on the training partition, refits on all of it, and
/// scores the test partition.
pub fn evaluate_dataset(ds: &Dataset, classifier: Classifier, cv: &CvConfig) -> Result<(TrainedModel, Outcome)> {
    let (xtr, ytr) = to_matrix(&ds.train)?;
    let (xte, yte) = to_matrix(&ds.test)?;
    let cvr = kfold_select(xtr.view(), &ytr, cv, classifier)?;
    let mut model = TrainedModel::fit(xtr.view(), &ytr, cvr.best, ds.feature_names.clone())?;
    model.cv_accuracy = Some(cvr.best_accuracy);
    let (pred, _) = model.predict(xte.view())?;
    let c = confusion(&pred, &yte)?;
    let outcome = Outcome {
        subject_id: ds.train.first().map(|r| r.subject_id.clone()).unwrap_or_default(),
        hyper: cvr.best,
        cv_accuracy: cvr.best_accuracy,
        confusion: c,
        metrics: metrics(&c)?,
    };
    Ok((model, outcome))
}

/// Metrics averaged over subjects. Sensitivity and specificity average only
/// the subjects where they are defined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Averaged {
    pub accuracy: f64,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub subjects: Vec<Outcome>,
}

impl Averaged {
    pub fn new(subjects: Vec<Outcome>) -> Self {
        let n = subjects.len() as f64;
        let mean_opt = |f: fn(&Metrics) -> Option<f64>| {
            let v: Vec<f64> = subjects.iter().filter_map(|o| f(&o.metrics)).collect();
            (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
        };
        Self {
            accuracy: subjects.iter().map(|o| o.metrics.accuracy).sum::<f64>() / n,
            sensitivity: mean_opt(|m| m.sensitivity),
            specificity: mean_opt(|m| m.specificity),
            subjects,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub selection: SelectionConfig,
    pub epoch: EpochConfig,
    pub cv: CvConfig,
    pub split_seed: u64,
    /// Channels must exceed this accuracy to be ranked.
    pub rank_threshold: f64,
    /// The compromise prefix is the smallest within this accuracy of the best.
    pub compromise_margin: f64,
    /// Feature bands; the elected dominant bands when absent.
    pub bands: Option<Vec<BandLabel>>,
    /// Randomly permute labels within each partition (chance-level control).
    pub shuffle_labels: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            selection: SelectionConfig::default(),
            epoch: EpochConfig::default(),
            cv: CvConfig::default(),
            split_seed: 0,
            rank_threshold: 0.60,
            compromise_margin: 0.02,
            bands: None,
            shuffle_labels: false,
        }
    }
}

/// Channel-subset evaluations, memoized so that a channel list is evaluated
/// once however many rankings or prefixes contain it.
pub struct Evaluator<'a> {
    tables: &'a [FeatureTable],
    bands: Vec<BandLabel>,
    cfg: &'a PipelineConfig,
    cache: HashMap<(Vec<ChannelId>, Classifier), Averaged>,
}

impl<'a> Evaluator<'a> {
    pub fn new(tables: &'a [FeatureTable], bands: Vec<BandLabel>, cfg: &'a PipelineConfig) -> Result<Self> {
        if tables.is_empty() {
            return Err(Error::invalid("no subjects to evaluate"));
        }
        Ok(Self {
            tables,
            bands,
            cfg,
            cache: HashMap::new(),
        })
    }

    pub fn dataset(&self, table: &FeatureTable, channels: &[ChannelId]) -> Result<Dataset> {
        let mut ds = table.dataset(channels, &self.bands, self.cfg.split_seed)?;
        if self.cfg.shuffle_labels {
            for (part, rows) in [("train", &mut ds.train), ("test", &mut ds.test)] {
                let mut labels: Vec<f64> = rows.iter().map(|r| r.label).collect();
                labels.shuffle(
                    &mut StreamKey::new(self.cfg.split_seed, "shuffle-labels")
                        .str(&table.subject_id)
                        .str(part)
                        .rng(),
                );
                for (r, l) in rows.iter_mut().zip(labels) {
                    r.label = l;
                }
            }
        }
        Ok(ds)
    }

    pub fn evaluate(&mut self, channels: &[ChannelId], classifier: Classifier) -> Result<Averaged> {
        let key = (channels.to_vec(), classifier);
        if let Some(hit) = self.cache.get(&key) {
            return Ok(hit.clone());
        }
        let outcomes = self
            .tables
            .iter()
            .map(|t| Ok(evaluate_dataset(&self.dataset(t, channels)?, classifier, &self.cfg.cv)?.1))
            .collect::<Result<Vec<_>>>()?;
        let avg = Averaged::new(outcomes);
        self.cache.insert(key, avg.clone());
        Ok(avg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRow {
    pub channel: ChannelId,
    pub plsr: Averaged,
    pub svm: Averaged,
}

impl ChannelRow {
    pub fn get(&self, c: Classifier) -> &Averaged {
        match c {
            Classifier::Plsr => &self.plsr,
            Classifier::Svm => &self.svm,
        }
    }
}

/// Evaluates each channel alone with both classifiers.
pub fn per_channel_eval(ev: &mut Evaluator<'_>, channels: &[ChannelId]) -> Result<Vec<ChannelRow>> {
    channels
        .iter()
        .map(|&ch| {
            log::info!("evaluating channel {ch}");
            Ok(ChannelRow {
                channel: ch,
                plsr: ev.evaluate(&[ch], Classifier::Plsr)?,
                svm: ev.evaluate(&[ch], Classifier::Svm)?,
            })
        })
        .collect()
}

/// Channels above `threshold`, by accuracy descending; ties keep montage
/// order.
pub fn rank_channels(table: &[(ChannelId, f64)], threshold: f64) -> Vec<ChannelId> {
    let mut kept: Vec<(ChannelId, f64)> = table.iter().copied().filter(|&(_, a)| a > threshold).collect();
    kept.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.index().cmp(&b.0.index())));
    kept.into_iter().map(|(c, _)| c).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComboRow {
    pub size: usize,
    pub channels: Vec<ChannelId>,
    pub plsr: Averaged,
    pub svm: Averaged,
}

impl ComboRow {
    pub fn get(&self, c: Classifier) -> &Averaged {
        match c {
            Classifier::Plsr => &self.plsr,
            Classifier::Svm => &self.svm,
        }
    }
}

/// Prefix combinations of one ranking, each evaluated by both classifiers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComboCurve {
    /// Classifier whose per-channel accuracies produced the ranking.
    pub ranking: Classifier,
    pub ranked: Vec<ChannelId>,
    pub rows: Vec<ComboRow>,
    /// Smallest prefix within the margin of the best, per evaluating
    /// classifier (PLSR, SVM).
    pub compromise_plsr: Option<usize>,
    pub compromise_svm: Option<usize>,
}

impl ComboCurve {
    pub fn best(&self, c: Classifier) -> Option<&ComboRow> {
        self.rows.iter().fold(None, |best: Option<&ComboRow>, r| match best {
            Some(b) if b.get(c).accuracy >= r.get(c).accuracy => Some(b),
            _ => Some(r),
        })
    }
}

fn compromise(rows: &[ComboRow], c: Classifier, margin: f64) -> Option<usize> {
    let best = rows.iter().map(|r| r.get(c).accuracy).fold(f64::NEG_INFINITY, f64::max);
    rows.iter()
        .find(|r| r.get(c).accuracy >= best - margin)
        .map(|r| r.size)
}

/// Evaluates the prefixes `ranked[..1]`, `ranked[..2]`, … with both classifiers.
pub fn combo_search(ev: &mut Evaluator<'_>, ranking: Classifier, ranked: &[ChannelId]) -> Result<ComboCurve> {
    if ranked.is_empty() {
        return Err(Error::invalid("ranked channel list is empty"));
    }
    let mut rows = Vec::with_capacity(ranked.len());
    for size in 1..=ranked.len() {
        let channels = &ranked[..size];
        log::info!("evaluating {ranking}-ranked prefix of {size}");
        rows.push(ComboRow {
            size,
            channels: channels.to_vec(),
            plsr: ev.evaluate(channels, Classifier::Plsr)?,
            svm: ev.evaluate(channels, Classifier::Svm)?,
        });
    }
    let margin = ev.cfg.compromise_margin;
    Ok(ComboCurve {
        ranking,
        ranked: ranked.to_vec(),
        compromise_plsr: compromise(&rows, Classifier::Plsr, margin),
        compromise_svm: compromise(&rows, Classifier::Svm, margin),
        rows,
    })
}

/// Everything the report bundle is made from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineResults {
    pub subjects: Vec<String>,
    pub subject_diffs: Vec<BandDiffMatrix>,
    pub band_diff: BandDiffMatrix,
    pub selection: DominantBands,
    pub feature_bands: Vec<BandLabel>,
    pub channels: Vec<ChannelRow>,
    pub ranked_plsr: Vec<ChannelId>,
    pub ranked_svm: Vec<ChannelId>,
    pub combo_plsr: Option<ComboCurve>,
    pub combo_svm: Option<ComboCurve>,
}

/// Band selection over all subjects, averaged.
pub fn band_selection(pairs: &[(Recording, Recording)], cfg: &SelectionConfig) -> Result<(Vec<BandDiffMatrix>, BandDiffMatrix, DominantBands)> {
    let diffs = pairs
        .iter()
        .map(|(r2, r3)| diff_matrix(&condition_band_matrix(r2, cfg)?, &condition_band_matrix(r3, cfg)?))
        .collect::<Result<Vec<_>>>()?;
    let avg = average_diff(&diffs)?;
    let sel = select_dominant_bands(&avg, cfg.threshold, cfg.n_select);
    Ok((diffs, avg, sel))
}

/// Runs band selection, feature extraction, per-channel evaluation, ranking
/// and combination search over `(2D, 3D)` recording pairs.
pub fn run_pipeline(pairs: &[(Recording, Recording)], cfg: &PipelineConfig) -> Result<PipelineResults> {
    let (subject_diffs, band_diff, selection) = band_selection(pairs, &cfg.selection)?;
    let bands = cfg.bands.clone().unwrap_or_else(|| selection.bands.clone());
    log::info!("feature bands: {bands:?}");
    let tables = pairs
        .iter()
        .map(|(r2, r3)| FeatureTable::build(r2, r3, &cfg.epoch))
        .collect::<Result<Vec<_>>>()?;
    let montage = tables[0].channels.clone();

    let mut ev = Evaluator::new(&tables, bands.clone(), cfg)?;
    let channels = per_channel_eval(&mut ev, &montage)?;
    let ranking = |c: Classifier| {
        let acc: Vec<(ChannelId, f64)> = channels.iter().map(|r| (r.channel, r.get(c).accuracy)).collect();
        rank_channels(&acc, cfg.rank_threshold)
    };
    let ranked_plsr = ranking(Classifier::Plsr);
    let ranked_svm = ranking(Classifier::Svm);
    let combo = |ev: &mut Evaluator<'_>, c: Classifier, r: &[ChannelId]| {
        if r.is_empty() {
            Ok(None)
        } else {
            combo_search(ev, c, r).map(Some)
        }
    };
    let combo_plsr = combo(&mut ev, Classifier::Plsr, &ranked_plsr)?;
    let combo_svm = combo(&mut ev, Classifier::Svm, &ranked_svm)?;
    Ok(PipelineResults {
        subjects: tables.iter().map(|t| t.subject_id.clone()).collect(),
        subject_diffs,
        band_diff,
        selection,
        feature_bands: bands,
        channels,
        ranked_plsr,
        ranked_svm,
        combo_plsr,
        combo_svm,
    })
}

impl PipelineResults {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self).expect("results serialize");
        fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e))
    }
}

pub const REPORT_FILES: [&str; 6] = [
    "band_diff.csv",
    "channel_accuracy.csv",
    "combo_plsr.csv",
    "combo_svm.csv",
    "sens_spec.csv",
    "summary.json",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn parse_opt(path: &Path, s: &str) -> Result<Option<f64>> {
    if s.trim().is_empty() {
        Ok(None)
    } else {
        s.trim().parse().map(Some).map_err(|e| Error::parse(path, e))
    }
}

fn write_rows(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.write_record(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_rows(path: &Path) -> Result<Vec<csv::StringRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    r.records().map(|x| x.map_err(|e| csv_err(path, e))).collect()
}

/// One row of `channel_accuracy.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelAccuracy {
    pub channel: ChannelId,
    pub plsr_accuracy: f64,
    pub svm_accuracy: f64,
    pub plsr_rank: Option<usize>,
    pub svm_rank: Option<usize>,
}

/// One row of `combo_plsr.csv` / `combo_svm.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComboLine {
    pub size: usize,
    pub classifier: Classifier,
    pub accuracy: f64,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub compromise: bool,
    pub channels: Vec<ChannelId>,
}

/// One row of `sens_spec.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensSpecLine {
    pub subject: String,
    pub scope: String,
    pub classifier: Classifier,
    pub accuracy: f64,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
}

impl PipelineResults {
    pub fn channel_accuracy(&self) -> Vec<ChannelAccuracy> {
        let rank = |list: &[ChannelId], c: ChannelId| list.iter().position(|&x| x == c).map(|p| p + 1);
        self.channels
            .iter()
            .map(|r| ChannelAccuracy {
                channel: r.channel,
                plsr_accuracy: r.plsr.accuracy,
                svm_accuracy: r.svm.accuracy,
                plsr_rank: rank(&self.ranked_plsr, r.channel),
                svm_rank: rank(&self.ranked_svm, r.channel),
            })
            .collect()
    }

    pub fn combo_lines(curve: Option<&ComboCurve>) -> Vec<ComboLine> {
        let Some(curve) = curve else { return Vec::new() };
        curve
            .rows
            .iter()
            .flat_map(|r| {
                Classifier::ALL.into_iter().map(move |c| {
                    let a = r.get(c);
                    let comp = match c {
                        Classifier::Plsr => curve.compromise_plsr,
                        Classifier::Svm => curve.compromise_svm,
                    };
                    ComboLine {
                        size: r.size,
                        classifier: c,
                        accuracy: a.accuracy,
                        sensitivity: a.sensitivity,
                        specificity: a.specificity,
                        compromise: comp == Some(r.size),
                        channels: r.channels.clone(),
                    }
                })
            })
            .collect()
    }

    /// Per-subject sensitivity and specificity of every single channel and of
    /// the compromise combinations, plus the subject average (`subject` =
    /// `mean`).
    pub fn sens_spec(&self) -> Vec<SensSpecLine> {
        let mut out = Vec::new();
        let mut push = |scope: String, c: Classifier, a: &Averaged| {
            for o in &a.subjects {
                out.push(SensSpecLine {
                    subject: o.subject_id.clone(),
                    scope: scope.clone(),
                    classifier: c,
                    accuracy: o.metrics.accuracy,
                    sensitivity: o.metrics.sensitivity,
                    specificity: o.metrics.specificity,
                });
            }
            out.push(SensSpecLine {
                subject: "mean".into(),
                scope,
                classifier: c,
                accuracy: a.accuracy,
                sensitivity: a.sensitivity,
                specificity: a.specificity,
            });
        };
        for r in &self.channels {
            for c in Classifier::ALL {
                push(r.channel.name().to_string(), c, r.get(c));
            }
        }
        for curve in [&self.combo_plsr, &self.combo_svm].into_iter().flatten() {
            for c in Classifier::ALL {
                let size = match c {
                    Classifier::Plsr => curve.compromise_plsr,
                    Classifier::Svm => curve.compromise_svm,
                };
                if let Some(row) = size.and_then(|s| curve.rows.get(s - 1)) {
                    push(format!("{}-ranked top {}", curve.ranking, row.size), c, row.get(c));
                }
            }
        }
        out
    }
}

fn channel_list(cs: &[ChannelId]) -> String {
    cs.iter().map(|c| c.name()).collect::<Vec<_>>().join(" ")
}

fn parse_channel_list(path: &Path, s: &str) -> Result<Vec<ChannelId>> {
    s.split_whitespace()
        .map(|c| c.parse::<ChannelId>().map_err(|e| Error::parse(path, e)))
        .collect()
}

/// Writes the report bundle into `dir`. `summary` becomes `summary.json`
/// after the run outcome fields are merged into it.
pub fn emit_reports(results: &PipelineResults, dir: &Path, summary: serde_json::Value) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = |name: &str| dir.join(name);

    results.band_diff.write_csv(&path("band_diff.csv"))?;

    let rank = |r: Option<usize>| r.map(|v| v.to_string()).unwrap_or_default();
    let rows: Vec<Vec<String>> = results
        .channel_accuracy()
        .iter()
        .map(|r| {
            vec![
                r.channel.name().to_string(),
                r.plsr_accuracy.to_string(),
                r.svm_accuracy.to_string(),
                rank(r.plsr_rank),
                rank(r.svm_rank),
            ]
        })
        .collect();
    write_rows(
        &path("channel_accuracy.csv"),
        &["channel", "plsr_accuracy", "svm_accuracy", "plsr_rank", "svm_rank"],
        &rows,
    )?;

    for (name, curve) in [("combo_plsr.csv", &results.combo_plsr), ("combo_svm.csv", &results.combo_svm)] {
        let rows: Vec<Vec<String>> = PipelineResults::combo_lines(curve.as_ref())
            .iter()
            .map(|l| {
                vec![
                    l.size.to_string(),
                    l.classifier.to_string(),
                    l.accuracy.to_string(),
                    opt(l.sensitivity),
                    opt(l.specificity),
                    (l.compromise as u8).to_string(),
                    channel_list(&l.channels),
                ]
            })
            .collect();
        write_rows(
            &path(name),
            &["size", "classifier", "accuracy", "sensitivity", "specificity", "compromise", "channels"],
            &rows,
        )?;
    }

    let rows: Vec<Vec<String>> = results
        .sens_spec()
        .iter()
        .map(|l| {
            vec![
                l.subject.clone(),
                l.scope.clone(),
                l.classifier.to_string(),
                l.accuracy.to_string(),
                opt(l.sensitivity),
                opt(l.specificity),
            ]
        })
        .collect();
    write_rows(
        &path("sens_spec.csv"),
        &["subject", "scope", "classifier", "accuracy", "sensitivity", "specificity"],
        &rows,
    )?;

    let mut summary = match summary {
        serde_json::Value::Object(m) => m,
        serde_json::Value::Null => serde_json::Map::new(),
        other => {
            let mut m = serde_json::Map::new();
            m.insert("run".into(), other);
            m
        }
    };
    summary.insert("subjects".into(), serde_json::json!(results.subjects));
    summary.insert("selection".into(), serde_json::to_value(&results.selection).expect("serializes"));
    summary.insert("feature_bands".into(), serde_json::json!(results.feature_bands));
    summary.insert("ranked_plsr".into(), serde_json::json!(results.ranked_plsr));
    summary.insert("ranked_svm".into(), serde_json::json!(results.ranked_svm));
    let best = |curve: &Option<ComboCurve>| {
        curve.as_ref().map(|cv| {
            serde_json::json!({
                "compromise_plsr": cv.compromise_plsr,
                "compromise_svm": cv.compromise_svm,
                "best_plsr": cv.best(Classifier::Plsr).map(|r| (r.size, r.plsr.accuracy)),
                "best_svm": cv.best(Classifier::Svm).map(|r| (r.size, r.svm.accuracy)),
            })
        })
    };
    summary.insert("combo_plsr".into(), serde_json::json!(best(&results.combo_plsr)));
    summary.insert("combo_svm".into(), serde_json::json!(best(&results.combo_svm)));
    summary.insert("files".into(), serde_json::json!(REPORT_FILES));
    let spath = path("summary.json");
    let text = serde_json::to_string_pretty(&serde_json::Value::Object(summary)).expect("serializes");
    fs::write(&spath, text + "\n").map_err(|e| Error::io(&spath, e))?;

    Ok(REPORT_FILES.iter().map(|f| path(f)).collect())
}

pub fn read_channel_accuracy(path: &Path) -> Result<Vec<ChannelAccuracy>> {
    let rank = |s: &str| -> Result<Option<usize>> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse().map(Some).map_err(|e| Error::parse(path, e))
        }
    };
    read_rows(path)?
        .iter()
        .map(|r| {
            if r.len() != 5 {
                return Err(Error::parse(path, "expected 5 columns"));
            }
            Ok(ChannelAccuracy {
                channel: r[0].parse()?,
                plsr_accuracy: r[1].parse().map_err(|e| Error::parse(path, e))?,
                svm_accuracy: r[2].parse().map_err(|e| Error::parse(path, e))?,
                plsr_rank: rank(&r[3])?,
                svm_rank: rank(&r[4])?,
            })
        })
        .collect()
}

pub fn read_combo(path: &Path) -> Result<Vec<ComboLine>> {
    read_rows(path)?
        .iter()
        .map(|r| {
            if r.len() != 7 {
                return Err(Error::parse(path, "expected 7 columns"));
            }
            Ok(ComboLine {
                size: r[0].parse().map_err(|e| Error::parse(path, e))?,
                classifier: r[1].parse()?,
                accuracy: r[2].parse().map_err(|e| Error::parse(path, e))?,
                sensitivity: parse_opt(path, &r[3])?,
                specificity: parse_opt(path, &r[4])?,
                compromise: &r[5] == "1",
                channels: parse_channel_list(path, &r[6])?,
            })
        })
        .collect()
}

pub fn read_sens_spec(path: &Path) -> Result<Vec<SensSpecLine>> {
    read_rows(path)?
        .iter()
        .map(|r| {
            if r.len() != 6 {
                return Err(Error::parse(path, "expected 6 columns"));
            }
            Ok(SensSpecLine {
                subject: r[0].to_string(),
                scope: r[1].to_string(),
                classifier: r[2].parse()?,
                accuracy: r[3].parse().map_err(|e| Error::parse(path, e))?,
                sensitivity: parse_opt(path, &r[4])?,
                specificity: parse_opt(path, &r[5])?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn confusion_examples() {
        let c = confusion(&[1.0, 1.0, -1.0], &[1.0, 1.0, -1.0]).unwrap();
        assert_eq!(c, ConfusionMatrix { tp: 2, tn: 1, fp: 0, fn_: 0 });
        let c = confusion(&[-1.0, -1.0, -1.0], &[1.0, 1.0, -1.0]).unwrap();
        assert_eq!(c, ConfusionMatrix { tp: 0, tn: 1, fp: 0, fn_: 2 });
        assert!(confusion(&[1.0], &[1.0, -1.0]).is_err());
    }

    #[test]
    fn metric_examples() {
        let m = metrics(&ConfusionMatrix { tp: 3, tn: 2, fp: 1, fn_: 0 }).unwrap();
        assert_eq!(m.accuracy, 5.0 / 6.0);
        assert_eq!(m.sensitivity, Some(1.0));
        assert_eq!(m.specificity, Some(2.0 / 3.0));
        let m = metrics(&ConfusionMatrix { tp: 0, tn: 4, fp: 1, fn_: 0 }).unwrap();
        assert_eq!(m.sensitivity, None);
        let m = metrics(&ConfusionMatrix { tp: 5, tn: 5, fp: 0, fn_: 0 }).unwrap();
        assert_eq!((m.accuracy, m.sensitivity, m.specificity), (1.0, Some(1.0), Some(1.0)));
        assert!(metrics(&ConfusionMatrix::default()).is_err());
    }

    #[test]
    fn ranking_examples() {
        use ChannelId::*;
        let t = [(O2, 0.72), (T4, 0.66), (Fz, 0.61), (C3, 0.55)];
        assert_eq!(rank_channels(&t, 0.60), vec![O2, T4, Fz]);
        assert!(rank_channels(&[(O2, 0.6), (T4, 0.5)], 0.60).is_empty());
        let tie = [(Oz, 0.7), (Fp1, 0.7), (T6, 0.8)];
        assert_eq!(rank_channels(&tie, 0.60), vec![T6, Fp1, Oz]);
    }

    fn outcome(acc: f64, sens: Option<f64>) -> Outcome {
        Outcome {
            subject_id: "S".into(),
            hyper: Hyper::Plsr { n_components: 1 },
            cv_accuracy: acc,
            confusion: ConfusionMatrix::default(),
            metrics: Metrics {
                accuracy: acc,
                sensitivity: sens,
                specificity: Some(0.5),
            },
        }
    }

    #[test]
    fn averaging_skips_undefined() {
        let a = Averaged::new(vec![outcome(0.6, None), outcome(0.8, Some(0.9))]);
        assert!((a.accuracy - 0.7).abs() < 1e-15);
        assert_eq!(a.sensitivity, Some(0.9));
        let b = Averaged::new(vec![outcome(0.6, None)]);
        assert_eq!(b.sensitivity, None);
    }

    #[test]
    fn compromise_is_smallest_within_margin() {
        let row = |size: usize, acc: f64| ComboRow {
            size,
            channels: ChannelId::MONTAGE[..size].to_vec(),
            plsr: Averaged::new(vec![outcome(acc, Some(1.0))]),
            svm: Averaged::new(vec![outcome(acc, Some(1.0))]),
        };
        let rows = vec![row(1, 0.70), row(2, 0.85), row(3, 0.90), row(4, 0.88)];
        assert_eq!(compromise(&rows, Classifier::Svm, 0.02), Some(3));
        assert_eq!(compromise(&rows, Classifier::Svm, 0.06), Some(2));
    }

    fn swap(v: &[f64]) -> Vec<f64> {
        v.iter().map(|x| -x).collect()
    }

    proptest! {
        #[test]
        fn swap_symmetry(pairs in proptest::collection::vec((any::<bool>(), any::<bool>()), 1..200)) {
            let pred: Vec<f64> = pairs.iter().map(|p| if p.0 { 1.0 } else { -1.0 }).collect();
            let truth: Vec<f64> = pairs.iter().map(|p| if p.1 { 1.0 } else { -1.0 }).collect();
            let c = confusion(&pred, &truth).unwrap();
            let t = confusion(&truth, &pred).unwrap();
            prop_assert_eq!((c.fp, c.fn_, c.tp, c.tn), (t.fn_, t.fp, t.tp, t.tn));

            // Flipping predictions: accuracy becomes its complement exactly.
            let flipped = confusion(&swap(&pred), &truth).unwrap();
            let (hit, n) = c.accuracy_ratio();
            prop_assert_eq!(flipped.accuracy_ratio(), (n - hit, n));

            // Relabeling both sides: sensitivity and specificity trade places.
            let m = metrics(&c).unwrap();
            let r = metrics(&confusion(&swap(&pred), &swap(&truth)).unwrap()).unwrap();
            prop_assert_eq!((r.sensitivity, r.specificity, r.accuracy), (m.specificity, m.sensitivity, m.accuracy));
        }
    }
}
