//! Epoch-phase features: single trials are filtered, cut into overlapping
//! 4 s epochs, and each epoch yields per-channel band percentages. Epochs of
//! both conditions form a labeled dataset split per class into train and test
//! partitions.

use std::fs;
use std::path::Path;

use ndarray::{s, Array2, Array3};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bandsel::csv_err;
use crate::dsp::{band_power, psd, Preprocess};
use crate::error::{Error, Result};
use crate::model::{
    validate_recording, BandLabel, BandScheme, ChannelId, Condition, Recording, Trial,
};
use crate::rng::StreamKey;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitMethod {
    /// Seeded shuffle within each class.
    Random,
    /// First epochs of each class in (trial, epoch) order go to training.
    Chronological,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochConfig {
    pub preprocess: Preprocess,
    pub window_s: f64,
    pub overlap_s: f64,
    /// STFT window and hop, in samples.
    pub window_len: usize,
    pub hop: usize,
    /// Use band powers in µV² instead of percentages of the 1–30 Hz total.
    pub absolute_power: bool,
    pub split: SplitMethod,
    /// Training epochs per class; the rest of each class is the test set.
    pub train_per_class: usize,
}

impl Default for EpochConfig {
    fn default() -> Self {
        Self {
            preprocess: Preprocess::epoch(),
            window_s: 4.0,
            overlap_s: 3.5,
            window_len: 512,
            hop: 1,
            absolute_power: false,
            split: SplitMethod::Random,
            train_per_class: 158,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Epoch {
    pub subject_id: String,
    pub condition: Condition,
    pub trial_index: usize,
    pub epoch_index: usize,
    /// Channels × samples.
    pub samples: Array2<f64>,
}

/// Sample ranges `[start, start + win)` of the epochs in a signal of `len`
/// samples.
pub fn epoch_starts(len: usize, fs: f64, win_s: f64, overlap_s: f64) -> Result<(usize, Vec<usize>)> {
    if !(win_s > 0.0 && overlap_s >= 0.0 && overlap_s < win_s) {
        return Err(Error::invalid("epoch window must be > 0 with 0 ≤ overlap < window"));
    }
    let win = (win_s * fs).round() as usize;
    let stride = ((win_s - overlap_s) * fs).round() as usize;
    if stride == 0 {
        return Err(Error::invalid("epoch stride rounds to zero samples"));
    }
    if len < win {
        return Err(Error::invalid(format!(
            "trial of {len} samples is shorter than the {win}-sample epoch"
        )));
    }
    let count = (len - win) / stride + 1;
    Ok((win, (0..count).map(|i| i * stride).collect()))
}

/// Cuts a trial into epochs of `win_s` seconds overlapping by `overlap_s`.
pub fn epochize(
    trial: &Trial,
    fs: f64,
    win_s: f64,
    overlap_s: f64,
    subject_id: &str,
    condition: Condition,
    trial_index: usize,
) -> Result<Vec<Epoch>> {
    let (win, starts) = epoch_starts(trial.n_samples(), fs, win_s, overlap_s)?;
    Ok(starts
        .into_iter()
        .enumerate()
        .map(|(i, start)| Epoch {
            subject_id: subject_id.to_string(),
            condition,
            trial_index,
            epoch_index: i,
            samples: trial.samples.slice(s![.., start..start + win]).to_owned(),
        })
        .collect())
}

/// Applies the epoch-phase filter chain to every channel of a whole trial.
pub fn preprocess_epoch_phase(trial: &Trial, fs: f64, pre: &Preprocess) -> Result<Trial> {
    let chain = pre.design(fs)?;
    let mut out = Array2::zeros(trial.samples.dim());
    for (row, mut dst) in trial.samples.rows().into_iter().zip(out.rows_mut()) {
        let y = chain.apply(&row.to_vec())?;
        dst.assign(&ndarray::ArrayView1::from(&y));
    }
    Ok(Trial::new(out))
}

/// Epoch-scheme band values of one signal: percentages of the 1–30 Hz total,
/// or absolute band powers.
fn band_values(x: &[f64], fs: f64, cfg: &EpochConfig) -> Result<Vec<f64>> {
    let scheme = BandScheme::epoch();
    let p = psd(x, fs, cfg.window_len, cfg.hop)?;
    if cfg.absolute_power {
        scheme.bands.iter().map(|b| band_power(&p, b.lo, b.hi)).collect()
    } else {
        crate::dsp::normalized_band_powers(&p, &scheme)
    }
}

fn band_columns(bands: &[BandLabel]) -> Result<Vec<usize>> {
    if bands.is_empty() {
        return Err(Error::invalid("no feature bands selected"));
    }
    let scheme = BandScheme::epoch();
    bands
        .iter()
        .map(|&b| {
            scheme
                .position(b)
                .ok_or_else(|| Error::invalid(format!("band {b} is not part of the epoch scheme")))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub subject_id: String,
    pub condition: Condition,
    pub trial: usize,
    pub epoch: usize,
    pub values: Vec<f64>,
    /// +1 for 2D, −1 for 3D.
    pub label: f64,
}

/// Features of one epoch: for each channel row in `rows`, the values of
/// `bands`, concatenated in channel order.
pub fn extract_features(
    e: &Epoch,
    rows: &[usize],
    bands: &[BandLabel],
    fs: f64,
    cfg: &EpochConfig,
) -> Result<FeatureVector> {
    if rows.is_empty() {
        return Err(Error::invalid("no channels selected"));
    }
    let cols = band_columns(bands)?;
    let mut values = Vec::with_capacity(rows.len() * cols.len());
    for &r in rows {
        if r >= e.samples.nrows() {
            return Err(Error::invalid(format!("channel row {r} out of range")));
        }
        let v = band_values(&e.samples.row(r).to_vec(), fs, cfg)?;
        values.extend(cols.iter().map(|&c| v[c]));
    }
    Ok(FeatureVector {
        subject_id: e.subject_id.clone(),
        condition: e.condition,
        trial: e.trial_index,
        epoch: e.epoch_index,
        values,
        label: e.condition.label(),
    })
}

/// Where one row of a [`FeatureTable`] came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpochRef {
    pub condition: Condition,
    pub trial: usize,
    pub epoch: usize,
}

/// Every epoch-scheme band value for every channel and epoch of one subject,
/// computed once so that datasets for any channel subset are cheap.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub subject_id: String,
    pub channels: Vec<ChannelId>,
    /// 2D epochs first, then 3D, each in (trial, epoch) order.
    pub epochs: Vec<EpochRef>,
    /// Epoch × channel × band.
    pub values: Array3<f64>,
    pub config: EpochConfig,
}

impl FeatureTable {
    pub fn build(rec2d: &Recording, rec3d: &Recording, cfg: &EpochConfig) -> Result<Self> {
        for rec in [rec2d, rec3d] {
            validate_recording(rec).into_result()?;
        }
        if rec2d.condition != Condition::TwoD || rec3d.condition != Condition::ThreeD {
            return Err(Error::data("expected one 2D and one 3D recording"));
        }
        if rec2d.channels != rec3d.channels {
            return Err(Error::data("2D and 3D recordings use different montages"));
        }
        if rec2d.subject_id != rec3d.subject_id {
            log::warn!(
                "pairing recordings of different subjects ({} and {})",
                rec2d.subject_id,
                rec3d.subject_id
            );
        }
        let fs = rec2d.fs;
        let n_ch = rec2d.channels.len();
        let n_bands = BandScheme::epoch().bands.len();

        let filtered: Vec<Vec<Trial>> = [rec2d, rec3d]
            .iter()
            .map(|rec| {
                rec.trials
                    .par_iter()
                    .map(|t| preprocess_epoch_phase(t, fs, &cfg.preprocess))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;

        let mut epochs = Vec::new();
        let mut blocks = Vec::new();
        for (rec, trials) in [rec2d, rec3d].iter().zip(&filtered) {
            for (ti, trial) in trials.iter().enumerate() {
                let (win, starts) =
                    epoch_starts(trial.n_samples(), fs, cfg.window_s, cfg.overlap_s)?;
                for (ei, &start) in starts.iter().enumerate() {
                    epochs.push(EpochRef {
                        condition: rec.condition,
                        trial: ti,
                        epoch: ei,
                    });
                    blocks.push((ti, start, win));
                }
            }
        }

        let rows = epochs
            .par_iter()
            .zip(blocks.par_iter())
            .map(|(r, &(ti, start, win))| {
                let trial = &filtered[(r.condition == Condition::ThreeD) as usize][ti];
                let mut out = Vec::with_capacity(n_ch * n_bands);
                for ch in 0..n_ch {
                    let x = trial.samples.slice(s![ch, start..start + win]).to_vec();
                    out.extend(band_values(&x, fs, cfg)?);
                }
                Ok(out)
            })
            .collect::<Result<Vec<_>>>()?;

        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        Ok(Self {
            subject_id: rec2d.subject_id.clone(),
            channels: rec2d.channels.clone(),
            values: Array3::from_shape_vec((epochs.len(), n_ch, n_bands), flat)
                .expect("one row per epoch"),
            epochs,
            config: cfg.clone(),
        })
    }
}

impl FeatureTable {
    /// Labeled dataset over `channels` and `bands`, split per class.
    pub fn dataset(&self, channels: &[ChannelId], bands: &[BandLabel], split_seed: u64) -> Result<Dataset> {
        if channels.is_empty() {
            return Err(Error::invalid("no channels selected"));
        }
        let cols = band_columns(bands)?;
        let rows = channels
            .iter()
            .map(|&c| {
                self.channels
                    .iter()
                    .position(|&x| x == c)
                    .ok_or_else(|| Error::data(format!("channel {c} not in recording")))
            })
            .collect::<Result<Vec<_>>>()?;
        let feature_names = channels
            .iter()
            .flat_map(|c| bands.iter().map(move |b| format!("{c}_{b}")))
            .collect();

        let vector = |i: usize| {
            let r = self.epochs[i];
            let values = rows
                .iter()
                .flat_map(|&ch| cols.iter().map(move |&b| self.values[[i, ch, b]]))
                .collect();
            FeatureVector {
                subject_id: self.subject_id.clone(),
                condition: r.condition,
                trial: r.trial,
                epoch: r.epoch,
                values,
                label: r.condition.label(),
            }
        };

        let mut train = Vec::new();
        let mut test = Vec::new();
        for cond in [Condition::TwoD, Condition::ThreeD] {
            let members: Vec<usize> = (0..self.epochs.len())
                .filter(|&i| self.epochs[i].condition == cond)
                .collect();
            let (tr, te) = split_class(
                members.len(),
                self.config.train_per_class,
                self.config.split,
                StreamKey::new(split_seed, "split").str(&self.subject_id).num(cond as u64),
            )?;
            train.extend(tr.into_iter().map(|k| vector(members[k])));
            test.extend(te.into_iter().map(|k| vector(members[k])));
        }
        Ok(Dataset {
            feature_names,
            train,
            test,
            split_seed,
        })
    }
}

/// Positions `0..n` split into `n_train` training and `n − n_train` test
/// positions, each returned in ascending order.
fn split_class(n: usize, n_train: usize, method: SplitMethod, key: StreamKey) -> Result<(Vec<usize>, Vec<usize>)> {
    if n_train == 0 || n_train >= n {
        return Err(Error::invalid(format!(
            "cannot split {n} epochs into {n_train} train and {} test",
            n.saturating_sub(n_train)
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    if method == SplitMethod::Random {
        order.shuffle(&mut key.rng());
    }
    let mut train = order[..n_train].to_vec();
    let mut test = order[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub feature_names: Vec<String>,
    pub train: Vec<FeatureVector>,
    pub test: Vec<FeatureVector>,
    pub split_seed: u64,
}

/// Builds the full table for a pair of recordings and returns the dataset
/// over `channels` and `bands`.
pub fn build_dataset(
    rec2d: &Recording,
    rec3d: &Recording,
    channels: &[ChannelId],
    bands: &[BandLabel],
    split_seed: u64,
    cfg: &EpochConfig,
) -> Result<Dataset> {
    FeatureTable::build(rec2d, rec3d, cfg)?.dataset(channels, bands, split_seed)
}

/// Design matrix and ±1 labels of a set of feature vectors.
pub fn to_matrix(rows: &[FeatureVector]) -> Result<(Array2<f64>, Vec<f64>)> {
    let p = rows.first().map_or(0, |r| r.values.len());
    if rows.iter().any(|r| r.values.len() != p) {
        return Err(Error::data("feature vectors have different lengths"));
    }
    let flat: Vec<f64> = rows.iter().flat_map(|r| r.values.iter().copied()).collect();
    let x = Array2::from_shape_vec((rows.len(), p), flat).expect("rectangular");
    Ok((x, rows.iter().map(|r| r.label).collect()))
}

impl Dataset {
    /// Writes `train.csv` and `test.csv` into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_feature_csv(&dir.join("train.csv"), &self.feature_names, &self.train)?;
        write_feature_csv(&dir.join("test.csv"), &self.feature_names, &self.test)
    }
}

/// Feature CSV: `subject,condition,trial,epoch`, one column per feature, then
/// `label` (+1 = 2D, −1 = 3D).
pub fn write_feature_csv(path: &Path, names: &[String], rows: &[FeatureVector]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut header: Vec<&str> = vec!["subject", "condition", "trial", "epoch"];
    header.extend(names.iter().map(String::as_str));
    header.push("label");
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for r in rows {
        if r.values.len() != names.len() {
            return Err(Error::data("feature vector length differs from the header"));
        }
        let mut rec = vec![
            r.subject_id.clone(),
            r.condition.as_str().to_string(),
            r.trial.to_string(),
            r.epoch.to_string(),
        ];
        rec.extend(r.values.iter().map(|v| v.to_string()));
        rec.push(if r.label > 0.0 { "1" } else { "-1" }.to_string());
        w.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a feature CSV, returning the feature names and rows.
pub fn read_feature_csv(path: &Path) -> Result<(Vec<String>, Vec<FeatureVector>)> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header = r.headers().map_err(|e| csv_err(path, e))?.clone();
    let n = header.len();
    if n < 6 || &header[0] != "subject" || &header[n - 1] != "label" {
        return Err(Error::parse(path, "expected subject,condition,trial,epoch,<features>,label"));
    }
    let names: Vec<String> = header.iter().skip(4).take(n - 5).map(String::from).collect();
    let num = |s: &str| s.trim().parse::<f64>().map_err(|e| Error::parse(path, e));
    let idx = |s: &str| s.trim().parse::<usize>().map_err(|e| Error::parse(path, e));
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let label = num(&rec[n - 1])?;
        if label != 1.0 && label != -1.0 {
            return Err(Error::parse(path, format!("label {label} is not ±1")));
        }
        rows.push(FeatureVector {
            subject_id: rec[0].to_string(),
            condition: rec[1].parse()?,
            trial: idx(&rec[2])?,
            epoch: idx(&rec[3])?,
            values: (4..n - 1).map(|i| num(&rec[i])).collect::<Result<_>>()?,
            label,
        });
    }
    Ok((names, rows))
}
