use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use stereo_eeg::bandsel::DominantBands;
use stereo_eeg::dsp::{average_trials, stft};
use stereo_eeg::eval::{band_selection, emit_reports, metrics, confusion, run_pipeline, PipelineConfig, PipelineResults};
use stereo_eeg::features::{read_feature_csv, to_matrix, FeatureTable, SplitMethod};
use stereo_eeg::learn::{config_hash, kfold_select, CvConfig, TrainedModel};
use stereo_eeg::model::{read_recording, write_recording};
use stereo_eeg::model::{parse_channel_list, BandLabel, ChannelId, Condition, Recording};
use stereo_eeg::synth::generate_pair;

use crate::config::{Input, RunConfig};
use crate::{
    stage, AllArgs, BandselectArgs, CliError, Command, CvArgs, EpochArgs, EvaluateArgs, FeaturesArgs,
    ManifestArgs, RankArgs, ReportArgs, SelectionArgs, SynthArgs, TrainArgs, ValidateArgs,
};

type Result<T> = std::result::Result<T, CliError>;

pub(crate) fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Synth(a) => synth(a),
        Command::Validate(a) => validate(a),
        Command::Bandselect(a) => bandselect(a),
        Command::Features(a) => features(a),
        Command::Train(a) => train(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Report(a) => report(a),
        Command::All(a) => all(a),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::Stage {
        module: "io",
        source: stereo_eeg::Error::Io {
            path: dir.to_path_buf(),
            source: e,
        },
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("serializes") + "\n";
    fs::write(path, text).map_err(|e| CliError::Stage {
        module: "io",
        source: stereo_eeg::Error::Io {
            path: path.to_path_buf(),
            source: e,
        },
    })
}

fn synth(a: SynthArgs) -> Result<()> {
    if a.subjects == 0 {
        return Err(CliError::Usage("--subjects must be ≥ 1".into()));
    }
    for spec in a.profile.specs(a.seed, a.subjects) {
        let (r2, r3) = generate_pair(&spec).map_err(stage("synth"))?;
        let dir = a.out.join(&spec.subject_id);
        for rec in [&r2, &r3] {
            let path = write_recording(rec, &dir.join(rec.condition.as_str())).map_err(stage("model"))?;
            println!("{}", path.display());
        }
        write_json(&dir.join("effect_spec.json"), &spec)?;
    }
    Ok(())
}

fn validate(a: ValidateArgs) -> Result<()> {
    let mut bad = 0;
    for path in &a.manifests {
        let rec = read_recording(path).map_err(stage("model"))?;
        let report = stereo_eeg::model::validate_recording(&rec);
        if report.is_valid() {
            println!("{}: valid", path.display());
        } else {
            bad += 1;
            println!("{}: invalid\n{report}", path.display());
        }
    }
    if bad > 0 {
        return Err(CliError::Stage {
            module: "model",
            source: stereo_eeg::Error::Data(format!("{bad} of {} recordings invalid", a.manifests.len())),
        });
    }
    Ok(())
}

fn load_pairs(m: &ManifestArgs) -> Result<Vec<(Recording, Recording)>> {
    if m.manifest_2d.is_empty() || m.manifest_2d.len() != m.manifest_3d.len() {
        return Err(CliError::Usage(
            "give one --manifest-2d and one --manifest-3d per subject".into(),
        ));
    }
    m.manifest_2d
        .iter()
        .zip(&m.manifest_3d)
        .map(|(p2, p3)| {
            let r2 = read_recording(p2).map_err(stage("model"))?;
            let r3 = read_recording(p3).map_err(stage("model"))?;
            for (rec, want, path) in [(&r2, Condition::TwoD, p2), (&r3, Condition::ThreeD, p3)] {
                if rec.condition != want {
                    return Err(CliError::Stage {
                        module: "model",
                        source: stereo_eeg::Error::Data(format!(
                            "{} holds a {} recording, expected {}",
                            path.display(),
                            rec.condition,
                            want
                        )),
                    });
                }
            }
            Ok((r2, r3))
        })
        .collect()
}

fn apply_selection(cfg: &mut PipelineConfig, a: &SelectionArgs) {
    let sel = &mut cfg.selection;
    if let Some(v) = a.threshold {
        sel.threshold = v;
    }
    if let Some(v) = a.n_select {
        sel.n_select = v;
    }
    if let Some(v) = a.window {
        sel.window_len = v;
        cfg.epoch.window_len = v;
    }
    if let Some(v) = a.hop {
        sel.hop = v;
        cfg.epoch.hop = v;
    }
    for pre in [&mut cfg.selection.preprocess, &mut cfg.epoch.preprocess] {
        if let Some(v) = a.order {
            pre.order = v;
        }
        if let Some(v) = a.notch_bandwidth {
            pre.notch_bandwidth = v;
        }
        if a.no_notch {
            pre.notch_hz = None;
        }
    }
}

fn parse_bands(list: &[String]) -> Result<Vec<BandLabel>> {
    list.iter()
        .map(|b| b.parse::<BandLabel>().map_err(|e| CliError::Usage(e.to_string())))
        .collect()
}

fn apply_epoch(cfg: &mut PipelineConfig, a: &EpochArgs, seed: u64) -> Result<()> {
    cfg.split_seed = a.split_seed.unwrap_or(seed);
    if let Some(b) = &a.bands {
        cfg.bands = Some(parse_bands(b)?);
    }
    if a.chronological {
        cfg.epoch.split = SplitMethod::Chronological;
    }
    cfg.epoch.absolute_power = a.absolute_power;
    if let Some(n) = a.train_per_class {
        cfg.epoch.train_per_class = n;
    }
    Ok(())
}

fn cv_config(a: &CvArgs, seed: u64) -> Result<CvConfig> {
    let mut cv = CvConfig {
        seed: a.cv_seed.unwrap_or(seed),
        ..CvConfig::default()
    };
    if let Some(k) = a.k {
        cv.k = k;
    }
    if let Some(c) = &a.c_grid {
        cv.c_grid = c.clone();
    }
    if let Some(s) = &a.sigma_scales {
        cv.sigma_scales = s.clone();
    }
    if let Some(g) = &a.component_grid {
        cv.component_grid = Some(g.clone());
    }
    cv.check().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(cv)
}

fn apply_rank(cfg: &mut PipelineConfig, a: &RankArgs) {
    if let Some(v) = a.rank_threshold {
        cfg.rank_threshold = v;
    }
    if let Some(v) = a.compromise_margin {
        cfg.compromise_margin = v;
    }
    cfg.shuffle_labels = a.shuffle_labels;
}

fn bandselect(a: BandselectArgs) -> Result<()> {
    let pairs = load_pairs(&a.manifests)?;
    let mut cfg = PipelineConfig::default();
    apply_selection(&mut cfg, &a.selection);
    let (diffs, avg, sel) = band_selection(&pairs, &cfg.selection).map_err(stage("bandsel"))?;
    create_dir(&a.out)?;
    avg.write_csv(&a.out.join("band_diff.csv")).map_err(stage("bandsel"))?;
    if diffs.len() > 1 {
        for ((r2, _), d) in pairs.iter().zip(&diffs) {
            d.write_csv(&a.out.join(format!("band_diff_{}.csv", r2.subject_id)))
                .map_err(stage("bandsel"))?;
        }
    }
    sel.write_json(&a.out.join("selection.json")).map_err(stage("bandsel"))?;
    if a.dump_spectrogram {
        dump_spectrograms(&pairs, &cfg, &a.out.join("spectrograms"))?;
    }
    print_selection(&sel);
    Ok(())
}

fn dump_spectrograms(pairs: &[(Recording, Recording)], cfg: &PipelineConfig, dir: &Path) -> Result<()> {
    create_dir(dir)?;
    let s = &cfg.selection;
    for rec in pairs.iter().flat_map(|(a, b)| [a, b]) {
        let chain = s.preprocess.design(rec.fs).map_err(stage("dsp"))?;
        let mean = average_trials(&rec.trials).map_err(stage("dsp"))?;
        for (row, ch) in rec.channels.iter().enumerate() {
            let x = chain.apply(&mean.samples.row(row).to_vec()).map_err(stage("dsp"))?;
            let sp = stft(&x, rec.fs, s.window_len, s.hop).map_err(stage("dsp"))?;
            let path = dir.join(format!("{}_{}_{}.csv", rec.subject_id, rec.condition, ch));
            sp.write_csv(&path).map_err(stage("dsp"))?;
        }
    }
    Ok(())
}

fn print_selection(sel: &DominantBands) {
    let counts: Vec<String> = sel
        .per_band_channel_counts
        .iter()
        .map(|(b, n)| format!("{b}={n}"))
        .collect();
    let bands: Vec<&str> = sel.bands.iter().map(|b| b.symbol()).collect();
    println!(
        "dominant bands: {} (channels with |diff| > {}: {})",
        bands.join(", "),
        sel.threshold,
        counts.join(" ")
    );
}

fn features(a: FeaturesArgs) -> Result<()> {
    let pairs = load_pairs(&a.manifests)?;
    let mut cfg = PipelineConfig::default();
    apply_selection(&mut cfg, &a.selection_args);
    apply_epoch(&mut cfg, &a.epoch, 0)?;
    let bands = match (&cfg.bands, &a.selection) {
        (Some(b), _) => b.clone(),
        (None, Some(path)) => DominantBands::read_json(path).map_err(stage("bandsel"))?.bands,
        (None, None) => {
            let (_, _, sel) = band_selection(&pairs, &cfg.selection).map_err(stage("bandsel"))?;
            print_selection(&sel);
            sel.bands
        }
    };
    let channels: Vec<ChannelId> = match &a.channels {
        Some(s) => parse_channel_list(s).map_err(|e| CliError::Usage(e.to_string()))?,
        None => ChannelId::MONTAGE.to_vec(),
    };
    for (r2, r3) in &pairs {
        let table = FeatureTable::build(r2, r3, &cfg.epoch).map_err(stage("features"))?;
        let ds = table.dataset(&channels, &bands, cfg.split_seed).map_err(stage("features"))?;
        let dir = if pairs.len() == 1 {
            a.out.clone()
        } else {
            a.out.join(&r2.subject_id)
        };
        ds.write_dir(&dir).map_err(stage("features"))?;
        println!(
            "{}: {} train / {} test epochs, {} features -> {}",
            r2.subject_id,
            ds.train.len(),
            ds.test.len(),
            ds.feature_names.len(),
            dir.display()
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct TrainingConfig<'a> {
    classifier: stereo_eeg::learn::Classifier,
    cv: &'a CvConfig,
    feature_names: &'a [String],
    n_train: usize,
}

fn train(a: TrainArgs) -> Result<()> {
    let (names, rows) = read_feature_csv(&a.dataset).map_err(stage("features"))?;
    let (x, y) = to_matrix(&rows).map_err(stage("features"))?;
    let cv = cv_config(&a.cv, 0)?;
    let result = kfold_select(x.view(), &y, &cv, a.classifier).map_err(stage("learn"))?;

    println!("{} cross-validation ({} folds):", a.classifier, cv.k);
    for row in &result.table {
        println!("  {:<34} mean accuracy {:.4}", row.hyper.to_string(), row.mean_accuracy);
    }
    println!("chosen: {} (CV accuracy {:.4})", result.best, result.best_accuracy);

    let mut model =
        TrainedModel::fit(x.view(), &y, result.best, names.clone()).map_err(stage("learn"))?;
    model.cv_accuracy = Some(result.best_accuracy);
    model.config_hash = config_hash(&TrainingConfig {
        classifier: a.classifier,
        cv: &cv,
        feature_names: &names,
        n_train: rows.len(),
    });

    if let Some(test) = &a.test {
        let (tnames, trows) = read_feature_csv(test).map_err(stage("features"))?;
        if tnames != names {
            return Err(CliError::Stage {
                module: "features",
                source: stereo_eeg::Error::Data("test features differ from training features".into()),
            });
        }
        let (xt, yt) = to_matrix(&trows).map_err(stage("features"))?;
        let (pred, _) = model.predict(xt.view()).map_err(stage("learn"))?;
        let m = metrics(&confusion(&pred, &yt).map_err(stage("eval"))?).map_err(stage("eval"))?;
        let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.4}"));
        println!(
            "test: accuracy {:.4}, sensitivity {}, specificity {}",
            m.accuracy,
            fmt(m.sensitivity),
            fmt(m.specificity)
        );
    }
    if let Some(path) = &a.model_out {
        fs::write(path, model.to_json() + "\n").map_err(|e| CliError::Stage {
            module: "io",
            source: stereo_eeg::Error::Io {
                path: path.clone(),
                source: e,
            },
        })?;
        println!("model written to {}", path.display());
    }
    Ok(())
}

/// Contents of `results.json`.
#[derive(Debug, Serialize, Deserialize)]
pub struct EvaluationFile {
    pub run_config: RunConfig,
    pub results: PipelineResults,
}

fn prepare(a: &EvaluateArgs) -> Result<(RunConfig, Vec<(Recording, Recording)>)> {
    let seed = a.synth.seed;
    let mut cfg = PipelineConfig::default();
    apply_selection(&mut cfg, &a.selection);
    apply_epoch(&mut cfg, &a.epoch, seed)?;
    cfg.cv = cv_config(&a.cv, seed)?;
    apply_rank(&mut cfg, &a.rank);

    let (input, pairs) = if !a.manifests.manifest_2d.is_empty() || !a.manifests.manifest_3d.is_empty() {
        if a.synth.synth_profile.is_some() {
            return Err(CliError::Usage("give manifests or --synth-profile, not both".into()));
        }
        let pairs = load_pairs(&a.manifests)?;
        let input = Input::Manifests {
            pairs: a
                .manifests
                .manifest_2d
                .iter()
                .cloned()
                .zip(a.manifests.manifest_3d.iter().cloned())
                .collect(),
        };
        (input, pairs)
    } else if let Some(profile) = a.synth.synth_profile {
        if a.synth.subjects == 0 {
            return Err(CliError::Usage("--subjects must be ≥ 1".into()));
        }
        let pairs = profile
            .specs(seed, a.synth.subjects)
            .iter()
            .map(|s| generate_pair(s).map_err(stage("synth")))
            .collect::<Result<Vec<_>>>()?;
        let input = Input::Synth {
            profile,
            seed,
            subjects: a.synth.subjects,
        };
        (input, pairs)
    } else {
        return Err(CliError::Usage(
            "give --manifest-2d/--manifest-3d pairs or --synth-profile".into(),
        ));
    };
    Ok((RunConfig { input, pipeline: cfg }, pairs))
}

fn execute(run: &RunConfig, pairs: &[(Recording, Recording)]) -> Result<PipelineResults> {
    run_pipeline(pairs, &run.pipeline).map_err(|e| {
        let module = match &e {
            stereo_eeg::Error::Numerical(_) => "learn",
            _ => "pipeline",
        };
        CliError::Stage { module, source: e }
    })
}

fn print_results(r: &PipelineResults) {
    print_selection(&r.selection);
    let names = |v: &[ChannelId]| v.iter().map(|c| c.name()).collect::<Vec<_>>().join(" ");
    println!("PLSR-ranked channels: {}", names(&r.ranked_plsr));
    println!("SVM-ranked channels: {}", names(&r.ranked_svm));
    for curve in [&r.combo_plsr, &r.combo_svm].into_iter().flatten() {
        for c in stereo_eeg::learn::Classifier::ALL {
            if let Some(best) = curve.best(c) {
                println!(
                    "{}-ranked combos, {c}: best {:.4} with {} channels",
                    curve.ranking,
                    best.get(c).accuracy,
                    best.size
                );
            }
        }
    }
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let (run, pairs) = prepare(&a)?;
    let results = execute(&run, &pairs)?;
    create_dir(&a.out)?;
    let path = a.out.join("results.json");
    write_json(&path, &EvaluationFile { run_config: run, results: results.clone() })?;
    print_results(&results);
    println!("results written to {}", path.display());
    Ok(())
}

fn report(a: ReportArgs) -> Result<()> {
    let text = fs::read_to_string(&a.results).map_err(|e| CliError::Stage {
        module: "report",
        source: stereo_eeg::Error::Io {
            path: a.results.clone(),
            source: e,
        },
    })?;
    let file: EvaluationFile = serde_json::from_str(&text).map_err(|e| CliError::Stage {
        module: "report",
        source: stereo_eeg::Error::Parse {
            path: a.results.clone(),
            message: e.to_string(),
        },
    })?;
    let written = emit_reports(&file.results, &a.out, file.run_config.summary()).map_err(stage("eval"))?;
    for p in written {
        println!("{}", p.display());
    }
    Ok(())
}

fn all(a: AllArgs) -> Result<()> {
    let out: PathBuf = a.eval.out.clone();
    let (run, pairs) = prepare(&a.eval)?;
    create_dir(&out)?;
    if a.write_recordings {
        for (r2, r3) in &pairs {
            for rec in [r2, r3] {
                let dir = out.join("recordings").join(&rec.subject_id).join(rec.condition.as_str());
                write_recording(rec, &dir).map_err(stage("model"))?;
            }
        }
    }
    let results = execute(&run, &pairs)?;
    results.selection.write_json(&out.join("selection.json")).map_err(stage("bandsel"))?;
    write_json(
        &out.join("results.json"),
        &EvaluationFile {
            run_config: run.clone(),
            results: results.clone(),
        },
    )?;
    emit_reports(&results, &out, run.summary()).map_err(stage("eval"))?;
    print_results(&results);
    println!("report bundle written to {}", out.display());
    Ok(())
}
