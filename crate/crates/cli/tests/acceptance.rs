//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! fails.

use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use nalgebra::Complex;

type Complex64 = Complex<f64>;
use stereo_eeg::bandsel::{condition_band_matrix, diff_matrix, select_dominant_bands, SelectionConfig};
use stereo_eeg::dsp::{band_power, design_butter_bandpass, design_notch, filtfilt, hanning, psd, stft};
use stereo_eeg::eval::{confusion, metrics, run_pipeline, Evaluator, PipelineConfig, REPORT_FILES};
use stereo_eeg::features::{epoch_starts, EpochConfig, FeatureTable};
use stereo_eeg::learn::{labels_from_scores, plsr_fit, svm_fit, Classifier, SvmModel, SMO_TOLERANCE};
use stereo_eeg::model::{BandLabel, ChannelId, SAMPLING_RATE, TRIALS_PER_RECORDING, TRIAL_SAMPLES};
use stereo_eeg::synth::{default_paper_profile, generate_pair, EffectSpec};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check, Duration);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn e<T: std::fmt::Display>(err: T) -> String {
    err.to_string()
}

fn epoch_arithmetic() -> Check {
    let (win, starts) = epoch_starts(TRIAL_SAMPLES, SAMPLING_RATE, 4.0, 3.5).map_err(e)?;
    ensure(win == 2048, format!("window {win} samples"))?;
    ensure(starts.len() == 21, format!("{} epochs per trial", starts.len()))?;
    let per_class = starts.len() * TRIALS_PER_RECORDING;
    ensure(per_class == 315, format!("{per_class} epochs per class"))?;
    ensure(2 * per_class == 630, "630 epochs total")?;
    let train = EpochConfig::default().train_per_class;
    let test = per_class - train;
    ensure(train == 158 && test == 157, format!("split {train}/{test}"))?;
    Ok("21/trial, 315/class, 630 total, 158/157".into())
}

fn brute_dft_frame(seg: &[f64], w: &[f64], fs: f64) -> Vec<f64> {
    let n = seg.len();
    let s2: f64 = w.iter().map(|v| v * v).sum();
    (0..=n / 2)
        .map(|k| {
            let x: Complex64 = seg
                .iter()
                .zip(w)
                .enumerate()
                .map(|(t, (x, w))| Complex64::from_polar(x * w, -2.0 * PI * (k * t) as f64 / n as f64))
                .sum();
            let edge = k == 0 || k == n / 2;
            x.norm_sqr() / (fs * s2) * if edge { 1.0 } else { 2.0 }
        })
        .collect()
}

fn spectral_oracle() -> Check {
    let mut rng = StdRng::seed_from_u64(2);
    let (n, win, hop) = (1024, 256, 96);
    let w = hanning(win).map_err(e)?;
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let s = stft(&x, SAMPLING_RATE, win, hop).map_err(e)?;
        for (f, frame) in s.frames.outer_iter().enumerate() {
            let start = f * hop;
            let want = brute_dft_frame(&x[start..start + win], &w, SAMPLING_RATE);
            let scale = want.iter().cloned().fold(0.0, f64::max);
            for (a, b) in frame.iter().zip(&want) {
                worst = worst.max((a - b).abs() / scale);
            }
        }
    }
    ensure(worst < 1e-9, format!("STFT vs DFT relative error {worst:e}"))?;

    let x: Vec<f64> = (0..TRIAL_SAMPLES)
        .map(|t| (2.0 * PI * 8.0 * t as f64 / SAMPLING_RATE).sin())
        .collect();
    let p = psd(&x, SAMPLING_RATE, 512, 1).map_err(e)?;
    let bp = band_power(&p, 7.0, 9.0).map_err(e)?;
    let rel = (bp - 0.5) / 0.5;
    ensure(
        rel.abs() <= 0.05,
        format!("STFT max rel err {worst:.1e} ok; 8 Hz power over [7, 9] = {bp:.4} µV² ({:+.1}% vs 0.5)", rel * 100.0),
    )?;
    Ok(format!("max rel err {worst:.1e}, [7, 9] power {bp:.4}"))
}

fn filter_contract() -> Check {
    let f = design_butter_bandpass(3, 1.0, 55.0, SAMPLING_RATE).map_err(e)?;
    for edge in [1.0, 55.0] {
        let g = f.gain_db(edge);
        ensure((g + 3.0).abs() <= 0.2, format!("{edge} Hz edge at {g:.3} dB"))?;
    }
    let n = 8193;
    let mid = n / 2;
    let mut imp = vec![0.0; n];
    imp[mid] = 1.0;
    let y = filtfilt(&f, &imp).map_err(e)?;
    let asym = (1..mid).map(|k| (y[mid - k] - y[mid + k]).abs()).fold(0.0, f64::max);
    ensure(asym < 1e-9, format!("impulse asymmetry {asym:e}"))?;

    let notch = design_notch(50.0, SAMPLING_RATE, 2.0).map_err(e)?;
    let x: Vec<f64> = (0..10 * 512).map(|t| (2.0 * PI * 50.0 * t as f64 / SAMPLING_RATE).sin()).collect();
    let y = filtfilt(&notch, &x).map_err(e)?;
    let rms = |v: &[f64]| (v.iter().map(|a| a * a).sum::<f64>() / v.len() as f64).sqrt();
    let core = 2 * 512..8 * 512;
    let att = -20.0 * (rms(&y[core.clone()]) / rms(&x[core])).log10();
    ensure(att >= 35.0, format!("notch attenuation {att:.1} dB"))?;
    Ok(format!(
        "edges {:.3}/{:.3} dB, asymmetry {asym:.1e}, notch {att:.1} dB",
        f.gain_db(1.0),
        f.gain_db(55.0)
    ))
}

fn band_selection() -> Check {
    let run = || -> Result<_, String> {
        let (r2, r3) = generate_pair(&default_paper_profile(7)).map_err(e)?;
        let cfg = SelectionConfig::default();
        let d = diff_matrix(
            &condition_band_matrix(&r2, &cfg).map_err(e)?,
            &condition_band_matrix(&r3, &cfg).map_err(e)?,
        )
        .map_err(e)?;
        let sel = select_dominant_bands(&d, cfg.threshold, cfg.n_select);
        Ok((d, sel))
    };
    let (d, sel) = run()?;
    ensure(
        sel.bands == vec![BandLabel::Delta, BandLabel::Theta],
        format!("elected {:?}", sel.bands),
    )?;
    let delta: Vec<(ChannelId, f64)> =
        d.channels.iter().map(|&c| (c, d.get(c, BandLabel::Delta).unwrap())).collect();
    let (top, top_v) = delta.iter().copied().fold((ChannelId::Fp1, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
    ensure(top == ChannelId::T6, format!("largest δ entry at {top} ({top_v:.2})"))?;
    let oz = d.get(ChannelId::Oz, BandLabel::Theta).unwrap();
    ensure(oz < 0.0, format!("(Oz, θ) = {oz:.2}"))?;
    let (d2, sel2) = run()?;
    ensure(d2 == d && sel2 == sel, "repeat run differs")?;
    Ok(format!("bands {{δ, θ}}, T6 δ {top_v:.2}, Oz θ {oz:.2}, deterministic"))
}

fn ols_scores(x: &Array2<f64>, y: &[f64]) -> Vec<f64> {
    let (n, p) = x.dim();
    let a = DMatrix::from_fn(n, p + 1, |i, j| if j == 0 { 1.0 } else { x[[i, j - 1]] });
    let beta = (a.transpose() * &a)
        .cholesky()
        .expect("full rank")
        .solve(&(a.transpose() * DVector::from_column_slice(y)));
    (a * beta).iter().copied().collect()
}

fn kkt_violation(x: &Array2<f64>, y: &[f64], m: &SvmModel) -> f64 {
    let mut alpha = vec![0.0; y.len()];
    for (&i, a) in m.support_indices.iter().zip(&m.dual_coefficients) {
        alpha[i] = a * y[i];
    }
    let mut worst = m.dual_coefficients.iter().sum::<f64>().abs();
    for i in 0..y.len() {
        let g = y[i] * m.decision(x.row(i)).unwrap() - 1.0;
        let v = if alpha[i] <= 0.0 {
            (-g).max(0.0)
        } else if alpha[i] >= m.c {
            g.max(0.0)
        } else {
            g.abs()
        };
        worst = worst.max(v);
    }
    worst
}

fn classifier_oracles() -> Check {
    let mut rng = StdRng::seed_from_u64(5);
    let mut plsr_err = 0.0f64;
    let mut kkt = 0.0f64;
    for _ in 0..20 {
        let (n, p) = (60, rng.random_range(2..6));
        let x = Array2::from_shape_fn((n, p), |_| rng.random_range(-2.0..2.0));
        let y: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let m = plsr_fit(x.view(), &y, p).map_err(e)?;
        for (a, b) in m.scores(x.view()).map_err(e)?.iter().zip(ols_scores(&x, &y)) {
            plsr_err = plsr_err.max((a - b).abs());
        }
        let sigma = rng.random_range(0.3..3.0);
        let c = [0.1, 1.0, 10.0, 100.0][rng.random_range(0..4)];
        let svm = svm_fit(x.view(), &y, sigma, c).map_err(e)?;
        kkt = kkt.max(kkt_violation(&x, &y, &svm));
    }
    ensure(plsr_err < 1e-6, format!("PLSR vs least squares {plsr_err:e}"))?;
    ensure(kkt <= SMO_TOLERANCE, format!("KKT violation {kkt:e}"))?;

    let x = Array2::from_shape_fn((40, 2), |(i, _)| {
        let c = if i < 20 { -2.0 } else { 2.0 };
        c + rng.random_range(-0.5..0.5)
    });
    let y: Vec<f64> = (0..40).map(|i| if i < 20 { -1.0 } else { 1.0 }).collect();
    let svm = svm_fit(x.view(), &y, 1.0, 10.0).map_err(e)?;
    kkt = kkt.max(kkt_violation(&x, &y, &svm));
    ensure(kkt <= SMO_TOLERANCE, format!("KKT violation {kkt:e}"))?;
    let pred = labels_from_scores(&svm.scores(x.view()).map_err(e)?);
    ensure(pred == y, "separable blobs not fit exactly")?;
    Ok(format!("PLSR err {plsr_err:.1e}, worst KKT {kkt:.1e}, blobs 100%"))
}

fn four_channel_profile(seed: u64) -> EffectSpec {
    let mut spec = EffectSpec { line_noise: 5.0, ..EffectSpec::uniform(seed) };
    for ch in [ChannelId::T6, ChannelId::P3, ChannelId::C4] {
        spec = spec.with_effect(ch, BandLabel::Delta, 1.2, 1.0);
    }
    spec.with_effect(ChannelId::Oz, BandLabel::Theta, 1.0, 1.25)
}

fn pipeline_discrimination() -> Check {
    let spec = four_channel_profile(11);
    let pair = generate_pair(&spec).map_err(e)?;
    let cfg = PipelineConfig { split_seed: 11, ..PipelineConfig::default() };
    let pairs = vec![pair];
    let res = run_pipeline(&pairs, &cfg).map_err(e)?;
    let planted = [
        (ChannelId::T6, BandLabel::Delta),
        (ChannelId::P3, BandLabel::Delta),
        (ChannelId::C4, BandLabel::Delta),
        (ChannelId::Oz, BandLabel::Theta),
    ];
    let effect = planted
        .iter()
        .map(|&(c, b)| res.band_diff.get(c, b).unwrap().abs())
        .fold(f64::INFINITY, f64::min);
    ensure(effect >= 3.0, format!("smallest planted |diff| {effect:.2} < 3 points"))?;

    let best = |c: Classifier| {
        [&res.combo_plsr, &res.combo_svm]
            .into_iter()
            .flatten()
            .filter_map(|curve| curve.best(c))
            .max_by(|a, b| a.get(c).accuracy.total_cmp(&b.get(c).accuracy))
            .cloned()
    };
    let best_svm = best(Classifier::Svm).ok_or("no ranked channels")?;
    let best_plsr = best(Classifier::Plsr).ok_or("no ranked channels")?;
    let (svm_acc, plsr_acc) = (best_svm.svm.accuracy, best_plsr.plsr.accuracy);
    let detail = format!("planted ≥ {effect:.2} pts; best SVM {svm_acc:.3} ({} ch), PLSR {plsr_acc:.3} ({} ch)", best_svm.size, best_plsr.size);
    ensure(svm_acc >= 0.90, detail.clone())?;
    ensure(plsr_acc >= 0.80, detail.clone())?;

    let shuffled = PipelineConfig { shuffle_labels: true, ..cfg.clone() };
    let tables = vec![FeatureTable::build(&pairs[0].0, &pairs[0].1, &shuffled.epoch).map_err(e)?];
    let mut ev = Evaluator::new(&tables, res.feature_bands.clone(), &shuffled).map_err(e)?;
    let s_svm = ev.evaluate(&best_svm.channels, Classifier::Svm).map_err(e)?.accuracy;
    let s_plsr = ev.evaluate(&best_plsr.channels, Classifier::Plsr).map_err(e)?.accuracy;
    for (name, a) in [("SVM", s_svm), ("PLSR", s_plsr)] {
        ensure((0.40..=0.60).contains(&a), format!("{name} with permuted labels {a:.3}"))?;
    }
    Ok(format!(
        "planted ≥ {effect:.2} pts; best SVM {svm_acc:.3} ({} ch), PLSR {plsr_acc:.3} ({} ch); permuted {s_svm:.3}/{s_plsr:.3}",
        best_svm.size, best_plsr.size
    ))
}

fn metric_identities() -> Check {
    let mut rng = StdRng::seed_from_u64(9);
    for _ in 0..1000 {
        let n = rng.random_range(1..200);
        let truth: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
        let pred: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
        let c = confusion(&pred, &truth).map_err(e)?;
        let m = metrics(&c).map_err(e)?;
        let tp = pred.iter().zip(&truth).filter(|(p, t)| **p > 0.0 && **t > 0.0).count();
        let tn = pred.iter().zip(&truth).filter(|(p, t)| **p < 0.0 && **t < 0.0).count();
        let pos = truth.iter().filter(|t| **t > 0.0).count();
        let neg = n - pos;
        ensure(m.accuracy == (tp + tn) as f64 / n as f64, "accuracy")?;
        ensure(m.sensitivity == (pos > 0).then(|| tp as f64 / pos as f64), "sensitivity")?;
        ensure(m.specificity == (neg > 0).then(|| tn as f64 / neg as f64), "specificity")?;

        let flip = |v: &[f64]| v.iter().map(|x| -x).collect::<Vec<f64>>();
        let s = metrics(&confusion(&flip(&pred), &flip(&truth)).map_err(e)?).map_err(e)?;
        ensure(s.accuracy == m.accuracy, "swap changes accuracy")?;
        ensure(s.sensitivity == m.specificity && s.specificity == m.sensitivity, "swap symmetry")?;
    }
    Ok("1000 matrices, exact".into())
}

fn run_all(out: &Path, threads: Option<&str>) -> Result<(), String> {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_stereo-eeg"));
    cmd.args(["all", "--synth-profile", "paper", "--seed", "3", "--subjects", "1", "--out"])
        .arg(out)
        .env_remove("STEREO_EEG_THREADS");
    if let Some(t) = threads {
        cmd.env("STEREO_EEG_THREADS", t);
    }
    let status = cmd.output().map_err(e)?;
    ensure(status.status.success(), format!("`all` exited {:?}", status.status.code()))
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(e)?;
    let runs = [("a", None), ("b", None), ("t1", Some("1")), ("t8", Some("8"))];
    for (name, threads) in runs {
        run_all(&dir.path().join(name), threads)?;
    }
    for file in REPORT_FILES {
        let reference = std::fs::read(dir.path().join("a").join(file)).map_err(e)?;
        for (name, _) in &runs[1..] {
            let other = std::fs::read(dir.path().join(name).join(file)).map_err(e)?;
            ensure(other == reference, format!("{file} differs in run {name}"))?;
        }
    }
    Ok(format!("{} files identical over 2 runs and threads {{1, 8}}", REPORT_FILES.len()))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("1 epoch arithmetic", epoch_arithmetic, Duration::from_secs(1)),
        ("2 spectral oracle", spectral_oracle, Duration::from_secs(10)),
        ("3 filter contract", filter_contract, Duration::from_secs(5)),
        ("4 band selection", band_selection, Duration::from_secs(120)),
        ("5 classifier oracles", classifier_oracles, Duration::from_secs(30)),
        ("6 pipeline discrimination", pipeline_discrimination, Duration::from_secs(300)),
        ("7 metric identities", metric_identities, Duration::from_secs(1)),
        ("8 determinism", determinism, Duration::from_secs(600)),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, check, budget) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let t = Instant::now();
        let outcome = check();
        let took = t.elapsed();
        let outcome = outcome.and_then(|m| {
            if took <= budget {
                Ok(m)
            } else {
                Err(format!("{m}; took {took:.1?} > {budget:?}"))
            }
        });
        match outcome {
            Ok(m) => println!("PASS  {name}: {m} [{took:.2?}]"),
            Err(m) => {
                failed += 1;
                println!("FAIL  {name}: {m} [{took:.2?}]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
