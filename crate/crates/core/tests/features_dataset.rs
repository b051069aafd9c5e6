use std::collections::HashSet;
use std::sync::OnceLock;

use stereo_eeg::features::*;
use stereo_eeg::model::{BandLabel, ChannelId, Condition, Recording, Trial};
use stereo_eeg::synth::{default_paper_profile, generate_pair};

fn pair() -> &'static (Recording, Recording) {
    static PAIR: OnceLock<(Recording, Recording)> = OnceLock::new();
    PAIR.get_or_init(|| generate_pair(&default_paper_profile(21)).unwrap())
}

fn table() -> &'static FeatureTable {
    static TABLE: OnceLock<FeatureTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        let (r2, r3) = pair();
        FeatureTable::build(r2, r3, &EpochConfig::default()).unwrap()
    })
}

const BANDS: [BandLabel; 2] = [BandLabel::Delta, BandLabel::Theta];

type Key = (Condition, usize, usize);

fn keys(rows: &[FeatureVector]) -> Vec<Key> {
    rows.iter().map(|r| (r.condition, r.trial, r.epoch)).collect()
}

#[test]
fn table_holds_630_epochs() {
    let t = table();
    assert_eq!(t.epochs.len(), 630);
    assert_eq!(t.values.dim(), (630, 20, 4));
    assert!(t.values.iter().all(|v| v.is_finite() && *v >= 0.0));
}

#[test]
fn random_split_is_balanced_and_disjoint() {
    let ds = table().dataset(&[ChannelId::T6, ChannelId::Oz], &BANDS, 3).unwrap();
    assert_eq!(ds.feature_names, ["T6_delta", "T6_theta", "Oz_delta", "Oz_theta"]);
    assert_eq!((ds.train.len(), ds.test.len()), (316, 314));
    for (rows, want) in [(&ds.train, 158), (&ds.test, 157)] {
        for label in [1.0, -1.0] {
            assert_eq!(rows.iter().filter(|r| r.label == label).count(), want);
        }
    }
    let train: HashSet<Key> = keys(&ds.train).into_iter().collect();
    let test: HashSet<Key> = keys(&ds.test).into_iter().collect();
    assert!(train.is_disjoint(&test));
    assert_eq!(train.len() + test.len(), 630);
}

#[test]
fn split_is_deterministic_per_seed() {
    let t = table();
    let a = t.dataset(&[ChannelId::T6], &BANDS, 3).unwrap();
    let b = t.dataset(&[ChannelId::T6], &BANDS, 3).unwrap();
    let c = t.dataset(&[ChannelId::T6], &BANDS, 4).unwrap();
    assert_eq!(a, b);
    assert_ne!(keys(&a.train), keys(&c.train));
    // The split does not depend on which channels are selected.
    let wide = t.dataset(&[ChannelId::Fp1, ChannelId::T6], &BANDS, 3).unwrap();
    assert_eq!(keys(&a.train), keys(&wide.train));
}

#[test]
fn channel_features_concatenate() {
    let t = table();
    let one = t.dataset(&[ChannelId::T6], &BANDS, 1).unwrap();
    let two = t.dataset(&[ChannelId::T6, ChannelId::Oz], &BANDS, 1).unwrap();
    let oz = t.dataset(&[ChannelId::Oz], &BANDS, 1).unwrap();
    for ((a, b), c) in one.train.iter().zip(&two.train).zip(&oz.train) {
        assert_eq!(&b.values[..2], &a.values[..]);
        assert_eq!(&b.values[2..], &c.values[..]);
    }
}

#[test]
fn chronological_split_takes_leading_epochs() {
    let (r2, r3) = pair();
    let cfg = EpochConfig { split: SplitMethod::Chronological, ..EpochConfig::default() };
    let t = FeatureTable::build(r2, r3, &cfg).unwrap();
    let ds = t.dataset(&[ChannelId::T6], &BANDS, 0).unwrap();
    for cond in [Condition::TwoD, Condition::ThreeD] {
        let last_train = ds.train.iter().filter(|r| r.condition == cond).map(|r| (r.trial, r.epoch)).max().unwrap();
        let first_test = ds.test.iter().filter(|r| r.condition == cond).map(|r| (r.trial, r.epoch)).min().unwrap();
        assert!(last_train < first_test);
    }
}

#[test]
fn percentages_ignore_amplitude_scale() {
    let (r2, r3) = pair();
    let scale = |r: &Recording| Recording {
        trials: r.trials.iter().map(|t| Trial::new(&t.samples * 0.01)).collect(),
        ..r.clone()
    };
    let cfg = EpochConfig::default();
    let a = build_dataset(r2, r3, &[ChannelId::Pz], &BANDS, 2, &cfg).unwrap();
    let b = build_dataset(&scale(r2), &scale(r3), &[ChannelId::Pz], &BANDS, 2, &cfg).unwrap();
    for (x, y) in a.train.iter().chain(&a.test).zip(b.train.iter().chain(&b.test)) {
        for (u, v) in x.values.iter().zip(&y.values) {
            assert!((u - v).abs() < 1e-6);
        }
    }
}

#[test]
fn feature_csv_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let ds = table().dataset(&[ChannelId::C3, ChannelId::O2], &BANDS, 5).unwrap();
    ds.write_dir(dir.path()).unwrap();
    let (names, rows) = read_feature_csv(&dir.path().join("train.csv")).unwrap();
    assert_eq!(names, ds.feature_names);
    assert_eq!(rows, ds.train);
}
