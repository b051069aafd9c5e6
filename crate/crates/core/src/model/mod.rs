//! Domain types shared by every stage of the pipeline: montage channels,
//! recordings, frequency bands and the recording paradigm constants.

mod manifest;

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use manifest::{read_recording, write_recording, Manifest};

/// Sampling rate of every recording, in Hz.
pub const SAMPLING_RATE: f64 = 512.0;
/// Trials recorded per subject and condition.
pub const TRIALS_PER_RECORDING: usize = 15;
/// Length of the video-watching segment of one trial, in seconds.
pub const TRIAL_SECONDS: f64 = 14.0;
/// Samples per channel in one trial (14 s at 512 Hz).
pub const TRIAL_SAMPLES: usize = 7168;

/// Data electrodes of the 10-20 montage. Cz is the reference and is never a
/// data channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ChannelId {
    Fp1,
    Fpz,
    Fp2,
    F3,
    F4,
    F7,
    F8,
    C3,
    C4,
    Fz,
    P3,
    P4,
    Pz,
    O1,
    O2,
    T3,
    T4,
    T5,
    T6,
    Oz,
}

impl ChannelId {
    /// All data channels in montage order.
    pub const MONTAGE: [ChannelId; 20] = [
        ChannelId::Fp1,
        ChannelId::Fpz,
        ChannelId::Fp2,
        ChannelId::F3,
        ChannelId::F4,
        ChannelId::F7,
        ChannelId::F8,
        ChannelId::C3,
        ChannelId::C4,
        ChannelId::Fz,
        ChannelId::P3,
        ChannelId::P4,
        ChannelId::Pz,
        ChannelId::O1,
        ChannelId::O2,
        ChannelId::T3,
        ChannelId::T4,
        ChannelId::T5,
        ChannelId::T6,
        ChannelId::Oz,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ChannelId::Fp1 => "Fp1",
            ChannelId::Fpz => "Fpz",
            ChannelId::Fp2 => "Fp2",
            ChannelId::F3 => "F3",
            ChannelId::F4 => "F4",
            ChannelId::F7 => "F7",
            ChannelId::F8 => "F8",
            ChannelId::C3 => "C3",
            ChannelId::C4 => "C4",
            ChannelId::Fz => "Fz",
            ChannelId::P3 => "P3",
            ChannelId::P4 => "P4",
            ChannelId::Pz => "Pz",
            ChannelId::O1 => "O1",
            ChannelId::O2 => "O2",
            ChannelId::T3 => "T3",
            ChannelId::T4 => "T4",
            ChannelId::T5 => "T5",
            ChannelId::T6 => "T6",
            ChannelId::Oz => "Oz",
        }
    }

    /// Position in the montage order.
    pub fn index(self) -> usize {
        self as usize
    }

    /// Frontal electrodes (Fp*, F*).
    pub fn is_frontal(self) -> bool {
        matches!(
            self,
            ChannelId::Fp1
                | ChannelId::Fpz
                | ChannelId::Fp2
                | ChannelId::F3
                | ChannelId::F4
                | ChannelId::F7
                | ChannelId::F8
                | ChannelId::Fz
        )
    }
}

impl fmt::Display for ChannelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ChannelId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        ChannelId::MONTAGE
            .iter()
            .copied()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::data(format!("unknown channel label {s:?}")))
    }
}

/// Parses a comma-separated channel list such as `"O2,T4,Fz"`.
pub fn parse_channel_list(s: &str) -> Result<Vec<ChannelId>> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(str::parse)
        .collect()
}

/// Viewing condition. 2D is the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Condition {
    #[serde(rename = "2D", alias = "TwoD")]
    TwoD,
    #[serde(rename = "3D", alias = "ThreeD")]
    ThreeD,
}

impl Condition {
    /// Class label: +1 for 2D, -1 for 3D.
    pub fn label(self) -> f64 {
        match self {
            Condition::TwoD => 1.0,
            Condition::ThreeD => -1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::TwoD => "2D",
            Condition::ThreeD => "3D",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "2d" | "twod" => Ok(Condition::TwoD),
            "3d" | "threed" => Ok(Condition::ThreeD),
            other => Err(Error::data(format!("unknown condition {other:?}"))),
        }
    }
}

/// One trial: a `[channel × time]` matrix of microvolts.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub samples: Array2<f64>,
}

impl Trial {
    pub fn new(samples: Array2<f64>) -> Self {
        Self { samples }
    }

    pub fn n_channels(&self) -> usize {
        self.samples.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.samples.ncols()
    }
}

/// One subject watching one condition.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub subject_id: String,
    pub condition: Condition,
    pub fs: f64,
    pub channels: Vec<ChannelId>,
    pub trials: Vec<Trial>,
}

impl Recording {
    /// Row index of `channel` within each trial.
    pub fn channel_row(&self, channel: ChannelId) -> Result<usize> {
        self.channels
            .iter()
            .position(|&c| c == channel)
            .ok_or_else(|| {
                Error::data(format!(
                    "channel {channel} missing from recording {}",
                    self.subject_id
                ))
            })
    }
}

/// Invariant violations found in a recording. Empty means valid.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub problems: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.problems.is_empty()
    }

    /// Converts a non-empty report into a data error.
    pub fn into_result(self) -> Result<()> {
        if self.is_valid() {
            Ok(())
        } else {
            Err(Error::data(self.problems.join("; ")))
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.problems.is_empty() {
            return f.write_str("valid");
        }
        for p in &self.problems {
            writeln!(f, "{p}")?;
        }
        Ok(())
    }
}

pub fn validate_recording(rec: &Recording) -> ValidationReport {
    let mut problems = Vec::new();

    if rec.fs != SAMPLING_RATE {
        problems.push(format!("sampling rate {} ≠ {SAMPLING_RATE}", rec.fs));
    }
    if rec.channels.len() != ChannelId::MONTAGE.len() {
        problems.push(format!(
            "channel count {} ≠ {}",
            rec.channels.len(),
            ChannelId::MONTAGE.len()
        ));
    }
    for (i, c) in rec.channels.iter().enumerate() {
        if rec.channels[..i].contains(c) {
            problems.push(format!("duplicate channel {c}"));
        }
    }
    if rec.trials.len() != TRIALS_PER_RECORDING {
        problems.push(format!(
            "trial count {} ≠ {TRIALS_PER_RECORDING}",
            rec.trials.len()
        ));
    }
    for (t, trial) in rec.trials.iter().enumerate() {
        if trial.n_channels() != rec.channels.len() {
            problems.push(format!(
                "trial {t}: channel mismatch ({} rows for {} channels)",
                trial.n_channels(),
                rec.channels.len()
            ));
        }
        if trial.n_samples() != TRIAL_SAMPLES {
            problems.push(format!(
                "trial {t}: sample count {} ≠ {TRIAL_SAMPLES}",
                trial.n_samples()
            ));
        }
        for (row, lane) in trial.samples.outer_iter().enumerate() {
            if let Some(col) = lane.iter().position(|v| !v.is_finite()) {
                let name = rec
                    .channels
                    .get(row)
                    .map(|c| c.name().to_string())
                    .unwrap_or_else(|| format!("row {row}"));
                problems.push(format!(
                    "trial {t}: non-finite sample in channel {name} at index {col}"
                ));
            }
        }
    }

    ValidationReport { problems }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BandLabel {
    Delta,
    Theta,
    Alpha,
    Beta,
    Gamma,
}

impl BandLabel {
    pub fn symbol(self) -> &'static str {
        match self {
            BandLabel::Delta => "delta",
            BandLabel::Theta => "theta",
            BandLabel::Alpha => "alpha",
            BandLabel::Beta => "beta",
            BandLabel::Gamma => "gamma",
        }
    }
}

impl fmt::Display for BandLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl FromStr for BandLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "delta" | "δ" | "d" => Ok(BandLabel::Delta),
            "theta" | "θ" | "t" => Ok(BandLabel::Theta),
            "alpha" | "α" | "a" => Ok(BandLabel::Alpha),
            "beta" | "β" | "b" => Ok(BandLabel::Beta),
            "gamma" | "γ" | "g" => Ok(BandLabel::Gamma),
            other => Err(Error::data(format!("unknown band {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyBand {
    pub label: BandLabel,
    pub lo: f64,
    pub hi: f64,
}

impl FrequencyBand {
    pub const fn new(label: BandLabel, lo: f64, hi: f64) -> Self {
        Self { label, lo, hi }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Which analysis stage a band scheme belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Selection,
    Epoch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandScheme {
    pub phase: Phase,
    pub bands: Vec<FrequencyBand>,
    pub total_range: (f64, f64),
}

impl BandScheme {
    /// Five bands over 1–49 Hz, used to pick the dominant bands.
    pub fn selection() -> Self {
        use BandLabel::*;
        Self {
            phase: Phase::Selection,
            bands: vec![
                FrequencyBand::new(Delta, 1.0, 4.0),
                FrequencyBand::new(Theta, 4.0, 8.0),
                FrequencyBand::new(Alpha, 8.0, 13.0),
                FrequencyBand::new(Beta, 13.0, 25.0),
                FrequencyBand::new(Gamma, 25.0, 49.0),
            ],
            total_range: (1.0, 49.0),
        }
    }

    /// Four bands over 1–30 Hz (gamma removed), used for epoch features.
    pub fn epoch() -> Self {
        use BandLabel::*;
        Self {
            phase: Phase::Epoch,
            bands: vec![
                FrequencyBand::new(Delta, 1.0, 4.0),
                FrequencyBand::new(Theta, 4.0, 8.0),
                FrequencyBand::new(Alpha, 8.0, 12.0),
                FrequencyBand::new(Beta, 12.0, 30.0),
            ],
            total_range: (1.0, 30.0),
        }
    }

    pub fn labels(&self) -> Vec<BandLabel> {
        self.bands.iter().map(|b| b.label).collect()
    }

    pub fn position(&self, label: BandLabel) -> Option<usize> {
        self.bands.iter().position(|b| b.label == label)
    }

    pub fn band(&self, label: BandLabel) -> Option<&FrequencyBand> {
        self.bands.iter().find(|b| b.label == label)
    }

    /// Band owning frequency `f`. A frequency on a shared edge belongs to the
    /// lower band; the scheme's lowest edge belongs to the first band.
    pub fn band_of(&self, f: f64) -> Option<usize> {
        let first = self.bands.first()?;
        if f == first.lo {
            return Some(0);
        }
        self.bands.iter().position(|b| f > b.lo && f <= b.hi)
    }

    /// Checks that the bands are ordered, non-empty and tile `total_range`.
    pub fn check(&self) -> Result<()> {
        let (lo, hi) = self.total_range;
        let first = self
            .bands
            .first()
            .ok_or_else(|| Error::invalid("band scheme has no bands"))?;
        if first.lo != lo || self.bands.last().map(|b| b.hi) != Some(hi) {
            return Err(Error::invalid("bands do not span the total range"));
        }
        for b in &self.bands {
            if !(b.lo < b.hi) {
                return Err(Error::invalid(format!("band {} has lo ≥ hi", b.label)));
            }
        }
        for w in self.bands.windows(2) {
            if w[0].hi != w[1].lo {
                return Err(Error::invalid(format!(
                    "bands {} and {} are not contiguous",
                    w[0].label, w[1].label
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn valid_recording() -> Recording {
        Recording {
            subject_id: "S01".into(),
            condition: Condition::TwoD,
            fs: SAMPLING_RATE,
            channels: ChannelId::MONTAGE.to_vec(),
            trials: (0..TRIALS_PER_RECORDING)
                .map(|_| Trial::new(Array2::zeros((20, TRIAL_SAMPLES))))
                .collect(),
        }
    }

    #[test]
    fn montage_has_twenty_distinct_labels_without_cz() {
        let mut names: Vec<_> = ChannelId::MONTAGE.iter().map(|c| c.name()).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), 20);
        assert!(!names.contains(&"Cz"));
        assert!("Cz".parse::<ChannelId>().is_err());
        for (i, c) in ChannelId::MONTAGE.iter().enumerate() {
            assert_eq!(c.index(), i);
            assert_eq!(c.name().parse::<ChannelId>().unwrap(), *c);
        }
    }

    #[test]
    fn well_formed_recording_is_valid() {
        assert!(validate_recording(&valid_recording()).is_valid());
    }

    #[test]
    fn reports_wrong_trial_count() {
        let mut rec = valid_recording();
        rec.trials.pop();
        let report = validate_recording(&rec);
        assert!(report.problems.iter().any(|p| p == "trial count 14 ≠ 15"));
    }

    #[test]
    fn reports_nan_location() {
        let mut rec = valid_recording();
        rec.trials[3].samples[[18, 100]] = f64::NAN;
        let report = validate_recording(&rec);
        assert_eq!(report.problems.len(), 1);
        assert!(report.problems[0].contains("trial 3"));
        assert!(report.problems[0].contains("T6"));
    }

    #[test]
    fn reports_fs_and_channel_mismatch() {
        let mut rec = valid_recording();
        rec.fs = 256.0;
        rec.trials[0] = Trial::new(Array2::zeros((19, TRIAL_SAMPLES)));
        let report = validate_recording(&rec);
        assert_eq!(report.problems.len(), 2, "{report}");
    }

    #[test]
    fn presets_tile_their_ranges() {
        for scheme in [BandScheme::selection(), BandScheme::epoch()] {
            scheme.check().unwrap();
            let total: f64 = scheme.bands.iter().map(FrequencyBand::width).sum();
            assert_eq!(total, scheme.total_range.1 - scheme.total_range.0);
        }
        assert_eq!(BandScheme::epoch().band(BandLabel::Gamma), None);
    }

    #[test]
    fn shared_edge_belongs_to_lower_band() {
        let s = BandScheme::selection();
        assert_eq!(s.band_of(1.0), Some(0));
        assert_eq!(s.band_of(4.0), Some(0));
        assert_eq!(s.band_of(4.01), Some(1));
        assert_eq!(s.band_of(49.0), Some(4));
        assert_eq!(s.band_of(49.5), None);
        assert_eq!(s.band_of(0.5), None);
    }
}
