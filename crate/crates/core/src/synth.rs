//! Seeded synthetic recordings with planted, condition-dependent band-power
//! effects.
//!
//! Every channel is a sum of sinusoids on the trial's DFT grid (1/14 Hz
//! spacing) with a 1/f^γ power spectrum between `content_range` edges. The
//! amplitude of each bin is multiplied by the planted gain of the selection
//! band that owns it, so band power scales with gain². Phases have a
//! stimulus-locked part shared by both conditions and all trials (both
//! conditions show the same video) plus an independent per-trial jitter.
//!
//! All randomness comes from ChaCha streams keyed by a SHA-256 digest of
//! `(seed, subject, condition, trial, channel)`, so output does not depend on
//! generation order or thread count.

use std::f64::consts::PI;

use ndarray::Array2;
use rand::Rng;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::StreamKey;
use crate::model::{
    BandLabel, BandScheme, ChannelId, Condition, Recording, Trial, SAMPLING_RATE,
    TRIALS_PER_RECORDING, TRIAL_SAMPLES,
};

/// Gain multipliers for one (channel, band) cell. Cells not listed in an
/// [`EffectSpec`] have unit gain in both conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantedEffect {
    pub channel: ChannelId,
    pub band: BandLabel,
    pub gain_2d: f64,
    pub gain_3d: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectSpec {
    pub subject_id: String,
    pub seed: u64,
    /// Amplitude density of the background at 1 Hz, µV/√Hz.
    pub base_noise: f64,
    /// Exponent γ of the 1/f^γ power spectrum (1 = pink, 0 = white).
    pub spectral_exponent: f64,
    /// Frequencies (Hz) between which the signal has content.
    pub content_range: (f64, f64),
    /// Half-width (radians) of the uniform per-trial phase jitter.
    pub phase_jitter: f64,
    /// Amplitude of a 50 Hz mains component, µV.
    pub line_noise: f64,
    pub effects: Vec<PlantedEffect>,
}

impl Default for EffectSpec {
    fn default() -> Self {
        Self::uniform(0)
    }
}

impl EffectSpec {
    /// No planted effects: both conditions share one spectrum.
    pub fn uniform(seed: u64) -> Self {
        Self {
            subject_id: "S01".into(),
            seed,
            base_noise: 10.0,
            spectral_exponent: 1.0,
            content_range: (0.5, 60.0),
            phase_jitter: PI / 4.0,
            line_noise: 0.0,
            effects: Vec::new(),
        }
    }

    pub fn with_effect(mut self, channel: ChannelId, band: BandLabel, gain_2d: f64, gain_3d: f64) -> Self {
        self.effects.push(PlantedEffect {
            channel,
            band,
            gain_2d,
            gain_3d,
        });
        self
    }

    pub fn validate(&self) -> Result<()> {
        for e in &self.effects {
            if !(e.gain_2d > 0.0 && e.gain_3d > 0.0) || !e.gain_2d.is_finite() || !e.gain_3d.is_finite() {
                return Err(Error::invalid(format!(
                    "gain for ({}, {}) must be finite and > 0",
                    e.channel, e.band
                )));
            }
        }
        if !(self.base_noise > 0.0 && self.base_noise.is_finite()) {
            return Err(Error::invalid("base_noise must be finite and > 0"));
        }
        let (lo, hi) = self.content_range;
        if !(lo > 0.0 && lo < hi && hi < SAMPLING_RATE / 2.0) {
            return Err(Error::invalid("content_range must satisfy 0 < lo < hi < fs/2"));
        }
        if !(0.0..=PI).contains(&self.phase_jitter) {
            return Err(Error::invalid("phase_jitter must lie in [0, π]"));
        }
        if !(self.line_noise >= 0.0 && self.line_noise.is_finite()) {
            return Err(Error::invalid("line_noise must be finite and ≥ 0"));
        }
        if !self.spectral_exponent.is_finite() {
            return Err(Error::invalid("spectral_exponent must be finite"));
        }
        Ok(())
    }

    /// Product of all gains planted on `(channel, band)` for `condition`.
    pub fn gain(&self, channel: ChannelId, band: BandLabel, condition: Condition) -> f64 {
        self.effects
            .iter()
            .filter(|e| e.channel == channel && e.band == band)
            .map(|e| match condition {
                Condition::TwoD => e.gain_2d,
                Condition::ThreeD => e.gain_3d,
            })
            .product()
    }

    /// Per-bin gain table for one channel: one factor per selection band.
    fn band_gains(&self, channel: ChannelId, condition: Condition) -> Vec<f64> {
        BandScheme::selection()
            .bands
            .iter()
            .map(|b| self.gain(channel, b.label, condition))
            .collect()
    }
}

/// δ gain for the strongest planted channel (T6, 2D-dominant).
const PEAK_DELTA_GAIN: f64 = 1.18;
/// δ gain for other planted channels.
const DELTA_GAIN: f64 = 1.10;
/// θ gain at Oz (3D-dominant).
const OZ_THETA_GAIN: f64 = 1.12;
/// θ gain at the other occipital channels.
const THETA_GAIN: f64 = 1.08;

/// δ/θ profile: 3D raises δ over frontal
/// electrodes, 2D raises δ over central, parietal, temporal and occipital
/// electrodes with the largest difference at T6, and 3D raises θ at Oz.
pub fn default_paper_profile(seed: u64) -> EffectSpec {
    let mut spec = EffectSpec {
        line_noise: 5.0,
        ..EffectSpec::uniform(seed)
    };
    for ch in ChannelId::MONTAGE {
        let (g2, g3) = match ch {
            c if c.is_frontal() => (1.0, DELTA_GAIN),
            ChannelId::T6 => (PEAK_DELTA_GAIN, 1.0),
            _ => (DELTA_GAIN, 1.0),
        };
        spec = spec.with_effect(ch, BandLabel::Delta, g2, g3);
    }
    spec = spec.with_effect(ChannelId::Oz, BandLabel::Theta, 1.0, OZ_THETA_GAIN);
    for ch in [ChannelId::O1, ChannelId::O2] {
        spec = spec.with_effect(ch, BandLabel::Theta, 1.0, THETA_GAIN);
    }
    spec
}

/// Amplitude of every DFT bin (index 0..=L/2) for one channel and condition.
fn bin_amplitudes(spec: &EffectSpec, channel: ChannelId, condition: Condition) -> Vec<f64> {
    let scheme = BandScheme::selection();
    let gains = spec.band_gains(channel, condition);
    let df = SAMPLING_RATE / TRIAL_SAMPLES as f64;
    let (lo, hi) = spec.content_range;
    (0..=TRIAL_SAMPLES / 2)
        .map(|k| {
            let f = k as f64 * df;
            if f < lo || f > hi {
                return 0.0;
            }
            let g = scheme.band_of(f).map_or(1.0, |b| gains[b]);
            // One-sided density base²/f^γ spread over one bin of width df.
            g * spec.base_noise * (2.0 * df).sqrt() * f.powf(-spec.spectral_exponent / 2.0)
        })
        .collect()
}

fn synth_channel(
    spec: &EffectSpec,
    amplitudes: &[f64],
    locked: &[f64],
    condition: Condition,
    trial: usize,
    channel: ChannelId,
) -> Vec<f64> {
    let n = TRIAL_SAMPLES;
    let mut rng = StreamKey::new(spec.seed, "synth/trial")
        .str(&spec.subject_id)
        .num(condition as u64)
        .num(trial as u64)
        .num(channel as u64)
        .rng();
    let mut spectrum = vec![Complex64::new(0.0, 0.0); n];
    for k in 1..n / 2 {
        let jitter = if spec.phase_jitter > 0.0 {
            rng.random_range(-spec.phase_jitter..=spec.phase_jitter)
        } else {
            0.0
        };
        let c = Complex64::from_polar(amplitudes[k] / 2.0, locked[k] + jitter);
        spectrum[k] = c;
        spectrum[n - k] = c.conj();
    }
    FftPlanner::new().plan_fft_inverse(n).process(&mut spectrum);

    let mains_phase = rng.random_range(0.0..2.0 * PI);
    spectrum
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let t = i as f64 / SAMPLING_RATE;
            c.re + spec.line_noise * (2.0 * PI * 50.0 * t + mains_phase).sin()
        })
        .collect()
}

fn locked_phases(spec: &EffectSpec, channel: ChannelId) -> Vec<f64> {
    let mut rng = StreamKey::new(spec.seed, "synth/locked")
        .str(&spec.subject_id)
        .num(channel as u64)
        .rng();
    (0..=TRIAL_SAMPLES / 2)
        .map(|_| rng.random_range(0.0..2.0 * PI))
        .collect()
}

fn generate(spec: &EffectSpec, condition: Condition) -> Recording {
    let locked: Vec<Vec<f64>> = ChannelId::MONTAGE
        .iter()
        .map(|&c| locked_phases(spec, c))
        .collect();
    let amplitudes: Vec<Vec<f64>> = ChannelId::MONTAGE
        .iter()
        .map(|&c| bin_amplitudes(spec, c, condition))
        .collect();

    let trials = (0..TRIALS_PER_RECORDING)
        .into_par_iter()
        .map(|t| {
            let mut samples = Array2::<f64>::zeros((ChannelId::MONTAGE.len(), TRIAL_SAMPLES));
            for (row, &ch) in ChannelId::MONTAGE.iter().enumerate() {
                let x = synth_channel(spec, &amplitudes[row], &locked[row], condition, t, ch);
                samples.row_mut(row).assign(&ndarray::ArrayView1::from(&x));
            }
            Trial::new(samples)
        })
        .collect();

    Recording {
        subject_id: spec.subject_id.clone(),
        condition,
        fs: SAMPLING_RATE,
        channels: ChannelId::MONTAGE.to_vec(),
        trials,
    }
}

/// Generates the (2D, 3D) recordings of one subject.
pub fn generate_pair(spec: &EffectSpec) -> Result<(Recording, Recording)> {
    spec.validate()?;
    Ok((generate(spec, Condition::TwoD), generate(spec, Condition::ThreeD)))
}

/// Subject-specific copies of `spec` named `S01`, `S02`, …
pub fn subjects(spec: &EffectSpec, count: usize) -> Vec<EffectSpec> {
    (1..=count)
        .map(|i| EffectSpec {
            subject_id: format!("S{i:02}"),
            ..spec.clone()
        })
        .collect()
}
