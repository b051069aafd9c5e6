use serde::{Deserialize, Serialize};

use super::filter::{design_butter_bandpass, design_notch, filtfilt, IirFilter};
use crate::error::Result;

/// Notch followed by a zero-phase Butterworth band-pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocess {
    /// Notch centre in Hz; `None` skips the notch.
    pub notch_hz: Option<f64>,
    pub notch_bandwidth: f64,
    pub order: usize,
    pub lo: f64,
    pub hi: f64,
}

impl Preprocess {
    /// Band-selection chain: 50 Hz notch, 1–55 Hz band-pass.
    pub fn selection() -> Self {
        Self {
            notch_hz: Some(50.0),
            notch_bandwidth: 2.0,
            order: 3,
            lo: 1.0,
            hi: 55.0,
        }
    }

    /// Epoch-phase chain: 50 Hz notch, 1–35 Hz band-pass.
    pub fn epoch() -> Self {
        Self {
            hi: 35.0,
            ..Self::selection()
        }
    }

    pub fn design(&self, fs: f64) -> Result<FilterChain> {
        let notch = self
            .notch_hz
            .map(|f0| design_notch(f0, fs, self.notch_bandwidth))
            .transpose()?;
        let bandpass = design_butter_bandpass(self.order, self.lo, self.hi, fs)?;
        Ok(FilterChain { notch, bandpass })
    }
}

/// Designed filters of a [`Preprocess`] chain, ready to apply.
#[derive(Debug, Clone)]
pub struct FilterChain {
    pub notch: Option<IirFilter>,
    pub bandpass: IirFilter,
}

impl FilterChain {
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let notched = match &self.notch {
            Some(n) => filtfilt(n, x)?,
            None => x.to_vec(),
        };
        filtfilt(&self.bandpass, &notched)
    }
}
