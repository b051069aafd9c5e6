//! Filtering and spectral estimation.

mod chain;
mod filter;
mod spectral;

pub use chain::{FilterChain, Preprocess};
pub use filter::{
    average_trials, design_butter_bandpass, design_notch, filtfilt, FilterDesign, IirFilter,
};
pub use spectral::{
    band_power, dense_psd, hanning, normalized_band_powers, psd, psd_from_stft, stft, Psd,
    Spectrogram,
};
