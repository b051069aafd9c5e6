use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::BandScheme;

/// Symmetric Hann window, `w[k] = 0.5·(1 − cos(2πk/(n−1)))`.
pub fn hanning(n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::invalid(format!("Hann window needs n ≥ 2, got {n}")));
    }
    let d = (n - 1) as f64;
    Ok((0..n)
        .map(|k| 0.5 * (1.0 - (2.0 * PI * k as f64 / d).cos()))
        .collect())
}

/// One-sided power spectral density frames.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    /// `[frame × bin]`, µV²/Hz.
    pub frames: Array2<f64>,
    pub freq_axis: Vec<f64>,
    /// Centre time of each frame, seconds.
    pub time_axis: Vec<f64>,
    pub window_len: usize,
    pub hop: usize,
}

impl Spectrogram {
    pub fn n_frames(&self) -> usize {
        self.frames.nrows()
    }

    /// Debug dump: one row per frame, one column per bin.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        let io = |e| Error::io(path, e);
        for row in self.frames.outer_iter() {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(out, "{}", line.join(",")).map_err(io)?;
        }
        out.flush().map_err(io)
    }
}

/// Power spectral density on a uniform frequency grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Psd {
    pub power: Vec<f64>,
    pub freq_axis: Vec<f64>,
}

impl Psd {
    pub fn new(power: Vec<f64>, freq_axis: Vec<f64>) -> Result<Self> {
        if power.len() != freq_axis.len() || power.len() < 2 {
            return Err(Error::invalid("PSD needs ≥ 2 bins matching its frequency axis"));
        }
        if power.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::invalid("PSD values must be finite and non-negative"));
        }
        Ok(Self { power, freq_axis })
    }
}

/// Density scale and one-sided doubling applied to a squared DFT magnitude.
fn one_sided_scale(window: &[f64], fs: f64) -> impl Fn(usize) -> f64 {
    let n = window.len();
    let s2: f64 = window.iter().map(|w| w * w).sum();
    let base = 1.0 / (fs * s2);
    move |k: usize| {
        let nyquist = n.is_multiple_of(2) && k == n / 2;
        if k == 0 || nyquist {
            base
        } else {
            2.0 * base
        }
    }
}

fn freq_axis(window_len: usize, fs: f64) -> Vec<f64> {
    (0..=window_len / 2)
        .map(|k| k as f64 * fs / window_len as f64)
        .collect()
}

/// Hann-windowed short-time Fourier transform, returned as one-sided PSD
/// frames scaled by `1/(fs·Σw²)`.
pub fn stft(x: &[f64], fs: f64, window_len: usize, hop: usize) -> Result<Spectrogram> {
    if hop == 0 {
        return Err(Error::invalid("hop must be ≥ 1"));
    }
    if x.len() < window_len {
        return Err(Error::invalid(format!(
            "signal of {} samples is shorter than the {window_len}-sample window",
            x.len()
        )));
    }
    let window = hanning(window_len)?;
    let scale = one_sided_scale(&window, fs);
    let n_bins = window_len / 2 + 1;
    let n_frames = (x.len() - window_len) / hop + 1;

    let fft = FftPlanner::new().plan_fft_forward(window_len);
    let mut buf = vec![Complex64::new(0.0, 0.0); window_len];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut frames = Array2::<f64>::zeros((n_frames, n_bins));

    for (m, mut row) in frames.outer_iter_mut().enumerate() {
        let seg = &x[m * hop..m * hop + window_len];
        for ((b, &s), &w) in buf.iter_mut().zip(seg).zip(&window) {
            *b = Complex64::new(s * w, 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for (k, p) in row.iter_mut().enumerate() {
            *p = buf[k].norm_sqr() * scale(k);
        }
    }

    let time_axis = (0..n_frames)
        .map(|m| (m * hop) as f64 / fs + window_len as f64 / (2.0 * fs))
        .collect();
    Ok(Spectrogram {
        frames,
        freq_axis: freq_axis(window_len, fs),
        time_axis,
        window_len,
        hop,
    })
}

/// Mean of the frame powers in each bin.
pub fn psd_from_stft(s: &Spectrogram) -> Result<Psd> {
    let n = s.n_frames();
    if n == 0 {
        return Err(Error::invalid("spectrogram has no frames"));
    }
    let power = s
        .frames
        .columns()
        .into_iter()
        .map(|col| col.sum() / n as f64)
        .collect();
    Psd::new(power, s.freq_axis.clone())
}

/// The hop-1 frame-averaged PSD, `psd_from_stft(stft(x, fs, window_len, 1))`,
/// computed through lagged products instead of one FFT per frame.
///
/// With `M` frames the mean frame periodogram at bin `k` is
/// `(1/M)·[T₀ + 2·Σ_l T_l·cos(2πkl/N)]`, where
/// `T_l = Σ_n w[n]·w[n+l]·S_l(n)` and `S_l(n) = Σ_m x[m+n]·x[m+n+l]`.
/// `S_l(0)` comes from one FFT cross-correlation; `S_l(n+1)` follows from
/// `S_l(n)` by dropping one product and adding one.
pub fn dense_psd(x: &[f64], fs: f64, window_len: usize) -> Result<Psd> {
    let window = hanning(window_len)?;
    let len = x.len();
    if len < window_len {
        return Err(Error::invalid(format!(
            "signal of {len} samples is shorter than the {window_len}-sample window"
        )));
    }
    let n = window_len;
    let m = len - n + 1;

    // S_l(0) for l in 0..n, as a circular correlation of size `len`
    // (m - 1 + l ≤ len - 1, so nothing wraps).
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(len);
    let inv = planner.plan_fft_inverse(len);
    let mut head: Vec<Complex64> = (0..len)
        .map(|i| Complex64::new(if i < m { x[i] } else { 0.0 }, 0.0))
        .collect();
    let mut full: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fwd.process(&mut head);
    fwd.process(&mut full);
    let mut corr: Vec<Complex64> = head
        .iter()
        .zip(&full)
        .map(|(h, f)| h.conj() * f)
        .collect();
    inv.process(&mut corr);

    let mut lag_sums = vec![Complex64::new(0.0, 0.0); n];
    for (l, t) in lag_sums.iter_mut().enumerate() {
        let mut s = corr[l].re / len as f64;
        let mut acc = window[0] * window[l] * s;
        for i in 0..n - 1 - l {
            s += x[i + m] * x[i + m + l] - x[i] * x[i + l];
            acc += window[i + 1] * window[i + 1 + l] * s;
        }
        *t = Complex64::new(acc, 0.0);
    }
    let t0 = lag_sums[0].re;
    planner.plan_fft_forward(n).process(&mut lag_sums);

    let scale = one_sided_scale(&window, fs);
    let power = (0..=n / 2)
        .map(|k| ((2.0 * lag_sums[k].re - t0) / m as f64 * scale(k)).max(0.0))
        .collect();
    Psd::new(power, freq_axis(n, fs))
}

/// Frame-averaged PSD, using [`dense_psd`] for a hop of one sample.
pub fn psd(x: &[f64], fs: f64, window_len: usize, hop: usize) -> Result<Psd> {
    if hop == 1 {
        dense_psd(x, fs, window_len)
    } else {
        psd_from_stft(&stft(x, fs, window_len, hop)?)
    }
}

/// Trapezoidal area under the PSD between `lo` and `hi` Hz.
///
/// The PSD is treated as piecewise linear between bins, so for edges on the
/// bin grid this is exactly the trapezoid rule, and adjacent bands sum to the
/// band spanning both.
pub fn band_power(p: &Psd, lo: f64, hi: f64) -> Result<f64> {
    let f = &p.freq_axis;
    let (f_min, f_max) = (f[0], f[f.len() - 1]);
    if !(lo < hi) {
        return Err(Error::invalid(format!("band [{lo}, {hi}] has lo ≥ hi")));
    }
    if lo < f_min || hi > f_max {
        return Err(Error::invalid(format!(
            "band [{lo}, {hi}] Hz outside PSD range [{f_min}, {f_max}]"
        )));
    }
    let mut area = 0.0;
    for i in 0..f.len() - 1 {
        let (f0, f1) = (f[i], f[i + 1]);
        let a = lo.max(f0);
        let b = hi.min(f1);
        if b <= a {
            continue;
        }
        let (p0, p1) = (p.power[i], p.power[i + 1]);
        let at = |v: f64| p0 + (p1 - p0) * (v - f0) / (f1 - f0);
        area += (b - a) * (at(a) + at(b)) / 2.0;
    }
    Ok(area)
}

/// Band powers as percentages of the power over the scheme's total range.
pub fn normalized_band_powers(p: &Psd, scheme: &BandScheme) -> Result<Vec<f64>> {
    let (lo, hi) = scheme.total_range;
    let total = band_power(p, lo, hi)?;
    if !(total > 0.0) {
        return Err(Error::numerical("degenerate zero-power PSD"));
    }
    scheme
        .bands
        .iter()
        .map(|b| Ok(100.0 * band_power(p, b.lo, b.hi)? / total))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::BandLabel;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const FS: f64 = 512.0;

    fn noise(seed: u64, n: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn sine(freq: f64, amp: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| amp * (2.0 * PI * freq * i as f64 / FS).sin())
            .collect()
    }

    /// O(N²) DFT power of the windowed segment, one-sided density scaling.
    fn brute_frame(seg: &[f64]) -> Vec<f64> {
        let n = seg.len();
        let d = (n - 1) as f64;
        let w: Vec<f64> = (0..n)
            .map(|k| 0.5 - 0.5 * (2.0 * PI * k as f64 / d).cos())
            .collect();
        let s2: f64 = w.iter().map(|v| v * v).sum();
        (0..=n / 2)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for j in 0..n {
                    let ang = -2.0 * PI * (k * j % n) as f64 / n as f64;
                    re += w[j] * seg[j] * ang.cos();
                    im += w[j] * seg[j] * ang.sin();
                }
                let one_sided = if k == 0 || k == n / 2 { 1.0 } else { 2.0 };
                one_sided * (re * re + im * im) / (FS * s2)
            })
            .collect()
    }

    fn max_rel_err(a: &[f64], b: &[f64]) -> f64 {
        let peak = b.iter().cloned().fold(0.0, f64::max);
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
            / peak
    }

    #[test]
    fn hann_closed_form() {
        let w = hanning(4).unwrap();
        let want = [0.0, 0.75, 0.75, 0.0];
        for (a, b) in w.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(hanning(1).is_err());
        for n in [2, 3, 7, 512] {
            let w = hanning(n).unwrap();
            assert_eq!(w[0], 0.0);
            assert!(w[n - 1].abs() < 1e-15);
            for k in 0..n {
                assert!((w[k] - w[n - 1 - k]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn frame_count_follows_hop() {
        let x = vec![0.0; 7168];
        assert_eq!(stft(&x, FS, 512, 64).unwrap().n_frames(), 105);
        let s = stft(&x[..1024], FS, 512, 1).unwrap();
        assert_eq!(s.n_frames(), 513);
        assert_eq!(s.freq_axis.len(), 257);
        assert_eq!(s.freq_axis[256], 256.0);
        assert!(stft(&x[..100], FS, 512, 1).is_err());
        assert!(stft(&x, FS, 512, 0).is_err());
    }

    #[test]
    fn sine_peak_lands_on_its_bin() {
        let s = stft(&sine(8.0, 1.0, 512), FS, 512, 512).unwrap();
        let row = s.frames.row(0);
        let peak = (0..row.len()).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
        assert_eq!(s.freq_axis[peak], 8.0);
    }

    #[test]
    fn frames_match_brute_force_dft() {
        let x = noise(5, 1500);
        let s = stft(&x, FS, 512, 97).unwrap();
        for m in 0..s.n_frames() {
            let want = brute_frame(&x[m * 97..m * 97 + 512]);
            let got: Vec<f64> = s.frames.row(m).to_vec();
            assert!(max_rel_err(&got, &want) < 1e-9);
        }
    }

    #[test]
    fn frame_power_obeys_parseval() {
        let x = noise(8, 2048);
        let s = stft(&x, FS, 512, 256).unwrap();
        let w = hanning(512).unwrap();
        let s2: f64 = w.iter().map(|v| v * v).sum();
        for m in 0..s.n_frames() {
            let seg = &x[m * 256..m * 256 + 512];
            let time: f64 = seg.iter().zip(&w).map(|(a, b)| (a * b).powi(2)).sum::<f64>() / s2;
            let freq: f64 = s.frames.row(m).sum() * FS / 512.0;
            assert!((time - freq).abs() / time < 1e-9);
        }
    }

    #[test]
    fn dense_psd_equals_frame_average() {
        for (seed, len) in [(1, 512), (2, 700), (3, 2048)] {
            let x = noise(seed, len);
            let slow = psd_from_stft(&stft(&x, FS, 512, 1).unwrap()).unwrap();
            let fast = dense_psd(&x, FS, 512).unwrap();
            assert_eq!(fast.freq_axis, slow.freq_axis);
            assert!(max_rel_err(&fast.power, &slow.power) < 1e-9, "len {len}");
        }
        let x = sine(6.0, 3.0, 1000);
        let slow = psd_from_stft(&stft(&x, FS, 256, 1).unwrap()).unwrap();
        let fast = dense_psd(&x, FS, 256).unwrap();
        assert!(max_rel_err(&fast.power, &slow.power) < 1e-9);
    }

    #[test]
    fn single_frame_psd_is_the_frame() {
        let x = noise(4, 512);
        let s = stft(&x, FS, 512, 1).unwrap();
        let p = psd_from_stft(&s).unwrap();
        assert_eq!(p.power, s.frames.row(0).to_vec());
    }

    #[test]
    fn zero_signal_zero_psd() {
        let p = dense_psd(&vec![0.0; 2048], FS, 512).unwrap();
        assert!(p.power.iter().all(|&v| v == 0.0));
        let p = psd(&vec![0.0; 2048], FS, 512, 64).unwrap();
        assert!(p.power.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sine_power_recovered_over_main_lobe() {
        let amp = 2.0;
        let p = dense_psd(&sine(8.0, amp, 7168), FS, 512).unwrap();
        let variance = amp * amp / 2.0;
        // The Hann main lobe spans ±2 bins, so [6, 10] holds the tone.
        let lobe = band_power(&p, 6.0, 10.0).unwrap();
        assert!((lobe / variance - 1.0).abs() < 0.05, "{lobe}");
        // Trapezoid weights on [7, 9] keep only half of the ±1 Hz shoulder
        // bins: 1/12 + 2/3 + 1/12 of the tone power.
        let narrow = band_power(&p, 7.0, 9.0).unwrap();
        assert!((narrow / variance - 5.0 / 6.0).abs() < 0.01, "{narrow}");
    }

    #[test]
    fn trapezoid_of_constant() {
        let p = Psd::new(vec![1.0; 5], vec![0.0, 0.5, 1.0, 1.5, 2.0]).unwrap();
        assert!((band_power(&p, 0.0, 2.0).unwrap() - 2.0).abs() < 1e-15);
        assert!(band_power(&p, 0.0, 2.5).is_err());
        assert!(band_power(&p, 1.0, 1.0).is_err());
    }

    #[test]
    fn trapezoid_of_triangle() {
        let f: Vec<f64> = (0..=20).map(|k| k as f64 * 0.5).collect();
        let power: Vec<f64> = f.iter().map(|&v| 5.0 - (v - 5.0).abs()).collect();
        let p = Psd::new(power.clone(), f.clone()).unwrap();
        // Hand-rolled trapezoid over bins 2..=14 (1 Hz .. 7 Hz).
        let mut want = 0.0;
        for i in 2..14 {
            want += 0.5 * (power[i] + power[i + 1]) * 0.5;
        }
        assert!((band_power(&p, 1.0, 7.0).unwrap() - want).abs() < 1e-12);
        // Off-grid edges integrate the interpolant: ∫_{0.25}^{0.75} v dv.
        assert!((band_power(&p, 0.25, 0.75).unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn selection_bands_add_up_to_total() {
        let p = dense_psd(&noise(9, 4096), FS, 512).unwrap();
        let scheme = BandScheme::selection();
        let sum: f64 = scheme
            .bands
            .iter()
            .map(|b| band_power(&p, b.lo, b.hi).unwrap())
            .sum();
        let total = band_power(&p, 1.0, 49.0).unwrap();
        assert!((sum - total).abs() < 1e-9 * total.max(1.0));
    }

    #[test]
    fn flat_psd_percentages() {
        let f: Vec<f64> = (0..=256).map(|k| k as f64).collect();
        let p = Psd::new(vec![2.0; 257], f).unwrap();
        let pct = normalized_band_powers(&p, &BandScheme::selection()).unwrap();
        // On the 1 Hz grid a flat PSD gives exact width ratios.
        let want = [3.0, 4.0, 5.0, 12.0, 24.0].map(|w| 100.0 * w / 48.0);
        for (a, b) in pct.iter().zip(want) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!((pct[0] - 6.25).abs() < 1e-9);
    }

    #[test]
    fn concentrated_delta() {
        let f: Vec<f64> = (0..=256).map(|k| k as f64).collect();
        let power: Vec<f64> = f.iter().map(|&v| if (2.0..=3.0).contains(&v) { 1.0 } else { 0.0 }).collect();
        let pct = normalized_band_powers(&Psd::new(power, f).unwrap(), &BandScheme::selection()).unwrap();
        assert!((pct[0] - 100.0).abs() < 1e-9);
        assert!(pct[1..].iter().all(|&v| v.abs() < 1e-9));
    }

    #[test]
    fn zero_power_is_degenerate() {
        let f: Vec<f64> = (0..=256).map(|k| k as f64).collect();
        let err = normalized_band_powers(&Psd::new(vec![0.0; 257], f).unwrap(), &BandScheme::epoch())
            .unwrap_err();
        assert!(err.to_string().contains("degenerate zero-power PSD"));
        assert_eq!(BandScheme::epoch().position(BandLabel::Theta), Some(1));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn percentages_sum_to_100(seed in 0u64..1000) {
            let p = dense_psd(&noise(seed, 1024), FS, 512).unwrap();
            for scheme in [BandScheme::selection(), BandScheme::epoch()] {
                let s: f64 = normalized_band_powers(&p, &scheme).unwrap().iter().sum();
                prop_assert!((s - 100.0).abs() < 1e-6);
            }
        }

        #[test]
        fn band_power_is_monotone(seed in 0u64..1000, lo in 1.0f64..20.0, w in 0.5f64..10.0, grow in 0.0f64..5.0) {
            let p = dense_psd(&noise(seed, 1024), FS, 512).unwrap();
            let inner = band_power(&p, lo, lo + w).unwrap();
            let outer = band_power(&p, lo - grow.min(lo - 0.5), lo + w + grow).unwrap();
            prop_assert!(outer >= inner - 1e-12);
        }

        #[test]
        fn psd_is_non_negative(seed in 0u64..1000, hop in 1usize..64) {
            let x = noise(seed, 800);
            let p = psd(&x, FS, 256, hop).unwrap();
            prop_assert!(p.power.iter().all(|&v| v >= 0.0));
        }
    }
}
