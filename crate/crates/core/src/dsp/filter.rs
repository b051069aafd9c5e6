use std::f64::consts::PI;

use ndarray::{Array2, Zip};
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::Trial;

/// How a filter was designed, kept alongside its coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FilterDesign {
    ButterBandpass { order: usize, lo: f64, hi: f64, fs: f64 },
    Notch { f0: f64, bandwidth: f64, fs: f64 },
}

/// Transfer-function IIR filter with `a[0] == 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IirFilter {
    pub b: Vec<f64>,
    pub a: Vec<f64>,
    pub design: FilterDesign,
}

impl IirFilter {
    fn fs(&self) -> f64 {
        match self.design {
            FilterDesign::ButterBandpass { fs, .. } | FilterDesign::Notch { fs, .. } => fs,
        }
    }

    /// Complex frequency response at `f` Hz (single pass).
    pub fn response(&self, f: f64) -> Complex64 {
        let w = 2.0 * PI * f / self.fs();
        let eval = |c: &[f64]| {
            c.iter()
                .enumerate()
                .map(|(k, &v)| Complex64::from_polar(v, -w * k as f64))
                .sum::<Complex64>()
        };
        eval(&self.b) / eval(&self.a)
    }

    /// Single-pass magnitude response at `f` Hz, in dB.
    pub fn gain_db(&self, f: f64) -> f64 {
        20.0 * self.response(f).norm().log10()
    }

    /// Schur–Cohn step-down test: true iff every pole lies strictly inside
    /// the unit circle.
    pub fn is_stable(&self) -> bool {
        let mut poly: Vec<f64> = self.a.iter().map(|v| v / self.a[0]).collect();
        while poly.len() > 1 {
            let m = poly.len() - 1;
            let k = poly[m];
            if !(k.abs() < 1.0) {
                return false;
            }
            let denom = 1.0 - k * k;
            poly = (0..m).map(|i| (poly[i] - k * poly[m - i]) / denom).collect();
        }
        true
    }

    fn len(&self) -> usize {
        self.a.len().max(self.b.len())
    }
}

/// Butterworth band-pass via the analog low-pass prototype, a low-pass to
/// band-pass transform and the bilinear transform with both edges prewarped,
/// so the single-pass response is exactly -3 dB at `lo` and `hi`.
pub fn design_butter_bandpass(order: usize, lo: f64, hi: f64, fs: f64) -> Result<IirFilter> {
    if order == 0 {
        return Err(Error::invalid("order ≥ 1 violated"));
    }
    if !(fs > 0.0) {
        return Err(Error::invalid("fs > 0 violated"));
    }
    if !(lo > 0.0) {
        return Err(Error::invalid("0 < lo violated"));
    }
    if !(lo < hi) {
        return Err(Error::invalid("lo < hi violated"));
    }
    if !(hi < fs / 2.0) {
        return Err(Error::invalid("hi < fs/2 violated"));
    }

    let fs2 = 2.0 * fs;
    let w_lo = fs2 * (PI * lo / fs).tan();
    let w_hi = fs2 * (PI * hi / fs).tan();
    let bw = w_hi - w_lo;
    let w0_sq = w_lo * w_hi;

    let mut poles = Vec::with_capacity(2 * order);
    for k in 0..order {
        let theta = PI * (2 * k + order + 1) as f64 / (2 * order) as f64;
        let p = Complex64::from_polar(1.0, theta);
        // s² - p·bw·s + w0² = 0
        let pb = p * bw;
        let disc = (pb * pb - 4.0 * w0_sq).sqrt();
        poles.push((pb + disc) / 2.0);
        poles.push((pb - disc) / 2.0);
    }

    let z_poles: Vec<Complex64> = poles.iter().map(|&s| (fs2 + s) / (fs2 - s)).collect();
    let denom: Complex64 = poles.iter().map(|&s| fs2 - s).product();
    let gain = (Complex64::new((bw * fs2).powi(order as i32), 0.0) / denom).re;

    let mut zeros = vec![Complex64::new(1.0, 0.0); order];
    zeros.extend(std::iter::repeat_n(Complex64::new(-1.0, 0.0), order));

    let b: Vec<f64> = poly_from_roots(&zeros).into_iter().map(|c| c * gain).collect();
    let a = poly_from_roots(&z_poles);

    Ok(IirFilter {
        b,
        a,
        design: FilterDesign::ButterBandpass { order, lo, hi, fs },
    })
}

/// Second-order notch with unit DC gain, a null at `f0` and the given -3 dB
/// bandwidth.
pub fn design_notch(f0: f64, fs: f64, bandwidth: f64) -> Result<IirFilter> {
    if !(fs > 0.0) {
        return Err(Error::invalid("fs > 0 violated"));
    }
    if !(f0 > 0.0) {
        return Err(Error::invalid("f0 must be positive"));
    }
    if !(f0 < fs / 2.0) {
        return Err(Error::invalid("f0 above Nyquist"));
    }
    if !(bandwidth > 0.0 && bandwidth < fs / 2.0) {
        return Err(Error::invalid("bandwidth must lie in (0, fs/2)"));
    }
    let w0 = 2.0 * PI * f0 / fs;
    let beta = (PI * bandwidth / fs).tan();
    let g = 1.0 / (1.0 + beta);
    let c = w0.cos();
    Ok(IirFilter {
        b: vec![g, -2.0 * g * c, g],
        a: vec![1.0, -2.0 * g * c, 2.0 * g - 1.0],
        design: FilterDesign::Notch { f0, bandwidth, fs },
    })
}

/// Real coefficients of `∏ (z - r)`, highest power first.
fn poly_from_roots(roots: &[Complex64]) -> Vec<f64> {
    let mut c = vec![Complex64::new(1.0, 0.0)];
    for &r in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); c.len() + 1];
        for (i, &v) in c.iter().enumerate() {
            next[i] += v;
            next[i + 1] -= v * r;
        }
        c = next;
    }
    c.into_iter().map(|v| v.re).collect()
}

/// Steady-state initial conditions of the transposed direct form for a unit
/// step input.
fn lfilter_zi(b: &[f64], a: &[f64]) -> Result<Vec<f64>> {
    let n = a.len().max(b.len());
    let pad = |c: &[f64]| {
        let mut v = c.to_vec();
        v.resize(n, 0.0);
        v
    };
    let (b, a) = (pad(b), pad(a));
    let m = n - 1;
    if m == 0 {
        return Ok(Vec::new());
    }
    let mut lhs = vec![vec![0.0; m]; m];
    for (i, row) in lhs.iter_mut().enumerate() {
        row[i] = 1.0;
        row[0] += a[i + 1];
        if i + 1 < m {
            row[i + 1] = -1.0;
        }
    }
    let rhs: Vec<f64> = (0..m).map(|i| b[i + 1] - a[i + 1] * b[0]).collect();
    linalg::solve(lhs, rhs)
}

fn lfilter(b: &[f64], a: &[f64], x: &[f64], mut z: Vec<f64>) -> Vec<f64> {
    let n = z.len();
    let coef = |c: &[f64], i: usize| c.get(i).copied().unwrap_or(0.0);
    x.iter()
        .map(|&xi| {
            let y = coef(b, 0) * xi + z.first().copied().unwrap_or(0.0);
            for i in 0..n {
                let next = if i + 1 < n { z[i + 1] } else { 0.0 };
                z[i] = coef(b, i + 1) * xi - coef(a, i + 1) * y + next;
            }
            y
        })
        .collect()
}

/// Zero-phase forward-backward filtering with odd-reflection padding of
/// `3 · max(len(a), len(b))` samples at each end and steady-state initial
/// conditions on both passes.
pub fn filtfilt(f: &IirFilter, x: &[f64]) -> Result<Vec<f64>> {
    let pad = 3 * f.len();
    if x.len() <= pad {
        return Err(Error::invalid(format!(
            "filtfilt needs more than {pad} samples, got {}",
            x.len()
        )));
    }
    let n = x.len();
    let (first, last) = (x[0], x[n - 1]);
    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend((1..=pad).rev().map(|i| 2.0 * first - x[i]));
    ext.extend_from_slice(x);
    ext.extend((1..=pad).map(|i| 2.0 * last - x[n - 1 - i]));

    let zi = lfilter_zi(&f.b, &f.a)?;
    let scaled = |v: f64| zi.iter().map(|z| z * v).collect::<Vec<_>>();

    let mut y = lfilter(&f.b, &f.a, &ext, scaled(ext[0]));
    y.reverse();
    let mut y = lfilter(&f.b, &f.a, &y, scaled(y[0]));
    y.reverse();
    Ok(y[pad..pad + n].to_vec())
}

/// Element-wise mean of equally shaped trials.
pub fn average_trials(trials: &[Trial]) -> Result<Trial> {
    let first = trials
        .first()
        .ok_or_else(|| Error::invalid("cannot average zero trials"))?;
    let shape = first.samples.dim();
    let mut sum = Array2::<f64>::zeros(shape);
    for (i, t) in trials.iter().enumerate() {
        if t.samples.dim() != shape {
            return Err(Error::data(format!(
                "trial {i} has shape {:?}, expected {shape:?}",
                t.samples.dim()
            )));
        }
        sum += &t.samples;
    }
    let k = trials.len() as f64;
    Zip::from(&mut sum).for_each(|v| *v /= k);
    Ok(Trial::new(sum))
}
