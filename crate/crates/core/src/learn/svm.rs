use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::{rbf_kernel, squared_distances};
use crate::error::{Error, Result};

pub const SMO_TOLERANCE: f64 = 1e-3;
pub const SMO_MAX_ITER: usize = 100_000;

/// Soft-margin RBF support vector machine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub support_vectors: Vec<Vec<f64>>,
    /// Training-set row of each support vector.
    pub support_indices: Vec<usize>,
    /// `α_i · y_i` per support vector.
    pub dual_coefficients: Vec<f64>,
    pub bias: f64,
    pub sigma: f64,
    pub c: f64,
    pub iterations: usize,
}

impl SvmModel {
    pub fn decision(&self, x: ArrayView1<f64>) -> Result<f64> {
        let x = x.as_slice().map(|s| s.to_vec()).unwrap_or_else(|| x.to_vec());
        let mut f = self.bias;
        for (sv, a) in self.support_vectors.iter().zip(&self.dual_coefficients) {
            f += a * rbf_kernel(sv, &x, self.sigma)?;
        }
        Ok(f)
    }

    pub fn scores(&self, x: ArrayView2<f64>) -> Result<Vec<f64>> {
        let p = self.support_vectors.first().map_or(0, Vec::len);
        if x.ncols() != p {
            return Err(Error::invalid(format!("expected {p} features, got {}", x.ncols())));
        }
        x.rows().into_iter().map(|r| self.decision(r)).collect()
    }
}

/// Trains on rows of `x` with labels ±1.
pub fn svm_fit(x: ArrayView2<f64>, y: &[f64], sigma: f64, c: f64) -> Result<SvmModel> {
    let d2 = squared_distances(x, x);
    svm_fit_precomputed(x, y, &d2, sigma, c)
}

/// As [`svm_fit`] with the pairwise squared distances of `x` supplied.
pub(crate) fn svm_fit_precomputed(
    x: ArrayView2<f64>,
    y: &[f64],
    d2: &Array2<f64>,
    sigma: f64,
    c: f64,
) -> Result<SvmModel> {
    let n = x.nrows();
    if n != y.len() {
        return Err(Error::invalid(format!("{n} rows but {} labels", y.len())));
    }
    if !(sigma > 0.0 && sigma.is_finite()) || !(c > 0.0 && c.is_finite()) {
        return Err(Error::invalid("sigma and C must be finite and > 0"));
    }
    if y.iter().any(|&v| v != 1.0 && v != -1.0) {
        return Err(Error::data("SVM labels must be ±1"));
    }
    if !(y.contains(&1.0) && y.contains(&-1.0)) {
        return Err(Error::data("SVM training set must contain both classes"));
    }

    let gamma = 0.5 / (sigma * sigma);
    let k = d2.mapv(|d| (-gamma * d).exp());
    let q = |i: usize, j: usize| y[i] * y[j] * k[[i, j]];

    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let up = |a: f64, y: f64| (y > 0.0 && a < c) || (y < 0.0 && a > 0.0);
    let low = |a: f64, y: f64| (y > 0.0 && a > 0.0) || (y < 0.0 && a < c);

    let mut iterations = 0;
    let (m, big_m) = loop {
        // i: maximal violating index in I_up.
        let mut m = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..n {
            if up(alpha[t], y[t]) {
                let v = -y[t] * grad[t];
                if v > m {
                    m = v;
                    i = t;
                }
            }
        }
        // j: second-order choice within I_low; M tracks the stopping bound.
        let mut big_m = f64::INFINITY;
        let mut j = usize::MAX;
        let mut best = f64::INFINITY;
        for t in 0..n {
            if !low(alpha[t], y[t]) {
                continue;
            }
            let v = -y[t] * grad[t];
            big_m = big_m.min(v);
            if i != usize::MAX && v < m {
                let b = m - v;
                let mut a = k[[i, i]] + k[[t, t]] - 2.0 * k[[i, t]];
                if a <= 0.0 {
                    a = 1e-12;
                }
                let gain = -b * b / a;
                if gain < best {
                    best = gain;
                    j = t;
                }
            }
        }
        if m - big_m < SMO_TOLERANCE || j == usize::MAX {
            break (m, big_m);
        }
        if iterations == SMO_MAX_ITER {
            return Err(Error::numerical(format!(
                "SMO did not converge in {SMO_MAX_ITER} iterations \
                 (n = {n}, σ = {sigma}, C = {c}, violation {:.3e})",
                m - big_m
            )));
        }
        iterations += 1;

        let (ai_old, aj_old) = (alpha[i], alpha[j]);
        let mut quad = k[[i, i]] + k[[j, j]] - 2.0 * k[[i, j]];
        if quad <= 0.0 {
            quad = 1e-12;
        }
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - ai_old, alpha[j] - aj_old);
        for t in 0..n {
            grad[t] += q(t, i) * di + q(t, j) * dj;
        }
    };

    // f(x) = Σ α_i y_i K(x_i, x) + b; the midpoint of the final violation
    // interval keeps every training point within tolerance/2 of its KKT bound.
    let bias = if m.is_finite() && big_m.is_finite() {
        (m + big_m) / 2.0
    } else if m.is_finite() {
        m
    } else {
        big_m
    };
    let mut model = SvmModel {
        support_vectors: Vec::new(),
        support_indices: Vec::new(),
        dual_coefficients: Vec::new(),
        bias,
        sigma,
        c,
        iterations,
    };
    for t in 0..n {
        if alpha[t] > 0.0 {
            model.support_vectors.push(x.row(t).to_vec());
            model.support_indices.push(t);
            model.dual_coefficients.push(alpha[t] * y[t]);
        }
    }
    Ok(model)
}
