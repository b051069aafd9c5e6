use ndarray::{Array1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::Standardizer;
use crate::error::{Error, Result};
use crate::linalg::{dot, solve};

/// PLS1 regression of ±1 labels on standardized features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlsrModel {
    pub n_components: usize,
    pub x_mean: Vec<f64>,
    pub x_scale: Vec<f64>,
    pub y_mean: f64,
    /// X weights, one vector per component.
    pub weights: Vec<Vec<f64>>,
    /// X loadings, one vector per component.
    pub loadings: Vec<Vec<f64>>,
    /// Y loading per component.
    pub y_loadings: Vec<f64>,
    /// Coefficients on raw features: `score = intercept + beta · x`.
    pub beta: Vec<f64>,
    pub intercept: f64,
    pub decision_threshold: f64,
    /// Indices of features with zero variance in training (scale forced to 1).
    pub constant_features: Vec<usize>,
}

/// Fits PLS1 by NIPALS. Components beyond `min(p, n − 1)` are clamped, and
/// extraction stops early once the residual covariance with `y` vanishes.
pub fn plsr_fit(x: ArrayView2<f64>, y: &[f64], n_components: usize) -> Result<PlsrModel> {
    let (n, p) = x.dim();
    if n != y.len() {
        return Err(Error::invalid(format!("{n} rows but {} labels", y.len())));
    }
    if n < 2 || p == 0 {
        return Err(Error::invalid("PLSR needs at least 2 rows and 1 feature"));
    }
    if !(y.iter().any(|&v| v > 0.0) && y.iter().any(|&v| v < 0.0)) {
        return Err(Error::data("PLSR training set must contain both classes"));
    }
    if n_components == 0 {
        return Err(Error::invalid("n_components must be ≥ 1"));
    }
    let limit = p.min(n - 1);
    let wanted = if n_components > limit {
        log::warn!("PLSR components clamped from {n_components} to {limit}");
        limit
    } else {
        n_components
    };

    let std = Standardizer::fit(x);
    if !std.constant.is_empty() {
        log::warn!("zero-variance features {:?}; scale set to 1", std.constant);
    }
    let mut xr = std.transform(x)?;
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let mut yr = Array1::from_iter(y.iter().map(|v| v - y_mean));

    let mut weights = Vec::new();
    let mut loadings = Vec::new();
    let mut y_loadings = Vec::new();
    let mut first_norm = None;
    for _ in 0..wanted {
        let w = xr.t().dot(&yr);
        let norm = w.dot(&w).sqrt();
        let first = *first_norm.get_or_insert(norm);
        if !(norm > 1e-12 * first.max(f64::MIN_POSITIVE)) {
            break;
        }
        let w = w / norm;
        let t = xr.dot(&w);
        let tt = t.dot(&t);
        if !(tt > 0.0) {
            break;
        }
        let pl = xr.t().dot(&t) / tt;
        let q = yr.dot(&t) / tt;
        let t_col = t.view().insert_axis(Axis(1));
        let p_row = pl.view().insert_axis(Axis(0));
        xr -= &t_col.dot(&p_row);
        yr.scaled_add(-q, &t);
        weights.push(w.to_vec());
        loadings.push(pl.to_vec());
        y_loadings.push(q);
    }
    let a = weights.len();
    if a == 0 {
        return Err(Error::numerical("features carry no covariance with the labels"));
    }

    // B = W (PᵀW)⁻¹ q in standardized coordinates.
    let ptw: Vec<Vec<f64>> = (0..a)
        .map(|i| (0..a).map(|j| dot(&loadings[i], &weights[j])).collect())
        .collect();
    let c = solve(ptw, y_loadings.clone())?;
    let b_std: Vec<f64> = (0..p)
        .map(|f| (0..a).map(|k| weights[k][f] * c[k]).sum())
        .collect();
    let beta: Vec<f64> = b_std.iter().zip(&std.scale).map(|(b, s)| b / s).collect();
    let intercept = y_mean - dot(&beta, &std.mean);
    if !beta.iter().all(|v| v.is_finite()) || !intercept.is_finite() {
        return Err(Error::numerical("PLSR coefficients are not finite"));
    }
    Ok(PlsrModel {
        n_components: a,
        x_mean: std.mean,
        x_scale: std.scale,
        y_mean,
        weights,
        loadings,
        y_loadings,
        beta,
        intercept,
        decision_threshold: 0.0,
        constant_features: std.constant,
    })
}

impl PlsrModel {
    pub fn scores(&self, x: ArrayView2<f64>) -> Result<Vec<f64>> {
        if x.ncols() != self.beta.len() {
            return Err(Error::invalid(format!(
                "expected {} features, got {}",
                self.beta.len(),
                x.ncols()
            )));
        }
        let b = Array1::from(self.beta.clone());
        Ok((x.dot(&b) + self.intercept).to_vec())
    }
}

