use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::svm::svm_fit_precomputed;
use super::{labels_from_scores, plsr_fit, squared_distances, Standardizer};
use crate::error::{Error, Result};
use crate::rng::StreamKey;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Classifier {
    Plsr,
    Svm,
}

impl Classifier {
    pub const ALL: [Classifier; 2] = [Classifier::Plsr, Classifier::Svm];

    pub fn as_str(self) -> &'static str {
        match self {
            Classifier::Plsr => "plsr",
            Classifier::Svm => "svm",
        }
    }
}

impl fmt::Display for Classifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Classifier {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "plsr" | "pls" => Ok(Classifier::Plsr),
            "svm" => Ok(Classifier::Svm),
            other => Err(Error::invalid(format!("unknown classifier {other:?}"))),
        }
    }
}

/// One hyperparameter setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Hyper {
    Plsr { n_components: usize },
    Svm { sigma: f64, c: f64 },
}

impl Hyper {
    pub fn classifier(&self) -> Classifier {
        match self {
            Hyper::Plsr { .. } => Classifier::Plsr,
            Hyper::Svm { .. } => Classifier::Svm,
        }
    }

    /// Tie-break order: smaller σ, then smaller C, then fewer components.
    pub(crate) fn order(&self, other: &Self) -> std::cmp::Ordering {
        match (self, other) {
            (Hyper::Svm { sigma: s1, c: c1 }, Hyper::Svm { sigma: s2, c: c2 }) => {
                s1.total_cmp(s2).then(c1.total_cmp(c2))
            }
            (Hyper::Plsr { n_components: a }, Hyper::Plsr { n_components: b }) => a.cmp(b),
            (a, b) => a.classifier().cmp(&b.classifier()),
        }
    }
}

impl fmt::Display for Hyper {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Hyper::Plsr { n_components } => write!(f, "components={n_components}"),
            Hyper::Svm { sigma, c } => write!(f, "sigma={sigma:.6} C={c}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub k: usize,
    /// Multipliers of the median pairwise distance of the standardized
    /// training set; ignored when `sigma_grid` is given.
    pub sigma_scales: Vec<f64>,
    /// Absolute kernel widths.
    pub sigma_grid: Option<Vec<f64>>,
    pub c_grid: Vec<f64>,
    /// PLSR component counts; defaults to `1..=min(8, p)`.
    pub component_grid: Option<Vec<usize>>,
    pub seed: u64,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            k: 10,
            sigma_scales: vec![0.25, 0.5, 1.0, 2.0, 4.0],
            sigma_grid: None,
            c_grid: vec![0.1, 1.0, 10.0, 100.0],
            component_grid: None,
            seed: 0,
        }
    }
}

impl CvConfig {
    pub fn check(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::invalid("k must be ≥ 2"));
        }
        let positive = |v: &[f64]| !v.is_empty() && v.iter().all(|&x| x > 0.0 && x.is_finite());
        if !positive(&self.sigma_scales) && self.sigma_grid.is_none() {
            return Err(Error::invalid("sigma grid must be non-empty and positive"));
        }
        if let Some(g) = &self.sigma_grid {
            if !positive(g) {
                return Err(Error::invalid("sigma grid must be non-empty and positive"));
            }
        }
        if !positive(&self.c_grid) {
            return Err(Error::invalid("C grid must be non-empty and positive"));
        }
        if let Some(g) = &self.component_grid {
            if g.is_empty() || g.contains(&0) {
                return Err(Error::invalid("component grid must be non-empty and ≥ 1"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub hyper: Hyper,
    pub fold_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub classifier: Classifier,
    pub table: Vec<CvRow>,
    pub best: Hyper,
    pub best_accuracy: f64,
    /// Median pairwise distance anchoring the σ grid (SVM only).
    pub median_distance: Option<f64>,
}

/// Stratified fold of every row: each class is shuffled, the class lists are
/// concatenated, and position `i` goes to fold `i mod k`.
pub fn fold_assignment(y: &[f64], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::invalid("k must be ≥ 2"));
    }
    if y.len() < k {
        return Err(Error::invalid(format!("{} rows cannot fill {k} folds", y.len())));
    }
    let mut order = Vec::with_capacity(y.len());
    for (ci, class) in [1.0, -1.0].into_iter().enumerate() {
        let mut members: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        members.shuffle(&mut StreamKey::new(seed, "folds").num(ci as u64).rng());
        order.extend(members);
    }
    if order.len() != y.len() {
        return Err(Error::data("labels must be ±1"));
    }
    let mut fold = vec![0; y.len()];
    for (pos, &i) in order.iter().enumerate() {
        fold[i] = pos % k;
    }
    for f in 0..k {
        for class in [1.0, -1.0] {
            let held = (0..y.len()).any(|i| fold[i] == f && y[i] == class);
            let kept = (0..y.len()).any(|i| fold[i] != f && y[i] == class);
            if !held || !kept {
                return Err(Error::data(format!("stratification failed: fold {f} lacks a class")));
            }
        }
    }
    Ok(fold)
}

fn median_pairwise_distance(x: ArrayView2<f64>) -> f64 {
    let xs = Standardizer::fit(x).transform(x).expect("same width");
    let d2 = squared_distances(xs.view(), xs.view());
    let n = x.nrows();
    let mut d: Vec<f64> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .map(|(i, j)| d2[[i, j]].sqrt())
        .collect();
    if d.is_empty() {
        return 0.0;
    }
    d.sort_by(f64::total_cmp);
    let m = d.len() / 2;
    if d.len() % 2 == 1 {
        d[m]
    } else {
        (d[m - 1] + d[m]) / 2.0
    }
}

fn accuracy(pred: &[f64], truth: &[f64]) -> f64 {
    let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    hits as f64 / truth.len() as f64
}

fn select_rows(x: ArrayView2<f64>, rows: &[usize]) -> Array2<f64> {
    x.select(Axis(0), rows)
}

/// Grid search by stratified k-fold cross-validation on `(x, y)`.
pub fn kfold_select(x: ArrayView2<f64>, y: &[f64], cfg: &CvConfig, classifier: Classifier) -> Result<CvResult> {
    cfg.check()?;
    if x.nrows() != y.len() {
        return Err(Error::invalid(format!("{} rows but {} labels", x.nrows(), y.len())));
    }
    let p = x.ncols();
    let folds = fold_assignment(y, cfg.k, cfg.seed)?;

    let mut median_distance = None;
    let mut grid: Vec<Hyper> = match classifier {
        Classifier::Plsr => {
            let comps = cfg
                .component_grid
                .clone()
                .unwrap_or_else(|| (1..=p.min(8)).collect());
            let mut comps: Vec<usize> = comps.into_iter().filter(|&a| a <= p).collect();
            if comps.is_empty() {
                comps.push(p);
            }
            comps.into_iter().map(|n_components| Hyper::Plsr { n_components }).collect()
        }
        Classifier::Svm => {
            let sigmas = match &cfg.sigma_grid {
                Some(g) => g.clone(),
                None => {
                    let med = median_pairwise_distance(x);
                    if !(med > 0.0) {
                        return Err(Error::numerical("median pairwise distance is zero"));
                    }
                    median_distance = Some(med);
                    cfg.sigma_scales.iter().map(|s| s * med).collect()
                }
            };
            sigmas
                .iter()
                .flat_map(|&sigma| cfg.c_grid.iter().map(move |&c| Hyper::Svm { sigma, c }))
                .collect()
        }
    };
    grid.sort_by(|a, b| a.order(b));
    grid.dedup_by(|a, b| a.order(b).is_eq());

    let per_fold = (0..cfg.k)
        .into_par_iter()
        .map(|f| {
            let tr: Vec<usize> = (0..y.len()).filter(|&i| folds[i] != f).collect();
            let va: Vec<usize> = (0..y.len()).filter(|&i| folds[i] == f).collect();
            let ytr: Vec<f64> = tr.iter().map(|&i| y[i]).collect();
            let yva: Vec<f64> = va.iter().map(|&i| y[i]).collect();
            let std = Standardizer::fit(select_rows(x, &tr).view());
            let xtr = std.transform(select_rows(x, &tr).view())?;
            let xva = std.transform(select_rows(x, &va).view())?;
            match classifier {
                Classifier::Plsr => grid
                    .iter()
                    .map(|h| {
                        let Hyper::Plsr { n_components } = *h else { unreachable!() };
                        let m = plsr_fit(xtr.view(), &ytr, n_components)?;
                        Ok(accuracy(&labels_from_scores(&m.scores(xva.view())?), &yva))
                    })
                    .collect::<Result<Vec<f64>>>(),
                Classifier::Svm => {
                    let d2tr = squared_distances(xtr.view(), xtr.view());
                    let d2va = squared_distances(xva.view(), xtr.view());
                    grid.iter()
                        .map(|h| {
                            let Hyper::Svm { sigma, c } = *h else { unreachable!() };
                            let m = svm_fit_precomputed(xtr.view(), &ytr, &d2tr, sigma, c)?;
                            let gamma = 0.5 / (sigma * sigma);
                            let scores: Vec<f64> = (0..va.len())
                                .map(|v| {
                                    m.support_indices
                                        .iter()
                                        .zip(&m.dual_coefficients)
                                        .map(|(&s, a)| a * (-gamma * d2va[[v, s]]).exp())
                                        .sum::<f64>()
                                        + m.bias
                                })
                                .collect();
                            Ok(accuracy(&labels_from_scores(&scores), &yva))
                        })
                        .collect::<Result<Vec<f64>>>()
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let table: Vec<CvRow> = grid
        .iter()
        .enumerate()
        .map(|(g, &hyper)| {
            let fold_accuracies: Vec<f64> = per_fold.iter().map(|f| f[g]).collect();
            let mean_accuracy = fold_accuracies.iter().sum::<f64>() / cfg.k as f64;
            CvRow {
                hyper,
                fold_accuracies,
                mean_accuracy,
            }
        })
        .collect();
    let mut best = 0;
    for (i, row) in table.iter().enumerate() {
        if row.mean_accuracy > table[best].mean_accuracy {
            best = i;
        }
    }
    Ok(CvResult {
        classifier,
        best: table[best].hyper,
        best_accuracy: table[best].mean_accuracy,
        table,
        median_distance,
    })
}
