//! Classifiers and model selection: PLS1 regression thresholded at zero, an
//! RBF-kernel SVM trained by SMO, and stratified k-fold grid search.

mod cv;
mod plsr;
mod svm;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use cv::{fold_assignment, kfold_select, Classifier, CvConfig, CvResult, CvRow, Hyper};
pub use plsr::{plsr_fit, PlsrModel};
pub use svm::{svm_fit, SvmModel, SMO_MAX_ITER, SMO_TOLERANCE};

/// `exp(−½ (‖x − y‖ / σ)²)`.
pub fn rbf_kernel(x: &[f64], y: &[f64], sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::invalid("sigma must be > 0"));
    }
    if x.len() != y.len() {
        return Err(Error::invalid(format!("vector lengths {} and {} differ", x.len(), y.len())));
    }
    let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((-0.5 * d2 / (sigma * sigma)).exp())
}

/// Squared Euclidean distances between the rows of `a` and of `b`.
pub(crate) fn squared_distances(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Array2<f64> {
    Array2::from_shape_fn((a.nrows(), b.nrows()), |(i, j)| {
        a.row(i)
            .iter()
            .zip(b.row(j))
            .map(|(x, y)| (x - y) * (x - y))
            .sum()
    })
}

/// Per-feature z-scoring with statistics from one training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    /// Population standard deviation; 1 for constant features.
    pub scale: Vec<f64>,
    pub constant: Vec<usize>,
}

impl Standardizer {
    pub fn fit(x: ArrayView2<f64>) -> Self {
        let n = x.nrows().max(1) as f64;
        let mean: Array1<f64> = x.sum_axis(Axis(0)) / n;
        let mut constant = Vec::new();
        let scale = x
            .columns()
            .into_iter()
            .zip(&mean)
            .enumerate()
            .map(|(j, (col, m))| {
                let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
                let sd = var.sqrt();
                if sd > 1e-12 * m.abs().max(1.0) {
                    sd
                } else {
                    constant.push(j);
                    1.0
                }
            })
            .collect();
        Self {
            mean: mean.to_vec(),
            scale,
            constant,
        }
    }

    pub fn transform(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.mean.len() {
            return Err(Error::invalid(format!(
                "expected {} features, got {}",
                self.mean.len(),
                x.ncols()
            )));
        }
        let mut out = x.to_owned();
        for (mut col, (m, s)) in out.columns_mut().into_iter().zip(self.mean.iter().zip(&self.scale)) {
            col.mapv_inplace(|v| (v - m) / s);
        }
        Ok(out)
    }
}

/// Labels from raw scores; a score of exactly 0 is assigned to +1.
pub fn labels_from_scores(scores: &[f64]) -> Vec<f64> {
    scores.iter().map(|&s| if s >= 0.0 { 1.0 } else { -1.0 }).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelParams {
    Plsr(PlsrModel),
    Svm(SvmModel),
}

/// A fitted classifier with its input standardization, ready for prediction
/// and serialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub classifier: Classifier,
    pub hyper: Hyper,
    pub feature_names: Vec<String>,
    pub standardizer: Standardizer,
    pub model: ModelParams,
    /// Mean k-fold accuracy of the chosen hyperparameters, if tuned.
    pub cv_accuracy: Option<f64>,
    /// SHA-256 of the training configuration, hex encoded.
    pub config_hash: String,
}

impl TrainedModel {
    /// Standardizes `x` with training statistics and fits with `hyper`.
    pub fn fit(x: ArrayView2<f64>, y: &[f64], hyper: Hyper, feature_names: Vec<String>) -> Result<Self> {
        if feature_names.len() != x.ncols() {
            return Err(Error::invalid("feature name count differs from column count"));
        }
        let standardizer = Standardizer::fit(x);
        let xs = standardizer.transform(x)?;
        let model = match hyper {
            Hyper::Plsr { n_components } => ModelParams::Plsr(plsr_fit(xs.view(), y, n_components)?),
            Hyper::Svm { sigma, c } => ModelParams::Svm(svm_fit(xs.view(), y, sigma, c)?),
        };
        Ok(Self {
            classifier: hyper.classifier(),
            hyper,
            feature_names,
            standardizer,
            model,
            cv_accuracy: None,
            config_hash: String::new(),
        })
    }

    pub fn scores(&self, x: ArrayView2<f64>) -> Result<Vec<f64>> {
        let xs = self.standardizer.transform(x)?;
        match &self.model {
            ModelParams::Plsr(m) => m.scores(xs.view()),
            ModelParams::Svm(m) => m.scores(xs.view()),
        }
    }

    /// Predicted ±1 labels and raw scores.
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<(Vec<f64>, Vec<f64>)> {
        let scores = self.scores(x)?;
        Ok((labels_from_scores(&scores), scores))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::data(format!("model JSON: {e}")))
    }
}

/// Hex SHA-256 of a value's JSON encoding.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    use sha2::{Digest, Sha256};
    let json = serde_json::to_vec(value).expect("config serializes");
    Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
}
