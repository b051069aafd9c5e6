//! Python bindings: synthesis, band selection, feature extraction, training
//! and metrics. Arrays cross the boundary as lists of floats.

use std::collections::BTreeMap;
use std::path::PathBuf;

use ndarray::Array2;
use pyo3::exceptions::{PyArithmeticError, PyIOError, PyValueError};
use pyo3::prelude::*;
use stereo_eeg::bandsel::{condition_band_matrix, diff_matrix, select_dominant_bands, SelectionConfig};
use stereo_eeg::dsp::{normalized_band_powers, psd};
use stereo_eeg::eval::{confusion, metrics as eval_metrics};
use stereo_eeg::features::{build_dataset, to_matrix, EpochConfig};
use stereo_eeg::learn::{kfold_select, Classifier, CvConfig, TrainedModel};
use stereo_eeg::model::{
    parse_channel_list, read_recording, write_recording, BandLabel, BandScheme, ChannelId,
};
use stereo_eeg::synth::{default_paper_profile, generate_pair, subjects, EffectSpec};

fn py_err(e: stereo_eeg::Error) -> PyErr {
    match e {
        stereo_eeg::Error::Numerical(_) => PyArithmeticError::new_err(e.to_string()),
        stereo_eeg::Error::Io { .. } => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn parse_bands(names: &[String]) -> PyResult<Vec<BandLabel>> {
    names.iter().map(|b| b.parse::<BandLabel>().map_err(py_err)).collect()
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<Array2<f64>> {
    let p = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != p) {
        return Err(PyValueError::new_err("rows have differing lengths"));
    }
    let n = rows.len();
    Array2::from_shape_vec((n, p), rows.into_iter().flatten().collect())
        .map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Writes synthetic 2D/3D recordings for `n_subjects` subjects under `out`
/// and returns the (2D, 3D) manifest paths per subject.
#[pyfunction]
#[pyo3(signature = (out, profile = "paper", seed = 0, n_subjects = 1))]
fn synth(out: PathBuf, profile: &str, seed: u64, n_subjects: usize) -> PyResult<Vec<(String, String)>> {
    let base = match profile {
        "paper" => default_paper_profile(seed),
        "uniform" => EffectSpec::uniform(seed),
        other => return Err(PyValueError::new_err(format!("unknown profile {other:?}"))),
    };
    subjects(&base, n_subjects)
        .iter()
        .map(|spec| {
            let (r2, r3) = generate_pair(spec).map_err(py_err)?;
            let dir = out.join(&spec.subject_id);
            let p2 = write_recording(&r2, &dir.join("2D")).map_err(py_err)?;
            let p3 = write_recording(&r3, &dir.join("3D")).map_err(py_err)?;
            Ok((p2.display().to_string(), p3.display().to_string()))
        })
        .collect()
}

/// Percentage of power per selection band for one signal.
#[pyfunction]
#[pyo3(signature = (x, fs = 512.0, window_len = 512, hop = 1))]
fn band_powers(x: Vec<f64>, fs: f64, window_len: usize, hop: usize) -> PyResult<BTreeMap<String, f64>> {
    let scheme = BandScheme::selection();
    let p = psd(&x, fs, window_len, hop).map_err(py_err)?;
    let v = normalized_band_powers(&p, &scheme).map_err(py_err)?;
    Ok(scheme.labels().iter().map(|b| b.to_string()).zip(v).collect())
}

type DiffRows = BTreeMap<String, Vec<f64>>;

/// 2D − 3D band-difference matrix of one subject and the elected bands.
#[pyfunction]
#[pyo3(signature = (manifest_2d, manifest_3d, threshold = 2.0, n_select = 2))]
fn band_select(
    manifest_2d: PathBuf,
    manifest_3d: PathBuf,
    threshold: f64,
    n_select: usize,
) -> PyResult<(DiffRows, Vec<String>)> {
    let cfg = SelectionConfig::default();
    let r2 = read_recording(&manifest_2d).map_err(py_err)?;
    let r3 = read_recording(&manifest_3d).map_err(py_err)?;
    let d = diff_matrix(
        &condition_band_matrix(&r2, &cfg).map_err(py_err)?,
        &condition_band_matrix(&r3, &cfg).map_err(py_err)?,
    )
    .map_err(py_err)?;
    let sel = select_dominant_bands(&d, threshold, n_select);
    let rows = d
        .channels
        .iter()
        .zip(d.values.outer_iter())
        .map(|(c, r)| (c.name().to_string(), r.to_vec()))
        .collect();
    Ok((rows, sel.bands.iter().map(|b| b.to_string()).collect()))
}

type Split = (Vec<Vec<f64>>, Vec<f64>);

/// Epoch features split into train and test:
/// `(feature_names, (x_train, y_train), (x_test, y_test))`.
#[pyfunction]
#[pyo3(signature = (manifest_2d, manifest_3d, channels, bands, split_seed = 0))]
fn features(
    manifest_2d: PathBuf,
    manifest_3d: PathBuf,
    channels: &str,
    bands: Vec<String>,
    split_seed: u64,
) -> PyResult<(Vec<String>, Split, Split)> {
    let r2 = read_recording(&manifest_2d).map_err(py_err)?;
    let r3 = read_recording(&manifest_3d).map_err(py_err)?;
    let chans: Vec<ChannelId> = parse_channel_list(channels).map_err(py_err)?;
    let ds = build_dataset(&r2, &r3, &chans, &parse_bands(&bands)?, split_seed, &EpochConfig::default())
        .map_err(py_err)?;
    let split = |rows| -> PyResult<Split> {
        let (x, y) = to_matrix(rows).map_err(py_err)?;
        Ok((x.outer_iter().map(|r| r.to_vec()).collect(), y))
    };
    Ok((ds.feature_names.clone(), split(&ds.train)?, split(&ds.test)?))
}

/// A fitted PLSR or SVM classifier.
#[pyclass(name = "Model")]
struct PyModel(TrainedModel);

#[pymethods]
impl PyModel {
    /// Predicted ±1 labels and decision scores.
    fn predict(&self, x: Vec<Vec<f64>>) -> PyResult<(Vec<f64>, Vec<f64>)> {
        self.0.predict(matrix(x)?.view()).map_err(py_err)
    }

    fn to_json(&self) -> String {
        self.0.to_json()
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        TrainedModel::from_json(text).map(PyModel).map_err(py_err)
    }

    #[getter]
    fn hyper(&self) -> String {
        self.0.hyper.to_string()
    }

    #[getter]
    fn cv_accuracy(&self) -> Option<f64> {
        self.0.cv_accuracy
    }
}

/// Tunes `classifier` ("plsr" or "svm") by k-fold cross-validation and fits
/// it on all of `x`.
#[pyfunction]
#[pyo3(signature = (x, y, classifier, k = 10, seed = 0, feature_names = None))]
fn train(
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    classifier: &str,
    k: usize,
    seed: u64,
    feature_names: Option<Vec<String>>,
) -> PyResult<PyModel> {
    let classifier: Classifier = classifier.parse().map_err(py_err)?;
    let x = matrix(x)?;
    let names = feature_names.unwrap_or_else(|| (0..x.ncols()).map(|i| format!("f{i}")).collect());
    let cv = CvConfig { k, seed, ..CvConfig::default() };
    let result = kfold_select(x.view(), &y, &cv, classifier).map_err(py_err)?;
    let mut model = TrainedModel::fit(x.view(), &y, result.best, names).map_err(py_err)?;
    model.cv_accuracy = Some(result.best_accuracy);
    Ok(PyModel(model))
}

/// Accuracy, sensitivity (2D = +1 detected) and specificity; undefined
/// ratios are None.
#[pyfunction]
fn metrics(pred: Vec<f64>, truth: Vec<f64>) -> PyResult<(f64, Option<f64>, Option<f64>)> {
    let m = eval_metrics(&confusion(&pred, &truth).map_err(py_err)?).map_err(py_err)?;
    Ok((m.accuracy, m.sensitivity, m.specificity))
}

#[pymodule]
fn stereo_eeg_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(synth, m)?)?;
    m.add_function(wrap_pyfunction!(band_powers, m)?)?;
    m.add_function(wrap_pyfunction!(band_select, m)?)?;
    m.add_function(wrap_pyfunction!(features, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(metrics, m)?)?;
    m.add_class::<PyModel>()?;
    Ok(())
}
