//! Band selection: per-channel normalized band powers of trial-averaged
//! signals, the 2D − 3D difference matrix, and election of the bands whose
//! difference exceeds a threshold on the most channels.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dsp::{average_trials, normalized_band_powers, psd, Preprocess};
use crate::error::{Error, Result};
use crate::model::{validate_recording, BandLabel, BandScheme, ChannelId, Recording};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub preprocess: Preprocess,
    pub window_len: usize,
    pub hop: usize,
    /// Minimum |2D − 3D| in percentage points for a channel to count.
    pub threshold: f64,
    pub n_select: usize,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            preprocess: Preprocess::selection(),
            window_len: 512,
            hop: 1,
            threshold: 2.0,
            n_select: 2,
        }
    }
}

/// Channels × bands table of percentages (one condition) or of percentage
/// point differences (2D − 3D).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandMatrix {
    pub channels: Vec<ChannelId>,
    pub scheme: BandScheme,
    #[serde(with = "as_rows")]
    pub values: Array2<f64>,
}

/// Serializes a matrix as a list of rows.
mod as_rows {
    use ndarray::Array2;
    use serde::{de::Error, Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &Array2<f64>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = m.rows().into_iter().map(|r| r.to_vec()).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Array2<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(D::Error::custom("ragged matrix"));
        }
        let flat = rows.iter().flatten().copied().collect();
        Array2::from_shape_vec((rows.len(), cols), flat).map_err(D::Error::custom)
    }
}

pub type BandDiffMatrix = BandMatrix;

impl BandMatrix {
    pub fn get(&self, channel: ChannelId, band: BandLabel) -> Option<f64> {
        let row = self.channels.iter().position(|&c| c == channel)?;
        let col = self.scheme.position(band)?;
        Some(self.values[[row, col]])
    }

    /// Writes the matrix as CSV: a `channel` column then one column per band.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
        let mut header = vec!["channel".to_string()];
        header.extend(self.scheme.labels().iter().map(|b| b.symbol().to_string()));
        w.write_record(&header).map_err(|e| csv_err(path, e))?;
        for (ch, row) in self.channels.iter().zip(self.values.rows()) {
            let mut rec = vec![ch.name().to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec).map_err(|e| csv_err(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Reads a matrix written by [`BandMatrix::write_csv`]. The scheme is
    /// inferred from the band columns.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
        let header = r.headers().map_err(|e| csv_err(path, e))?.clone();
        let labels = header
            .iter()
            .skip(1)
            .map(|h| h.parse::<BandLabel>())
            .collect::<Result<Vec<_>>>()?;
        let scheme = [BandScheme::selection(), BandScheme::epoch()]
            .into_iter()
            .find(|s| s.labels() == labels)
            .ok_or_else(|| Error::parse(path, "band columns match no known scheme"))?;
        let mut channels = Vec::new();
        let mut flat = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| csv_err(path, e))?;
            if rec.len() != labels.len() + 1 {
                return Err(Error::parse(path, "ragged row"));
            }
            channels.push(rec[0].parse::<ChannelId>()?);
            for v in rec.iter().skip(1) {
                flat.push(v.trim().parse::<f64>().map_err(|e| Error::parse(path, e))?);
            }
        }
        let values = Array2::from_shape_vec((channels.len(), labels.len()), flat)
            .map_err(|e| Error::parse(path, e))?;
        Ok(Self {
            channels,
            scheme,
            values,
        })
    }
}

pub(crate) fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::parse(path, e)
}

/// Normalized band powers (Selection scheme) of every channel after trial
/// averaging, notch, band-pass and STFT.
pub fn condition_band_matrix(rec: &Recording, cfg: &SelectionConfig) -> Result<BandMatrix> {
    validate_recording(rec).into_result()?;
    let scheme = BandScheme::selection();
    let chain = cfg.preprocess.design(rec.fs)?;
    let mean = average_trials(&rec.trials)?;

    let rows = (0..rec.channels.len())
        .into_par_iter()
        .map(|row| {
            let x = mean.samples.row(row).to_vec();
            let filtered = chain.apply(&x)?;
            let p = psd(&filtered, rec.fs, cfg.window_len, cfg.hop)?;
            normalized_band_powers(&p, &scheme)
        })
        .collect::<Result<Vec<_>>>()?;

    let n_bands = scheme.bands.len();
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Ok(BandMatrix {
        channels: rec.channels.clone(),
        values: Array2::from_shape_vec((rec.channels.len(), n_bands), flat)
            .expect("one row per channel"),
        scheme,
    })
}

/// Element-wise `m2d − m3d`.
pub fn diff_matrix(m2d: &BandMatrix, m3d: &BandMatrix) -> Result<BandDiffMatrix> {
    if m2d.values.dim() != m3d.values.dim() {
        return Err(Error::data(format!(
            "matrix shapes differ: {:?} vs {:?}",
            m2d.values.dim(),
            m3d.values.dim()
        )));
    }
    if m2d.channels != m3d.channels || m2d.scheme != m3d.scheme {
        return Err(Error::data("2D and 3D matrices use different channels or bands"));
    }
    Ok(BandMatrix {
        channels: m2d.channels.clone(),
        scheme: m2d.scheme.clone(),
        values: &m2d.values - &m3d.values,
    })
}

/// Element-wise mean of per-subject difference matrices.
pub fn average_diff(ms: &[BandDiffMatrix]) -> Result<BandDiffMatrix> {
    let first = ms
        .first()
        .ok_or_else(|| Error::invalid("no difference matrices to average"))?;
    let mut sum = first.values.clone();
    for m in &ms[1..] {
        if m.channels != first.channels || m.scheme != first.scheme {
            return Err(Error::data("subject matrices use different channels or bands"));
        }
        sum += &m.values;
    }
    Ok(BandMatrix {
        channels: first.channels.clone(),
        scheme: first.scheme.clone(),
        values: sum / ms.len() as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominantBands {
    pub bands: Vec<BandLabel>,
    /// Channels with |difference| > threshold, for every band of the scheme.
    pub per_band_channel_counts: BTreeMap<BandLabel, usize>,
    pub threshold: f64,
}

impl DominantBands {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self).expect("selection serializes");
        fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e))
    }
}

/// Elects the `n_select` bands with the most channels over `threshold`,
/// ordered by count then by frequency.
pub fn select_dominant_bands(d: &BandDiffMatrix, threshold: f64, n_select: usize) -> DominantBands {
    let counts: Vec<(BandLabel, usize)> = d
        .scheme
        .bands
        .iter()
        .enumerate()
        .map(|(col, b)| {
            let n = d.values.column(col).iter().filter(|v| v.abs() > threshold).count();
            (b.label, n)
        })
        .collect();
    let mut order = counts.clone();
    // BandLabel orders by frequency, so the sort is total.
    order.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    DominantBands {
        bands: order.iter().take(n_select).map(|&(b, _)| b).collect(),
        per_band_channel_counts: counts.into_iter().collect(),
        threshold,
    }
}
