//! Recording manifest: a JSON file naming the subject, condition and one CSV
//! file per trial. Each CSV row is one channel in manifest order, samples as
//! comma-separated decimal microvolts, no header.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{ChannelId, Condition, Recording, Trial};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub subject_id: String,
    pub condition: Condition,
    pub fs: f64,
    pub channels: Vec<String>,
    /// Paths relative to the manifest's directory (absolute paths allowed).
    pub trial_files: Vec<PathBuf>,
}

/// Loads a recording from its manifest. The result is not validated.
pub fn read_recording(manifest_path: &Path) -> Result<Recording> {
    let text = fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| Error::parse(manifest_path, e))?;
    let channels = manifest
        .channels
        .iter()
        .map(|c| c.parse::<ChannelId>())
        .collect::<Result<Vec<_>>>()?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));

    let trials = manifest
        .trial_files
        .iter()
        .map(|f| read_trial_csv(&base.join(f)))
        .collect::<Result<Vec<_>>>()?;

    Ok(Recording {
        subject_id: manifest.subject_id,
        condition: manifest.condition,
        fs: manifest.fs,
        channels,
        trials,
    })
}

/// Writes `manifest.json` plus `trial_XX.csv` files into `dir`, returning the
/// manifest path.
pub fn write_recording(rec: &Recording, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut trial_files = Vec::with_capacity(rec.trials.len());
    for (i, trial) in rec.trials.iter().enumerate() {
        let name = PathBuf::from(format!("trial_{i:02}.csv"));
        write_trial_csv(trial, &dir.join(&name))?;
        trial_files.push(name);
    }
    let manifest = Manifest {
        subject_id: rec.subject_id.clone(),
        condition: rec.condition,
        fs: rec.fs,
        channels: rec.channels.iter().map(|c| c.name().to_string()).collect(),
        trial_files,
    };
    let path = dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn read_trial_csv(path: &Path) -> Result<Trial> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|v| {
                v.trim().parse::<f64>().map_err(|e| {
                    Error::parse(path, format!("line {}: {e} in {v:?}", lineno + 1))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    let n_cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != n_cols) {
        return Err(Error::parse(path, "rows have differing sample counts"));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    let samples = Array2::from_shape_vec((rows.len(), n_cols), flat)
        .map_err(|e| Error::parse(path, e))?;
    Ok(Trial::new(samples))
}

fn write_trial_csv(trial: &Trial, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    for lane in trial.samples.outer_iter() {
        for (j, v) in lane.iter().enumerate() {
            if j > 0 {
                out.write_all(b",").map_err(io)?;
            }
            // `{}` on f64 prints the shortest string that parses back exactly.
            write!(out, "{v}").map_err(io)?;
        }
        out.write_all(b"\n").map_err(io)?;
    }
    out.flush().map_err(io)
}
