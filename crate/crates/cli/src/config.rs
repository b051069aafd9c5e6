//! Serializable run configuration, embedded in every `summary.json`.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use stereo_eeg::eval::PipelineConfig;
use stereo_eeg::synth::{default_paper_profile, subjects, EffectSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// Frontal 3D δ, posterior 2D δ and occipital 3D θ effects.
    Paper,
    /// No planted effects.
    Uniform,
}

impl Profile {
    pub fn specs(self, seed: u64, count: usize) -> Vec<EffectSpec> {
        let base = match self {
            Profile::Paper => default_paper_profile(seed),
            Profile::Uniform => EffectSpec::uniform(seed),
        };
        subjects(&base, count)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum Input {
    Synth { profile: Profile, seed: u64, subjects: usize },
    Manifests { pairs: Vec<(PathBuf, PathBuf)> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub input: Input,
    pub pipeline: PipelineConfig,
}

impl RunConfig {
    /// Dotted paths of pipeline settings that differ from the defaults.
    /// Seeds are not counted.
    pub fn deviations(&self) -> Vec<String> {
        let got = serde_json::to_value(&self.pipeline).expect("serializes");
        let want = serde_json::to_value(PipelineConfig::default()).expect("serializes");
        let mut out = Vec::new();
        diff("pipeline", &got, &want, &mut out);
        out.retain(|p| !p.ends_with("seed"));
        out
    }

    pub fn summary(&self) -> Value {
        serde_json::json!({
            "tool": "stereo-eeg",
            "version": env!("CARGO_PKG_VERSION"),
            "run_config": self,
            "deviations_from_defaults": self.deviations(),
        })
    }
}

fn diff(path: &str, got: &Value, want: &Value, out: &mut Vec<String>) {
    match (got, want) {
        (Value::Object(g), Value::Object(w)) => {
            for (k, gv) in g {
                let p = format!("{path}.{k}");
                match w.get(k) {
                    Some(wv) => diff(&p, gv, wv, out),
                    None => out.push(p),
                }
            }
        }
        _ if got != want => out.push(path.to_string()),
        _ => {}
    }
}
