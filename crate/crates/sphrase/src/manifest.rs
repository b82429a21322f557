//! Run manifests: a JSON record of what a command read, wrote and with
//! which settings, re-loadable to repeat a training run.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sphrase_core::{Regime, TrainConfig};

use crate::formats::{self, FormatError};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Serializable mirror of [`TrainConfig`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSettings {
    pub regime: String,
    pub dim: usize,
    pub window: usize,
    pub epochs: u32,
    pub initial_lr: f64,
    pub decay: f64,
    pub batch_tokens: usize,
    pub num_sampled: usize,
    pub noise_power: f64,
    pub seed: u64,
    pub min_count: u64,
    pub max_phrase_len: usize,
    pub threads: usize,
    pub deterministic: bool,
    pub checkpoints: bool,
}

impl TrainSettings {
    pub fn train_config(&self) -> Result<TrainConfig, String> {
        let regime: Regime = self.regime.parse().map_err(|_| format!("unknown regime {:?}", self.regime))?;
        Ok(TrainConfig {
            dim: self.dim,
            window: self.window,
            regime,
            epochs: self.epochs,
            initial_lr: self.initial_lr,
            decay: self.decay,
            batch_tokens: self.batch_tokens,
            num_sampled: self.num_sampled,
            noise_power: self.noise_power,
            seed: self.seed,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<TrainSettings>,
    /// Free-form settings of non-training commands (`--repeats`, `--topk`, ...).
    #[serde(default, skip_serializing_if = "serde_json::Map::is_empty")]
    pub options: serde_json::Map<String, serde_json::Value>,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
}

pub fn now_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis())
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        Self {
            tool_version: TOOL_VERSION.to_string(),
            command: command.to_string(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            train: None,
            options: serde_json::Map::new(),
            started_unix_ms: now_ms(),
            finished_unix_ms: 0,
        }
    }

    pub fn option(&mut self, key: &str, value: impl Into<serde_json::Value>) {
        self.options.insert(key.to_string(), value.into());
    }

    pub fn save(&mut self, path: &Path) -> formats::Result<()> {
        self.finished_unix_ms = now_ms();
        let json = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, json + "\n").map_err(|source| FormatError::Io { path: path.to_path_buf(), source })
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = formats::read_text(path)?;
        serde_json::from_str(&text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
    }
}

/// `<output>.manifest.json`, or `None` when the output is stdout.
pub fn sidecar_path(output: &Path) -> Option<PathBuf> {
    if formats::is_stdio(output) {
        return None;
    }
    let mut name = output.file_name()?.to_os_string();
    name.push(".manifest.json");
    Some(output.with_file_name(name))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip() {
        let mut m = RunManifest::new("train");
        m.inputs.push("corpus.txt".into());
        m.train = Some(TrainSettings {
            regime: "sphrase-r".into(),
            dim: 300,
            window: 5,
            epochs: 20,
            initial_lr: 0.001,
            decay: 0.9,
            batch_tokens: 60_000,
            num_sampled: 5_000,
            noise_power: 0.75,
            seed: 7,
            min_count: 100,
            max_phrase_len: 10,
            threads: 1,
            deterministic: true,
            checkpoints: true,
        });
        m.option("repeats", 100);
        let json = serde_json::to_string(&m).unwrap();
        let back: RunManifest = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m);
        let cfg = back.train.unwrap().train_config().unwrap();
        assert_eq!(cfg, TrainConfig { seed: 7, ..TrainConfig::default() });
    }

    #[test]
    fn sidecars() {
        assert_eq!(sidecar_path(Path::new("out/vocab.tsv")).unwrap(), Path::new("out/vocab.tsv.manifest.json"));
        assert!(sidecar_path(Path::new("-")).is_none());
    }
}
