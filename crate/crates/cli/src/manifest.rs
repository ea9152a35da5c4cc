use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

/// Sidecar written next to every output file.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub inputs: Vec<PathBuf>,
    pub output: PathBuf,
    /// Effective configuration, defaults included.
    pub config: Value,
    pub config_hash: String,
    pub seed: Option<u64>,
    pub tool_version: &'static str,
    pub started_at: String,
    pub finished_at: String,
}

pub fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

pub fn config_hash(config: &Value) -> String {
    let canonical = serde_json::to_vec(config).expect("config serializes");
    hex::encode(Sha256::digest(canonical))
}

pub fn sidecar_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

impl RunManifest {
    pub fn new(subcommand: &str, inputs: Vec<PathBuf>, output: &Path, config: Value, seed: Option<u64>, started_at: String) -> Self {
        RunManifest {
            subcommand: subcommand.to_owned(),
            inputs,
            output: output.to_owned(),
            config_hash: config_hash(&config),
            config,
            seed,
            tool_version: env!("CARGO_PKG_VERSION"),
            started_at,
            finished_at: now(),
        }
    }

    pub fn write(&self) -> std::io::Result<()> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        std::fs::write(sidecar_path(&self.output), text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sidecar_name() {
        assert_eq!(sidecar_path(Path::new("out/report.json")), PathBuf::from("out/report.json.manifest.json"));
    }

    #[test]
    fn hash_tracks_config() {
        let a = config_hash(&serde_json::json!({"dim": 100, "seed": 1}));
        assert_eq!(a.len(), 64);
        assert_eq!(a, config_hash(&serde_json::json!({"dim": 100, "seed": 1})));
        assert_ne!(a, config_hash(&serde_json::json!({"dim": 100, "seed": 2})));
    }
}
