//! Provenance sidecars: `<output>.manifest.json`.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

/// SHA-256 of the compact JSON form of the resolved configuration.
pub fn config_hash(config: &Value) -> String {
    let bytes = serde_json::to_vec(config).expect("json values serialize");
    hex::encode(Sha256::digest(&bytes))
}

pub fn sidecar_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

pub fn write<C: Serialize>(path: &Path, command: &str, config: &C, seeds: Value, outputs: &[&Path]) -> Result<()> {
    let config = serde_json::to_value(config)?;
    let manifest = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "config_sha256": config_hash(&config),
        "config": config,
        "seeds": seeds,
        "outputs": outputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
    });
    let text = serde_json::to_string_pretty(&manifest)? + "\n";
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
