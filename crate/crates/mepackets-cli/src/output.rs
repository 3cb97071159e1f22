//! Deterministic CSV/JSON artifact writers.
//!
//! Every CSV starts with a `#` comment line recording the crate version,
//! the seed and a hash of the effective configuration, followed by the
//! header row. Identical configuration and seed produce byte-identical
//! files.

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

pub struct RunStamp {
    pub seed: u64,
    pub config_hash: String,
}

impl RunStamp {
    pub fn new<C: Serialize>(seed: u64, config: &C) -> Result<Self> {
        let canonical = serde_json::to_string(config).context("serializing config")?;
        let digest = Sha256::digest(canonical.as_bytes());
        let mut config_hash = String::with_capacity(16);
        for byte in digest.iter().take(8) {
            config_hash.push_str(&format!("{byte:02x}"));
        }
        Ok(Self { seed, config_hash })
    }

    fn comment(&self) -> String {
        format!(
            "# version={} seed={} config_hash={}\n",
            env!("CARGO_PKG_VERSION"),
            self.seed,
            self.config_hash
        )
    }
}

pub fn out_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

/// Write a CSV with the stamp comment, a header, and string-formatted rows.
pub fn write_csv(
    path: &Path,
    stamp: &RunStamp,
    header: &[&str],
    rows: impl Iterator<Item = Vec<String>>,
) -> Result<()> {
    let mut file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    file.write_all(stamp.comment().as_bytes())?;
    let mut writer = csv::Writer::from_writer(file);
    writer.write_record(header)?;
    for row in rows {
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

/// Write a pretty JSON artifact.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).context("serializing report")?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Shortest-roundtrip float formatting; deterministic across runs.
pub fn fmt(v: f64) -> String {
    format!("{v}")
}
