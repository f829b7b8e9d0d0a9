//! Run manifests and report files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_digest: String,
    pub seed: Option<u64>,
    pub versions: String,
    pub started: String,
    pub finished: String,
}

/// SHA-256 of the compact JSON form of `config`. Struct fields serialize in
/// declaration order, so the form is canonical for a given config type.
pub fn digest<T: Serialize>(config: &T) -> String {
    let bytes = serde_json::to_vec(config).expect("config serializes");
    hex::encode(Sha256::digest(&bytes))
}

pub fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

impl RunManifest {
    pub fn new<T: Serialize>(command: &str, config: &T, seed: Option<u64>, started: String) -> Self {
        Self {
            command: command.to_string(),
            config_digest: digest(config),
            seed,
            versions: format!("ewens-clt {}", env!("CARGO_PKG_VERSION")),
            started,
            finished: now(),
        }
    }
}

pub struct OutputDir {
    root: PathBuf,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::Io(format!("cannot create {}: {e}", root.display())))?;
        Ok(Self { root: root.to_path_buf() })
    }

    fn write(&self, name: &str, contents: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.root.join(name);
        fs::write(&path, contents).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
        Ok(path)
    }

    /// `{"manifest": ..., "payload": ...}`, pretty-printed.
    pub fn write_json<T: Serialize>(&self, name: &str, manifest: &RunManifest, payload: &T) -> Result<PathBuf, CliError> {
        #[derive(Serialize)]
        struct Envelope<'a, T> {
            manifest: &'a RunManifest,
            payload: &'a T,
        }
        let mut text = serde_json::to_string_pretty(&Envelope { manifest, payload })
            .map_err(|e| CliError::Other(format!("serialization failed: {e}")))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// CSV with a leading `# manifest: {...}` line.
    pub fn write_csv(&self, name: &str, manifest: &RunManifest, header: &[&str], rows: &[Vec<String>]) -> Result<PathBuf, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header).map_err(|e| CliError::Other(e.to_string()))?;
        for r in rows {
            w.write_record(r).map_err(|e| CliError::Other(e.to_string()))?;
        }
        let body = w.into_inner().map_err(|e| CliError::Other(e.to_string()))?;
        let mut out = format!("# manifest: {}\n", serde_json::to_string(manifest).expect("manifest serializes")).into_bytes();
        out.extend_from_slice(&body);
        self.write(name, &out)
    }
}

/// Shortest round-trip form of a float for CSV cells (exponent form for
/// very small or large values).
pub fn cell(x: f64) -> String {
    format!("{x:?}")
}
