use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::config::hex_digest;
use crate::error::{Error, Result};
use crate::io::sidecar_path;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: PathBuf,
    pub sha256: String,
    pub bytes: u64,
}

impl FileRecord {
    pub fn of(path: &Path) -> Result<Self> {
        let data = fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            sha256: hex_digest(&data),
            bytes: data.len() as u64,
        })
    }
}

/// Provenance record written next to the outputs of every run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: Option<PathBuf>,
    pub config_hash: String,
    /// Full parameter echo.
    pub config: String,
    pub seed: u64,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub module_versions: BTreeMap<String, String>,
    pub inputs: Vec<FileRecord>,
    pub outputs: Vec<FileRecord>,
}

pub fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

impl RunManifest {
    pub fn new(
        command: &str,
        config_path: Option<&Path>,
        config_hash: String,
        config: String,
        seed: u64,
    ) -> Self {
        let mut module_versions = BTreeMap::new();
        module_versions.insert(
            "dbt-recon".to_string(),
            env!("CARGO_PKG_VERSION").to_string(),
        );
        module_versions.insert(
            "file-format".to_string(),
            format!("{}+json", crate::io::DTYPE),
        );
        Self {
            command: command.to_string(),
            config_path: config_path.map(Path::to_path_buf),
            config_hash,
            config,
            seed,
            started_unix: unix_now(),
            finished_unix: 0.0,
            module_versions,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    /// Record a file and, for raw arrays, its sidecar.
    pub fn add_output(&mut self, path: &Path) -> Result<()> {
        self.outputs.push(FileRecord::of(path)?);
        let side = sidecar_path(path);
        if side != path && side.exists() {
            self.outputs.push(FileRecord::of(&side)?);
        }
        Ok(())
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(FileRecord::of(path)?);
        Ok(())
    }

    pub fn write(&mut self, path: &Path) -> Result<()> {
        self.finished_unix = unix_now();
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })
    }
}
