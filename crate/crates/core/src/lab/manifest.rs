use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::ExperimentConfig;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    /// Relative to the run directory.
    pub path: PathBuf,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub name: String,
    pub seconds: f64,
    pub ok: bool,
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub config: ExperimentConfig,
    pub stages: Vec<Stage>,
    /// Measured quantities and bound constants the checks were made against.
    pub measured: BTreeMap<String, f64>,
    pub artifacts: Vec<Artifact>,
}

#[derive(Debug, thiserror::Error)]
pub enum ManifestError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("{path}: digest {found} does not match recorded {expected}")]
    Digest {
        path: PathBuf,
        expected: String,
        found: String,
    },
}

pub fn sha256_file(path: &Path) -> std::io::Result<(String, u64)> {
    let mut file = fs::File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    let mut total = 0u64;
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
        total += n as u64;
    }
    Ok((hex::encode(hasher.finalize()), total))
}

impl RunManifest {
    pub fn new(config: ExperimentConfig) -> Self {
        RunManifest {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            stages: Vec::new(),
            measured: BTreeMap::new(),
            artifacts: Vec::new(),
        }
    }

    pub fn stage(&mut self, name: &str, seconds: f64, ok: bool, note: Option<String>) {
        self.stages.push(Stage {
            name: name.to_string(),
            seconds,
            ok,
            note,
        });
    }

    pub fn measure(&mut self, name: &str, value: f64) {
        self.measured.insert(name.to_string(), value);
    }

    /// Records the digest of `dir/rel`.
    pub fn add_artifact(&mut self, dir: &Path, rel: impl Into<PathBuf>) -> std::io::Result<()> {
        let path = rel.into();
        let (sha256, bytes) = sha256_file(&dir.join(&path))?;
        self.artifacts.retain(|a| a.path != path);
        self.artifacts.push(Artifact {
            path,
            sha256,
            bytes,
        });
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<(), ManifestError> {
        let file = fs::File::create(dir.join(MANIFEST_FILE))?;
        serde_json::to_writer_pretty(file, self)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, ManifestError> {
        Ok(serde_json::from_reader(fs::File::open(
            dir.join(MANIFEST_FILE),
        )?)?)
    }

    /// Re-hashes every artifact.
    pub fn verify(&self, dir: &Path) -> Result<(), ManifestError> {
        for a in &self.artifacts {
            let (found, _) = sha256_file(&dir.join(&a.path))?;
            if found != a.sha256 {
                return Err(ManifestError::Digest {
                    path: a.path.clone(),
                    expected: a.sha256.clone(),
                    found,
                });
            }
        }
        Ok(())
    }
}
