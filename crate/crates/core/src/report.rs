//! CSV artifacts with a provenance header.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Hex SHA-256 of a canonical configuration string.
pub fn config_hash(config: &str) -> String {
    let digest = Sha256::digest(config.as_bytes());
    let mut out = String::with_capacity(64);
    for b in digest.iter() {
        write!(out, "{b:02x}").expect("writing to a string");
    }
    out
}

/// Comment lines naming the library version, configuration hash and seed.
pub fn provenance_header(config: &str, seed: u64) -> String {
    format!("# metriclab {VERSION}\n# config_sha256 {}\n# seed {seed}\n", config_hash(config))
}

/// A named CSV file, header included.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

impl Artifact {
    pub fn write_to(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(&self.name);
        std::fs::write(&path, &self.contents).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Ok(path)
    }
}

/// Builds an artifact whose body is produced by `body`.
pub fn csv_artifact(
    name: &str,
    config: &str,
    seed: u64,
    body: impl FnOnce(&mut Vec<u8>) -> Result<()>,
) -> Result<Artifact> {
    let mut buf = provenance_header(config, seed).into_bytes();
    body(&mut buf)?;
    let contents = String::from_utf8(buf).map_err(|e| Error::Io(e.to_string()))?;
    Ok(Artifact { name: name.to_string(), contents })
}
