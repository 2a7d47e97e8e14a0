//! Run manifests, input digests and the values JSON file.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use tsdshap_core::{Method, ValuationResult};

pub type Digests = BTreeMap<String, String>;

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// SHA-256 of each named input file.
pub fn digest_inputs<'a>(inputs: impl IntoIterator<Item = (&'a str, &'a Path)>) -> Result<Digests> {
    inputs
        .into_iter()
        .map(|(role, path)| Ok((role.to_string(), sha256_file(path)?)))
        .collect()
}

/// Everything needed to rerun a command against the same input files.
#[derive(Debug, Serialize)]
pub struct RunManifest<'a> {
    pub command: &'a str,
    pub parameters: Value,
    pub input_digests: &'a Digests,
    pub seed: Option<u64>,
    pub tool_version: &'static str,
}

impl<'a> RunManifest<'a> {
    pub fn new(
        command: &'a str,
        parameters: Value,
        input_digests: &'a Digests,
        seed: Option<u64>,
    ) -> Self {
        Self {
            command,
            parameters,
            input_digests,
            seed,
            tool_version: env!("CARGO_PKG_VERSION"),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }
}

/// `<primary>.manifest.json` next to a file output.
pub fn manifest_path_for(primary: &Path) -> PathBuf {
    let mut name = primary.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    primary.with_file_name(name)
}

/// On-disk valuation result. Key order is fixed by field order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValuesFile {
    pub method: Method,
    pub values: Vec<f64>,
    pub seed: u64,
    pub config: Value,
    pub input_digests: Digests,
}

impl ValuesFile {
    pub fn new(result: ValuationResult, input_digests: Digests) -> Self {
        Self {
            method: result.method,
            values: result.values,
            seed: result.seed,
            config: result.config_echo,
            input_digests,
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn into_result(self) -> Result<ValuationResult> {
        Ok(ValuationResult::new(
            self.values,
            self.method,
            self.config,
            self.seed,
        )?)
    }
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
