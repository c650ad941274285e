//! Per-run record of what went in and what came out.
//!
//! `digest` covers everything except `duration_secs`, so two identical runs
//! have identical digests.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{write_atomic, CliResult, WithContext};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    /// Path → sha256 of the file's bytes.
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub digest: String,
    pub duration_secs: f64,
}

#[derive(Serialize)]
struct Hashed<'a> {
    command: &'a str,
    config: &'a serde_json::Value,
    seed: Option<u64>,
    inputs: &'a BTreeMap<String, String>,
    outputs: &'a [String],
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let mut file = std::fs::File::open(path).context(|| path.display().to_string())?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf).context(|| path.display().to_string())?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(to_hex(&hasher.finalize()))
}

fn to_hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value, seed: Option<u64>) -> Self {
        Self {
            command: command.to_string(),
            config,
            seed,
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            digest: String::new(),
            duration_secs: 0.0,
        }
    }

    pub fn input(&mut self, path: &Path) -> CliResult<()> {
        self.inputs.insert(path.display().to_string(), sha256_file(path)?);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    pub fn content_digest(&self) -> String {
        let hashed = Hashed {
            command: &self.command,
            config: &self.config,
            seed: self.seed,
            inputs: &self.inputs,
            outputs: &self.outputs,
        };
        let bytes = serde_json::to_vec(&hashed).expect("plain data serialises");
        to_hex(&Sha256::digest(&bytes))
    }

    /// Inputs whose current contents no longer match the recorded hash.
    pub fn changed_inputs(&self) -> CliResult<Vec<String>> {
        let mut changed = Vec::new();
        for (path, hash) in &self.inputs {
            if sha256_file(Path::new(path))? != *hash {
                changed.push(path.clone());
            }
        }
        Ok(changed)
    }

    pub fn finish(mut self, started: Instant, path: &Path) -> CliResult<Self> {
        self.duration_secs = started.elapsed().as_secs_f64();
        self.digest = self.content_digest();
        let mut bytes = serde_json::to_vec_pretty(&self).expect("plain data serialises");
        bytes.push(b'\n');
        write_atomic(path, &bytes)?;
        Ok(self)
    }
}
