//! Output directory access with hashing of everything read and written.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const RUN_LOG: &str = "run_manifest.jsonl";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Serialize)]
struct RunLine<'a> {
    command: &'a str,
    version: &'a str,
    config_sha256: &'a str,
    seed: u64,
    inputs: &'a BTreeMap<String, String>,
    outputs: &'a BTreeMap<String, String>,
}

pub struct Run {
    pub out: PathBuf,
    command: String,
    config_hash: String,
    seed: u64,
    inputs: Mutex<BTreeMap<String, String>>,
    outputs: Mutex<BTreeMap<String, String>>,
}

impl Run {
    pub fn new(out: PathBuf, command: &str, config_hash: String, seed: u64) -> Self {
        Self {
            out,
            command: command.to_string(),
            config_hash,
            seed,
            inputs: Mutex::new(BTreeMap::new()),
            outputs: Mutex::new(BTreeMap::new()),
        }
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.out.join(rel)
    }

    fn key(&self, path: &Path) -> String {
        path.strip_prefix(&self.out).unwrap_or(path).display().to_string()
    }

    pub fn read(&self, path: &Path) -> Result<Vec<u8>, CliError> {
        let bytes = fs::read(path).map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
        self.inputs.lock().unwrap().insert(self.key(path), sha256_hex(&bytes));
        Ok(bytes)
    }

    pub fn read_string(&self, path: &Path) -> Result<String, CliError> {
        String::from_utf8(self.read(path)?).map_err(|_| CliError::Data(format!("{} is not UTF-8", path.display())))
    }

    /// Writes `rel` under the output directory.
    pub fn write(&self, rel: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.path(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(&path, bytes)?;
        self.outputs.lock().unwrap().insert(rel.to_string(), sha256_hex(bytes));
        Ok(path)
    }

    pub fn finish(self) -> Result<(), CliError> {
        let inputs = self.inputs.into_inner().unwrap();
        let outputs = self.outputs.into_inner().unwrap();
        let line = RunLine {
            command: &self.command,
            version: env!("CARGO_PKG_VERSION"),
            config_sha256: &self.config_hash,
            seed: self.seed,
            inputs: &inputs,
            outputs: &outputs,
        };
        fs::create_dir_all(&self.out)?;
        let mut f = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(self.out.join(RUN_LOG))?;
        writeln!(f, "{}", serde_json::to_string(&line)?)?;
        Ok(())
    }
}
