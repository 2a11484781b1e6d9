use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// Collects a run's output files and records their digests.
pub struct Output {
    dir: PathBuf,
    files: BTreeMap<String, String>,
}

#[derive(Serialize)]
struct Manifest<'a, C: Serialize> {
    tool: &'static str,
    version: &'static str,
    core_version: &'static str,
    command: &'a str,
    config: &'a C,
    files: &'a BTreeMap<String, String>,
}

impl Output {
    pub fn create(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Output {
            dir: dir.to_path_buf(),
            files: BTreeMap::new(),
        })
    }

    /// Writes `bytes` to `rel` (forward-slash separated) under the output
    /// directory.
    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> CliResult<()> {
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.files
            .insert(rel.to_string(), hex::encode(Sha256::digest(bytes)));
        Ok(())
    }

    pub fn write_json(&mut self, rel: &str, value: &impl Serialize) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(value).expect("serializable");
        text.push('\n');
        self.write(rel, text.as_bytes())
    }

    /// One JSON document per line.
    pub fn write_lines<T: Serialize>(&mut self, rel: &str, values: &[T]) -> CliResult<()> {
        let mut text = String::new();
        for v in values {
            text.push_str(&serde_json::to_string(v).expect("serializable"));
            text.push('\n');
        }
        self.write(rel, text.as_bytes())
    }

    /// Writes the config echo, then a manifest covering every file.
    pub fn finish(mut self, command: &str, config: &impl Serialize) -> CliResult<PathBuf> {
        self.write_json("config.json", config)?;
        let manifest = Manifest {
            tool: "cfx",
            version: env!("CARGO_PKG_VERSION"),
            core_version: cfx_core::VERSION,
            command,
            config,
            files: &self.files,
        };
        let path = self.dir.join("manifest.json");
        let mut text = serde_json::to_string_pretty(&manifest).expect("serializable");
        text.push('\n');
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}
