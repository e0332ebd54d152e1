use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;

pub const MANIFEST_NAME: &str = "manifest.json";

/// Record of a completed run. Written last, via rename, so its presence
/// marks the outputs it lists as complete.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub params: BTreeMap<String, Value>,
    pub seed: u64,
    pub outputs: Vec<String>,
    pub wall_time_ms: u64,
}

/// Collects outputs while a command runs.
pub struct Run {
    dir: PathBuf,
    command: &'static str,
    seed: u64,
    params: BTreeMap<String, Value>,
    outputs: Vec<String>,
    started: Instant,
}

impl Run {
    pub fn start(dir: &Path, command: &'static str, seed: u64) -> Result<Run> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Run {
            dir: dir.to_path_buf(),
            command,
            seed,
            params: BTreeMap::new(),
            outputs: Vec::new(),
            started: Instant::now(),
        })
    }

    pub fn param(&mut self, key: &str, value: impl Into<Value>) {
        self.params.insert(key.to_string(), value.into());
    }

    /// Creates `name` in the output directory and hands a buffered writer to `write`.
    pub fn emit(
        &mut self,
        name: &str,
        write: impl FnOnce(&mut std::io::BufWriter<fs::File>) -> std::io::Result<()>,
    ) -> Result<PathBuf> {
        let path = self.dir.join(name);
        let file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        let mut out = std::io::BufWriter::new(file);
        write(&mut out)
            .and_then(|_| std::io::Write::flush(&mut out))
            .with_context(|| format!("writing {}", path.display()))?;
        self.outputs.push(path.display().to_string());
        Ok(path)
    }

    pub fn finish(self) -> Result<PathBuf> {
        let manifest = RunManifest {
            command: self.command.to_string(),
            params: self.params,
            seed: self.seed,
            outputs: self.outputs,
            wall_time_ms: self.started.elapsed().as_millis() as u64,
        };
        let path = self.dir.join(MANIFEST_NAME);
        let tmp = self.dir.join(format!("{MANIFEST_NAME}.tmp"));
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(&tmp, text).with_context(|| format!("writing {}", tmp.display()))?;
        fs::rename(&tmp, &path).with_context(|| format!("renaming to {}", path.display()))?;
        Ok(path)
    }
}
