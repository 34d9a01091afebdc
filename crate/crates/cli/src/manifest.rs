use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::PipelineConfig;

/// Reproducibility record written next to every run's outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub tool_version: String,
    pub config_digest: String,
    pub seed: u64,
    /// Input file path -> SHA-256 of its bytes.
    pub inputs: BTreeMap<String, String>,
    pub config: serde_json::Value,
    pub started_at: String,
    pub finished_at: String,
}

pub fn manifest_name(command: &str) -> String {
    format!("run-{command}.manifest.json")
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

/// Open manifest; inputs are hashed as they are registered.
pub struct Recorder {
    manifest: RunManifest,
}

impl Recorder {
    pub fn start(command: &str, args: &[String], cfg: &PipelineConfig) -> Self {
        Self {
            manifest: RunManifest {
                command: command.to_string(),
                args: args.to_vec(),
                tool_version: vlcorpus::TOOL_VERSION.to_string(),
                config_digest: cfg.digest(),
                seed: cfg.seed,
                inputs: BTreeMap::new(),
                config: serde_json::to_value(cfg).expect("config serializes"),
                started_at: now(),
                finished_at: String::new(),
            },
        }
    }

    /// Hash a file, or every file below a directory.
    pub fn input(&mut self, path: &Path) -> std::io::Result<()> {
        let mut files = Vec::new();
        collect(path, &mut files)?;
        for f in files {
            let digest = hex::encode(Sha256::digest(std::fs::read(&f)?));
            self.manifest.inputs.insert(f.to_string_lossy().into_owned(), digest);
        }
        Ok(())
    }

    pub fn finish(mut self, dir: &Path) -> std::io::Result<PathBuf> {
        self.manifest.finished_at = now();
        std::fs::create_dir_all(dir)?;
        let path = dir.join(manifest_name(&self.manifest.command));
        std::fs::write(&path, serde_json::to_string_pretty(&self.manifest)? + "\n")?;
        Ok(path)
    }
}

fn collect(path: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
    if path.is_dir() {
        let mut entries: Vec<PathBuf> = std::fs::read_dir(path)?.map(|e| e.map(|e| e.path())).collect::<Result<_, _>>()?;
        entries.sort();
        for e in entries {
            let is_manifest = e.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.ends_with(".manifest.json"));
            if !is_manifest {
                collect(&e, out)?;
            }
        }
    } else if path.is_file() {
        out.push(path.to_path_buf());
    }
    Ok(())
}
