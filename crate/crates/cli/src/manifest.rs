use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use ggr_core::{GgrError, Result, RunConfig};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Everything needed to rerun a stage: no timestamps, so reruns with the
/// same inputs produce the same file.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub config: String,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| GgrError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn collect_files(path: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    if path.is_dir() {
        let mut entries: Vec<PathBuf> = fs::read_dir(path)
            .map_err(|e| GgrError::io(path, e))?
            .map(|e| e.map(|e| e.path()).map_err(|e| GgrError::io(path, e)))
            .collect::<Result<_>>()?;
        entries.sort();
        for e in entries {
            collect_files(&e, out)?;
        }
    } else if path.is_file() {
        out.push(path.to_path_buf());
    }
    Ok(())
}

/// Hashes of every file under each path; directories are walked in sorted order.
pub fn hash_paths<'a>(paths: impl IntoIterator<Item = &'a Path>) -> Result<BTreeMap<String, String>> {
    let mut files = Vec::new();
    for p in paths {
        collect_files(p, &mut files)?;
    }
    files.into_iter().map(|f| Ok((f.display().to_string(), sha256_file(&f)?))).collect()
}

pub fn write(out: &Path, command: &str, config: &RunConfig, inputs: &[&Path], outputs: &[&Path]) -> Result<()> {
    let text = config.to_toml();
    let manifest = Manifest {
        command: command.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: config.seed,
        config: text.clone(),
        inputs: hash_paths(inputs.iter().copied())?,
        outputs: hash_paths(outputs.iter().copied())?,
    };
    let cfg_path = out.join(format!("{command}.config.toml"));
    fs::write(&cfg_path, text).map_err(|e| GgrError::io(&cfg_path, e))?;
    let path = out.join(format!("{command}.manifest.json"));
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| GgrError::format("manifest", e.to_string()))?;
    fs::write(&path, json + "\n").map_err(|e| GgrError::io(&path, e))?;
    log::info!("wrote {}", path.display());
    Ok(())
}
