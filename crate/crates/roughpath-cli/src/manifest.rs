//! Run manifests: the full configuration snapshot plus hashes of every
//! input, so any run can be replayed and byte-compared.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use roughpath::error::{Error, Result};

use crate::spec::{execute, RunSpec};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Full resolved configuration; replaying it reproduces the outputs.
    pub spec: RunSpec,
    pub seed: u64,
    pub grids: serde_json::Value,
    /// Hex digest over the canonical spec JSON and all input file bytes.
    pub inputs_hash: String,
    pub outputs: Vec<String>,
    pub duration_ms: u128,
}

pub fn inputs_hash(spec: &RunSpec) -> Result<String> {
    let mut hasher = Sha256::new();
    hasher.update(serde_json::to_string(spec).map_err(|e| Error::Parse(e.to_string()))?);
    for file in spec.input_files() {
        let bytes = std::fs::read(&file)?;
        hasher.update(&bytes);
    }
    Ok(format!("{:x}", hasher.finalize()))
}

/// Executes the run configuration and writes outputs plus `manifest.json` under
/// `out_dir`. Returns the manifest.
pub fn run_and_write(spec: &RunSpec, out_dir: &Path) -> Result<RunManifest> {
    let start = std::time::Instant::now();
    let hash = inputs_hash(spec)?;
    let outputs = execute(spec)?;
    std::fs::create_dir_all(out_dir)?;
    let mut names = Vec::with_capacity(outputs.len());
    for (name, contents) in &outputs {
        std::fs::write(out_dir.join(name), contents)?;
        names.push(name.clone());
    }
    let manifest = RunManifest {
        command: spec.command().to_string(),
        spec: spec.clone(),
        seed: spec.seed(),
        grids: spec.grid_summary(),
        inputs_hash: hash,
        outputs: names,
        duration_ms: start.elapsed().as_millis(),
    };
    let text =
        serde_json::to_string_pretty(&manifest).map_err(|e| Error::Parse(e.to_string()))?;
    std::fs::write(out_dir.join("manifest.json"), text)?;
    Ok(manifest)
}

pub fn load(path: &Path) -> Result<RunManifest> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("bad manifest: {e}")))
}

/// Outcome of a replay comparison.
pub enum ReplayOutcome {
    Match,
    /// File name, row, column, stored cell, replayed cell.
    Mismatch(String, usize, usize, String, String),
}

/// Replays the manifest's run and byte-compares each listed output
/// against the stored files next to the manifest.
pub fn reproduce(manifest_path: &Path) -> Result<ReplayOutcome> {
    let manifest = load(manifest_path)?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));

    // inputs must still be present and unchanged for a meaningful replay
    let hash = inputs_hash(&manifest.spec)?;
    if hash != manifest.inputs_hash {
        return Ok(ReplayOutcome::Mismatch(
            "inputs".to_string(),
            0,
            0,
            manifest.inputs_hash.clone(),
            hash,
        ));
    }

    let outputs = execute(&manifest.spec)?;
    for (name, replayed) in &outputs {
        let stored_path: PathBuf = dir.join(name);
        let stored = std::fs::read_to_string(&stored_path)?;
        if &stored != replayed {
            let (row, col, old, new) = first_differing_cell(&stored, replayed);
            return Ok(ReplayOutcome::Mismatch(name.clone(), row, col, old, new));
        }
    }
    Ok(ReplayOutcome::Match)
}

fn first_differing_cell(stored: &str, replayed: &str) -> (usize, usize, String, String) {
    for (row, (a, b)) in stored.lines().zip(replayed.lines()).enumerate() {
        if a == b {
            continue;
        }
        for (col, (x, y)) in a.split(',').zip(b.split(',')).enumerate() {
            if x != y {
                return (row, col, x.to_string(), y.to_string());
            }
        }
        return (row, a.split(',').count().min(b.split(',').count()), String::new(), String::new());
    }
    let rows = stored.lines().count().min(replayed.lines().count());
    (rows, 0, String::from("<missing>"), String::from("<extra>"))
}
