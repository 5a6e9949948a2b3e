//! Run manifests: each command writes the full config it ran with next
//! to its outputs, so any run can be replayed later. Replays regenerate
//! every result file; only wall-clock fields differ.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use crate::config::{DiagnoseConfig, GanToyConfig, MlpConfig, RegressConfig, SpiralConfig};
use crate::emit::ResultRow;
use crate::{diagnose, ganbench, mlpbench, regress, spiralgen};

pub const MANIFEST_VERSION: u32 = 1;

/// A command with its fully resolved configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "command", content = "config", rename_all = "kebab-case")]
pub enum Job {
    Regress(RegressConfig),
    TrainMlp(MlpConfig),
    Diagnose(DiagnoseConfig),
    GanToy(GanToyConfig),
    SpiralGen(SpiralConfig),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub created_unix: u64,
    #[serde(flatten)]
    pub job: Job,
}

fn now_unix() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

pub fn write(out_dir: &Path, job: &Job) -> Result<()> {
    let manifest = Manifest {
        version: MANIFEST_VERSION,
        created_unix: now_unix(),
        job: job.clone(),
    };
    let text = serde_json::to_string_pretty(&manifest).context("serializing manifest")?;
    let path = out_dir.join("manifest.json");
    std::fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

pub fn read(path: &Path) -> Result<Manifest> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading manifest {}", path.display()))?;
    let manifest: Manifest = serde_json::from_str(&text)
        .with_context(|| format!("parsing manifest {}", path.display()))?;
    if manifest.version != MANIFEST_VERSION {
        bail!(
            "manifest version {} is not supported (expected {})",
            manifest.version,
            MANIFEST_VERSION
        );
    }
    Ok(manifest)
}

/// Runs a job into `out_dir`, writing its outputs and a fresh manifest.
/// Returns the result rows for exit-status inspection.
pub fn execute(job: &Job, out_dir: &Path) -> Result<Vec<ResultRow>> {
    let rows = match job {
        Job::Regress(cfg) => regress::run(cfg, out_dir)?.rows,
        Job::TrainMlp(cfg) => mlpbench::run(cfg, out_dir)?.rows,
        Job::Diagnose(cfg) => diagnose::run(cfg, out_dir)?.rows,
        Job::GanToy(cfg) => ganbench::run(cfg, out_dir)?.rows,
        Job::SpiralGen(cfg) => spiralgen::run(cfg, out_dir)?,
    };
    write(out_dir, job)?;
    Ok(rows)
}
