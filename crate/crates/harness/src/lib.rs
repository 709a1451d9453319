//! Experiment driver for the trajectory search engine: seed sweeps over
//! strategy, budget and ablation grids, CSV results, success-rate tables,
//! scaling-curve plots and tree-log replay.

pub mod config;
pub mod experiment;
pub mod plot;
pub mod replay;
pub mod results;
pub mod summary;

use std::path::{Path, PathBuf};

use thiserror::Error;

use sail_core::archive::ArchiveError;
use sail_core::policy::PolicyError;
use sail_core::search::to_json_lines;
use sail_core::sim::SimError;

pub use config::{ConfigError, ExperimentConfig};
pub use experiment::{ablation_cells, run_cells, scaling_cells, Cell, RunOutput};
pub use results::ResultRow;
pub use summary::{summarize, Summary};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed results csv: {0}")]
    MalformedCsv(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("malformed tree log: {0}")]
    MalformedLog(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Archive(#[from] ArchiveError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

#[derive(Debug, Clone)]
pub struct WrittenOutputs {
    pub csv: PathBuf,
    pub summary_text: PathBuf,
    pub summary_json: PathBuf,
    pub tree_log: Option<PathBuf>,
    pub aborted: Option<PathBuf>,
}

/// Writes `<name>.csv`, `<name>_summary.txt`, `<name>_summary.json`, the
/// tree log and, if any seed aborted, `<name>_aborted.txt` into `dir`.
pub fn write_outputs(dir: &Path, name: &str, out: &RunOutput) -> Result<WrittenOutputs, HarnessError> {
    std::fs::create_dir_all(dir)?;
    let csv = dir.join(format!("{name}.csv"));
    std::fs::write(&csv, results::write_csv(&out.rows)?)?;
    let summary = summarize(&out.rows);
    let summary_text = dir.join(format!("{name}_summary.txt"));
    std::fs::write(&summary_text, summary.to_text())?;
    let summary_json = dir.join(format!("{name}_summary.json"));
    std::fs::write(&summary_json, summary.to_json())?;
    let tree_log = if out.tree_log.is_empty() {
        None
    } else {
        let p = dir.join(format!("{name}_tree_log.jsonl"));
        std::fs::write(&p, to_json_lines(&out.tree_log))?;
        Some(p)
    };
    let aborted = if out.aborted.is_empty() {
        None
    } else {
        let p = dir.join(format!("{name}_aborted.txt"));
        let text: String = out
            .aborted
            .iter()
            .map(|a| format!("{} seed {}: {}\n", a.cell, a.seed, a.error))
            .collect();
        std::fs::write(&p, text)?;
        Some(p)
    };
    Ok(WrittenOutputs {
        csv,
        summary_text,
        summary_json,
        tree_log,
        aborted,
    })
}
