//! Result rows and their CSV form.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::HarnessError;

/// One `(grid cell, seed)` outcome. Field order is the CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub task: String,
    pub strategy: String,
    pub budget: usize,
    pub retrieval: String,
    pub feedback: String,
    pub seed: u64,
    pub success: bool,
    pub best_reward: f64,
    pub nodes_expanded: usize,
    pub wall_time_s: f64,
}

pub fn write_csv(rows: &[ResultRow]) -> Result<Vec<u8>, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner()
        .map_err(|e| HarnessError::Io(std::io::Error::other(e.to_string())))
}

pub fn read_csv(bytes: &[u8]) -> Result<Vec<ResultRow>, HarnessError> {
    csv::Reader::from_reader(bytes)
        .deserialize()
        .collect::<Result<Vec<ResultRow>, _>>()
        .map_err(|e| HarnessError::MalformedCsv(e.to_string()))
}

pub fn read_csv_file(path: &Path) -> Result<Vec<ResultRow>, HarnessError> {
    read_csv(&std::fs::read(path)?)
}
