use std::path::{Path, PathBuf};

use serde::Serialize;

use super::record::write_records_csv;
use super::summary::{summarize, Summary};
use crate::controller::SwitchEvent;
use crate::error::{Error, Result};
use crate::estimator::DimensionSchedule;

use super::closed_loop::ClosedLoopRun;

#[derive(Clone, Debug, Serialize)]
pub struct RunSummary<'a> {
    pub seed: u64,
    pub u0s_magnitude: f64,
    pub switch_log: &'a [SwitchEvent],
    #[serde(flatten)]
    pub summary: Summary,
}

/// Writes `run_<seed>.csv` and `run_<seed>.summary.json` into `dir`.
pub fn write_run(
    dir: &Path,
    seed: u64,
    run: &ClosedLoopRun,
    dims: &DimensionSchedule,
) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir)?;
    let csv_path = dir.join(format!("run_{seed}.csv"));
    let json_path = dir.join(format!("run_{seed}.summary.json"));
    write_records_csv(&csv_path, &run.records)?;
    let summary = summarize(&run.records, dims)
        .ok_or_else(|| Error::Domain("empty run".into()))?;
    let doc = RunSummary {
        seed,
        u0s_magnitude: run.u0s_magnitude,
        switch_log: &run.switch_log,
        summary,
    };
    std::fs::write(&json_path, serde_json::to_string_pretty(&doc)?)?;
    Ok((csv_path, json_path))
}
