use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::controller::Phase;
use crate::error::Result;

/// One closed-loop step. Row `t` holds the input `u_t`, the threshold in
/// force and the quantities it produced at time `t + 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    /// `y*_{t+1}`.
    pub y_star: f64,
    /// `y_{t+1}`.
    pub y: f64,
    pub u: f64,
    /// `s_{t+1}` as 0/1.
    pub s: u8,
    pub phase: Phase,
    pub p_t: usize,
    pub d_t: f64,
    pub beta_t: f64,
    /// Sampled every [`LAMBDA_SAMPLE_EVERY`](super::LAMBDA_SAMPLE_EVERY) steps.
    pub lambda_min: Option<f64>,
    pub cum_regret: f64,
    pub cum_track_err: f64,
}

impl StepRecord {
    pub fn is_finite(&self) -> bool {
        [
            self.y_star,
            self.y,
            self.u,
            self.d_t,
            self.beta_t,
            self.lambda_min.unwrap_or(0.0),
            self.cum_regret,
            self.cum_track_err,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

pub fn write_records<W: Write>(out: W, records: &[StepRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records<R: Read>(input: R) -> Result<Vec<StepRecord>> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for r in rdr.deserialize() {
        out.push(r?);
    }
    Ok(out)
}

pub fn write_records_csv(path: &Path, records: &[StepRecord]) -> Result<()> {
    let f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_records(f, records)
}

pub fn read_records_csv(path: &Path) -> Result<Vec<StepRecord>> {
    read_records(std::io::BufReader::new(std::fs::File::open(path)?))
}
