use serde::{Deserialize, Serialize};

use super::record::StepRecord;
use crate::controller::Phase;
use crate::estimator::DimensionSchedule;

/// Exponent `delta` in the tracking-regret normalisation `n^delta p_n`.
pub const REGRET_DELTA: f64 = 0.95;

pub const CHECKPOINTS: [usize; 4] = [1_000, 10_000, 50_000, 100_000];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackingCheckpoint {
    pub n: usize,
    pub cum_track_err: f64,
    pub p_n: usize,
    /// `cum_track_err(n) / (n^delta p_n)`.
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    /// `J_n`, the mean squared tracking error.
    pub j_n: f64,
    pub cum_track_err: f64,
    pub cum_regret: f64,
    pub sigma_switches: usize,
    pub tau_switches: usize,
    pub sigma_switches_second_half: usize,
    pub first_decile_mse: f64,
    pub last_decile_mse: f64,
    /// Mean `|y - y*|` over the last decile.
    pub last_decile_mean_abs_err: f64,
    pub checkpoints: Vec<TrackingCheckpoint>,
}

/// Mean squared tracking error over rows `lo .. hi`.
pub fn window_mse(records: &[StepRecord], lo: usize, hi: usize) -> f64 {
    let w = &records[lo..hi];
    w.iter().map(|r| (r.y_star - r.y).powi(2)).sum::<f64>() / w.len().max(1) as f64
}

/// Tracking-regret ratio at horizon `n`.
pub fn regret_ratio(records: &[StepRecord], n: usize, dims: &DimensionSchedule) -> f64 {
    let p = dims.dimension_at(n);
    records[n - 1].cum_track_err / ((n as f64).powf(REGRET_DELTA) * p as f64)
}

/// `None` for an empty record set.
pub fn summarize(records: &[StepRecord], dims: &DimensionSchedule) -> Option<Summary> {
    let last = records.last()?;
    let n = records.len();
    let mut sigma = 0;
    let mut tau = 0;
    let mut sigma_late = 0;
    let mut prev = Phase::Feedback;
    for r in records {
        if r.phase != prev {
            match r.phase {
                Phase::Excitation => {
                    sigma += 1;
                    if r.t >= n / 2 {
                        sigma_late += 1;
                    }
                }
                Phase::Feedback => tau += 1,
            }
            prev = r.phase;
        }
    }
    let decile = (n / 10).max(1);
    let tail = &records[n - decile..];
    let mut checkpoints: Vec<usize> = CHECKPOINTS.iter().copied().filter(|c| *c < n).collect();
    checkpoints.push(n);
    Some(Summary {
        n,
        j_n: last.cum_track_err / n as f64,
        cum_track_err: last.cum_track_err,
        cum_regret: last.cum_regret,
        sigma_switches: sigma,
        tau_switches: tau,
        sigma_switches_second_half: sigma_late,
        first_decile_mse: window_mse(records, 0, decile),
        last_decile_mse: window_mse(records, n - decile, n),
        last_decile_mean_abs_err: tail.iter().map(|r| (r.y - r.y_star).abs()).sum::<f64>()
            / decile as f64,
        checkpoints: checkpoints
            .into_iter()
            .map(|c| TrackingCheckpoint {
                n: c,
                cum_track_err: records[c - 1].cum_track_err,
                p_n: dims.dimension_at(c),
                ratio: regret_ratio(records, c, dims),
            })
            .collect(),
    })
}
