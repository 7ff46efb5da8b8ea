use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::seeds::{substream, DITHER_STREAM, NOISE_STREAM};
use crate::controller::Dither;
use crate::error::{Error, Result};
use crate::estimator::{lagged_gram, min_eigenvalue, regret_term, EstimatorState};
use crate::lti::{binary_sensor, impulse_response_auto};
use crate::reference::read_column;

pub const IDENTIFICATION_CHECKPOINTS: [usize; 3] = [1_000, 10_000, 50_000];

#[derive(Clone, Debug, PartialEq)]
pub enum InputPolicy {
    /// Rademacher inputs from the dither stream.
    Dither,
    /// Inputs read from a one-column file.
    File(PathBuf),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentificationCheckpoint {
    pub n: usize,
    pub p_n: usize,
    pub alpha_n: f64,
    /// `|theta_n(n) - [G_1 .. G_{p_n}]|`.
    pub error: f64,
    pub lambda_min: f64,
    pub cum_regret: f64,
    /// `sum R_k / (alpha_n^2 p_n^2 ln n)`.
    pub regret_ratio: f64,
    /// `|theta - G|^2 lambda_min / (alpha_n^2 p_n ln n)`.
    pub consistency_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentificationReport {
    pub checkpoints: Vec<IdentificationCheckpoint>,
    /// `(n, lambda_min(n))` at `n = 1000 * 2^j` up to the horizon.
    pub lambda_min_trajectory: Vec<(usize, f64)>,
    pub final_theta: Vec<f64>,
    pub truth: Vec<f64>,
}

/// Smallest eigenvalue of `P_0^{-1} + sum_{k<n} phi_k phi_k'` at dimension `p`.
fn lambda_min_at(inputs: &[f64], p: usize, p0_scale: f64) -> f64 {
    let mut m = lagged_gram(inputs, p);
    for i in 0..p {
        m[(i, i)] += 1.0 / p0_scale;
    }
    min_eigenvalue(m)
}

/// Runs the estimator alone on the open-loop plant.
pub fn run_identification(cfg: &ExperimentConfig, policy: &InputPolicy) -> Result<IdentificationReport> {
    cfg.validate()?;
    let horizon = cfg.horizon;
    let mut plant = cfg.plant.build()?;
    let (a, b) = cfg.plant.polynomials()?;
    let truth = impulse_response_auto(&a, &b)?;
    let noise = cfg.noise.build()?;
    let thresholds = cfg.thresholds.resolve(horizon)?;
    let mut noise_rng = substream(cfg.seed, NOISE_STREAM);
    let mut dither = Dither::new(substream(cfg.dither_seed.unwrap_or(cfg.seed), DITHER_STREAM));
    let file_inputs = match policy {
        InputPolicy::Dither => None,
        InputPolicy::File(path) => {
            let v = read_column(path)?;
            if v.len() < horizon {
                return Err(Error::Config(format!(
                    "{} holds {} inputs, horizon is {horizon}",
                    path.display(),
                    v.len()
                )));
            }
            Some(v)
        }
    };

    let mut est = EstimatorState::new(cfg.estimator.into(), noise.clone())?;
    let dims = *est.dimension_schedule();
    let mut marks: Vec<usize> = IDENTIFICATION_CHECKPOINTS
        .iter()
        .copied()
        .filter(|c| *c <= horizon)
        .collect();
    let mut traj_marks: Vec<usize> = std::iter::successors(Some(1000usize), |n| n.checked_mul(2))
        .take_while(|n| *n <= horizon)
        .collect();
    marks.sort_unstable();
    traj_marks.sort_unstable();

    let mut checkpoints = Vec::new();
    let mut trajectory = Vec::new();
    let mut cum_regret = 0.0;
    for t in 0..horizon {
        let u = match &file_inputs {
            Some(v) => v[t],
            None => dither.next_value(),
        };
        let y_hat = est.predict(u);
        let y = plant.step(u);
        let w = noise.sample(&mut noise_rng);
        let s = binary_sensor(y, w, thresholds[t]);
        est.step(t, u, thresholds[t], s).map_err(|e| e.at_step(t))?;
        cum_regret += regret_term(y, y_hat);

        let n = t + 1;
        if traj_marks.binary_search(&n).is_ok() {
            trajectory.push((n, lambda_min_at(est.inputs(), dims.dimension_at(n), est.p0_scale())));
        }
        if marks.binary_search(&n).is_ok() {
            let p_n = est.dimension();
            let theta = est.theta();
            let error = (0..p_n)
                .map(|i| (theta[i] - truth.g(i + 1)).powi(2))
                .sum::<f64>()
                .sqrt();
            let lambda = lambda_min_at(est.inputs(), p_n, est.p0_scale());
            let alpha = est.radius_schedule().alpha(n - 1);
            let ln_n = (n as f64).ln();
            let scale = alpha * alpha * p_n as f64 * ln_n;
            checkpoints.push(IdentificationCheckpoint {
                n,
                p_n,
                alpha_n: alpha,
                error,
                lambda_min: lambda,
                cum_regret,
                regret_ratio: cum_regret / (scale * p_n as f64),
                consistency_ratio: error * error * lambda / scale,
            });
        }
    }
    let p = est.dimension();
    Ok(IdentificationReport {
        checkpoints,
        lambda_min_trajectory: trajectory,
        final_theta: est.theta().as_slice().to_vec(),
        truth: (1..=p).map(|i| truth.g(i)).collect(),
    })
}
