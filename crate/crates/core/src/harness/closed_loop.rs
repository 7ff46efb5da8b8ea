use nalgebra::DVector;

use super::config::ExperimentConfig;
use super::record::StepRecord;
use super::seeds::{substream, DITHER_STREAM, NOISE_STREAM};
use super::LAMBDA_SAMPLE_EVERY;
use crate::controller::{ControllerState, Dither, Phase, SwitchEvent};
use crate::error::{Error, Result};
use crate::estimator::{regret_term, EstimatorState};
use crate::lti::{binary_sensor, impulse_response_auto};
use crate::reference::generate;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ControlPolicy {
    /// The switching adaptive controller.
    #[default]
    Adaptive,
    /// Certainty equivalence with the true impulse response.
    Oracle,
}

#[derive(Clone, Debug)]
pub struct ClosedLoopRun {
    pub records: Vec<StepRecord>,
    pub switch_log: Vec<SwitchEvent>,
    pub u0s_magnitude: f64,
    pub final_theta: DVector<f64>,
}

pub fn run_closed_loop(cfg: &ExperimentConfig) -> Result<ClosedLoopRun> {
    run_closed_loop_with(cfg, ControlPolicy::Adaptive)
}

pub fn run_closed_loop_with(cfg: &ExperimentConfig, policy: ControlPolicy) -> Result<ClosedLoopRun> {
    cfg.validate()?;
    let horizon = cfg.horizon;
    let mut plant = cfg.plant.build()?;
    let noise = cfg.noise.build()?;
    let thresholds = cfg.thresholds.resolve(horizon)?;
    let y_star = generate(&cfg.reference, horizon)?;
    let mut noise_rng = substream(cfg.seed, NOISE_STREAM);
    let dither = Dither::new(substream(cfg.dither_seed.unwrap_or(cfg.seed), DITHER_STREAM));

    let mut est = EstimatorState::new(cfg.estimator.into(), noise.clone())?;
    let mut ctrl = ControllerState::new(cfg.controller, dither, cfg.estimator.p0_scale)?;
    let truth = match policy {
        ControlPolicy::Oracle => {
            let (a, b) = cfg.plant.polynomials()?;
            Some(impulse_response_auto(&a, &b)?)
        }
        ControlPolicy::Adaptive => None,
    };

    let mut records = Vec::with_capacity(horizon);
    let mut applied: Vec<f64> = Vec::with_capacity(horizon);
    let (mut cum_regret, mut cum_track) = (0.0, 0.0);
    for t in 0..horizon {
        let target = y_star[t];
        let p_t = est.dimension();
        let d_t = est.radius(t);
        let (u, phase) = match &truth {
            None => {
                let out = ctrl.control_step(&mut est, target, t).map_err(|e| e.at_step(t))?;
                (out.u, out.phase)
            }
            Some(g) => {
                let mut acc = target;
                for i in 2..=g.len().min(t + 1) {
                    acc -= g.coeffs[i - 1] * applied[t + 1 - i];
                }
                (acc / g.g(1), Phase::Feedback)
            }
        };
        if !u.is_finite() {
            return Err(Error::Domain(format!("non-finite input at step {t}")));
        }
        applied.push(u);
        let y_hat = est.predict(u);
        let w = noise.sample(&mut noise_rng);
        let (y, s) = if cfg.process_noise {
            let y = plant.step_with_disturbance(u, w);
            (y, binary_sensor(y, 0.0, thresholds[t]))
        } else {
            let y = plant.step(u);
            (y, binary_sensor(y, w, thresholds[t]))
        };
        let diag = est
            .step(t, u, thresholds[t], s)
            .map_err(|e| e.at_step(t))?;
        cum_regret += regret_term(y, y_hat);
        cum_track += (target - y).powi(2);
        let lambda_min = if truth.is_none() && (t + 1) % LAMBDA_SAMPLE_EVERY == 0 {
            Some(ctrl.lambda_min())
        } else {
            None
        };
        let rec = StepRecord {
            t,
            y_star: target,
            y,
            u,
            s: s as u8,
            phase,
            p_t,
            d_t,
            beta_t: diag.beta,
            lambda_min,
            cum_regret,
            cum_track_err: cum_track,
        };
        if !rec.is_finite() {
            return Err(Error::Domain(format!("non-finite record at step {t}")));
        }
        records.push(rec);
    }
    Ok(ClosedLoopRun {
        records,
        switch_log: ctrl.switch_log().to_vec(),
        u0s_magnitude: ctrl.u0s_magnitude(),
        final_theta: est.theta().clone(),
    })
}
