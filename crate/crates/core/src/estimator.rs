//! Growing-dimension projected recursive estimator for the impulse response
//! of a plant seen through a binary sensor.
//!
//! For a horizon `n` the estimator runs at the fixed dimension
//! `p_n = floor((ln n)^a)`. The recursion depends on `n` only through
//! `p_n`, so the incremental state is kept at the current `p` and, whenever
//! the schedule asks for a larger dimension, the whole logged history is
//! replayed from the initial values at the new dimension. The state after
//! step `k` is then exactly the estimate for horizon `k + 1`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{beta_gain, NoiseModel, RadiusSchedule};
use crate::projection::{project_unchecked, ProjectionProblem};

/// `p_n = floor((ln n)^a)`, clamped below at 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DimensionSchedule {
    a_exponent: f64,
}

impl DimensionSchedule {
    pub fn new(a_exponent: f64) -> Result<Self> {
        if !(a_exponent > 1.0 && a_exponent.is_finite()) {
            return Err(Error::Domain(format!("a must exceed 1, got {a_exponent}")));
        }
        Ok(Self { a_exponent })
    }

    pub fn a_exponent(&self) -> f64 {
        self.a_exponent
    }

    pub fn dimension_at(&self, n: usize) -> usize {
        dimension_at(self, n)
    }
}

pub fn dimension_at(sched: &DimensionSchedule, n: usize) -> usize {
    if n < 2 {
        return 1;
    }
    let p = (n as f64).ln().powf(sched.a_exponent).floor() as usize;
    p.max(1)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EpochMode {
    /// Recompute the full history at every dimension increase (exact).
    #[default]
    Replay,
    /// Append zero coordinates and fresh prior blocks (approximation).
    Zeropad,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimatorConfig {
    pub a_exponent: f64,
    pub alpha_exponent: f64,
    pub epoch_mode: EpochMode,
    /// `P_0 = p0_scale * I`.
    pub p0_scale: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            a_exponent: 2.0,
            alpha_exponent: 0.125,
            epoch_mode: EpochMode::Replay,
            p0_scale: 1.0,
        }
    }
}

/// `[u_k, u_{k-1}, .., u_{k-p+1}]` with zeros before time 0.
pub fn regressor(inputs: &[f64], k: usize, p: usize) -> Result<DVector<f64>> {
    if k >= inputs.len() {
        return Err(Error::Range {
            index: k,
            available: inputs.len(),
        });
    }
    Ok(DVector::from_fn(p, |i, _| if i <= k { inputs[k - i] } else { 0.0 }))
}

/// `s - 1 + F(c - phi' theta)`, evaluated through the survival function
/// when `s = 0` so the result stays inside `(-1, 1)`.
pub fn innovation(s_next: bool, c: f64, phi_dot_theta: f64, noise: &NoiseModel) -> f64 {
    let x = c - phi_dot_theta;
    if s_next {
        noise.cdf(x)
    } else {
        -noise.sf(x)
    }
}

pub fn regret_term(y_true: f64, y_hat: f64) -> f64 {
    (y_true - y_hat).powi(2)
}

/// What one recursion step did.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepDiagnostics {
    pub beta: f64,
    pub a: f64,
    pub innovation: f64,
    pub radius: f64,
    pub projected: bool,
}

/// One recursion at fixed dimension, in place.
#[allow(clippy::too_many_arguments)]
pub fn recursive_update(
    theta: &mut DVector<f64>,
    gain: &mut DMatrix<f64>,
    info: &mut DMatrix<f64>,
    phi: &DVector<f64>,
    beta: f64,
    c: f64,
    s_next: bool,
    radius: f64,
    noise: &NoiseModel,
) -> Result<StepDiagnostics> {
    let pred = phi.dot(theta);
    let e = innovation(s_next, c, pred, noise);
    let mut diag = StepDiagnostics {
        beta,
        a: 1.0,
        innovation: e,
        radius,
        projected: false,
    };
    if phi.iter().all(|v| *v == 0.0) {
        return Ok(diag);
    }
    let p_phi = &*gain * phi;
    let q = phi.dot(&p_phi);
    let a = 1.0 / (1.0 + beta * beta * q);
    diag.a = a;
    let raw = &*theta + &p_phi * (a * beta * e);
    sym_rank_one(gain, -beta * beta * a, &p_phi);
    sym_rank_one(info, beta * beta, phi);
    let proj = project_unchecked(
        ProjectionProblem {
            point: &raw,
            metric: info,
            radius,
        },
        Some(gain),
    )?;
    diag.projected = proj.pattern.is_some();
    *theta = proj.point;
    Ok(diag)
}

/// `m += c x x'`, written as `c (x_i x_j)` so that a symmetric `m` stays
/// exactly symmetric.
fn sym_rank_one(m: &mut DMatrix<f64>, c: f64, x: &DVector<f64>) {
    let n = x.len();
    let x = x.as_slice();
    for (j, col) in m.as_mut_slice().chunks_exact_mut(n).enumerate() {
        let xj = x[j];
        for (mij, xi) in col.iter_mut().zip(x) {
            *mij += c * (xi * xj);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Observation {
    c: f64,
    s: bool,
    beta: f64,
    radius: f64,
}

#[derive(Clone, Debug)]
pub struct EstimatorState {
    dims: DimensionSchedule,
    radii: RadiusSchedule,
    noise: NoiseModel,
    epoch_mode: EpochMode,
    p0_scale: f64,
    k: usize,
    p: usize,
    theta: DVector<f64>,
    gain: DMatrix<f64>,
    info: DMatrix<f64>,
    inputs: Vec<f64>,
    obs: Vec<Observation>,
    u_max: f64,
    last: Option<StepDiagnostics>,
    updates_applied: usize,
}

impl EstimatorState {
    pub fn new(cfg: EstimatorConfig, noise: NoiseModel) -> Result<Self> {
        if !(cfg.p0_scale > 0.0 && cfg.p0_scale.is_finite()) {
            return Err(Error::Domain(format!("P0 scale must be positive, got {}", cfg.p0_scale)));
        }
        let dims = DimensionSchedule::new(cfg.a_exponent)?;
        let radii = RadiusSchedule::new(cfg.alpha_exponent)?;
        let p = dims.dimension_at(0);
        Ok(Self {
            dims,
            radii,
            noise,
            epoch_mode: cfg.epoch_mode,
            p0_scale: cfg.p0_scale,
            k: 0,
            p,
            theta: DVector::zeros(p),
            gain: DMatrix::identity(p, p) * cfg.p0_scale,
            info: DMatrix::identity(p, p) / cfg.p0_scale,
            inputs: Vec::new(),
            obs: Vec::new(),
            u_max: 0.0,
            last: None,
            updates_applied: 0,
        })
    }

    /// Number of completed steps; the next call to [`step`](Self::step)
    /// must carry this time index.
    pub fn time(&self) -> usize {
        self.k
    }

    pub fn dimension(&self) -> usize {
        self.p
    }

    pub fn theta(&self) -> &DVector<f64> {
        &self.theta
    }

    /// `P_k`.
    pub fn gain_matrix(&self) -> &DMatrix<f64> {
        &self.gain
    }

    /// `P_k^{-1}`, maintained by rank-one updates.
    pub fn information(&self) -> &DMatrix<f64> {
        &self.info
    }

    pub fn inputs(&self) -> &[f64] {
        &self.inputs
    }

    pub fn u_max(&self) -> f64 {
        self.u_max
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    pub fn dimension_schedule(&self) -> &DimensionSchedule {
        &self.dims
    }

    pub fn radius_schedule(&self) -> &RadiusSchedule {
        &self.radii
    }

    pub fn p0_scale(&self) -> f64 {
        self.p0_scale
    }

    pub fn last_diagnostics(&self) -> Option<StepDiagnostics> {
        self.last
    }

    /// Total number of recursion updates performed, including replays.
    pub fn updates_applied(&self) -> usize {
        self.updates_applied
    }

    /// `d_k` from the run's schedule.
    pub fn radius(&mut self, k: usize) -> f64 {
        self.radii.radius_cached(&self.noise, k)
    }

    /// `beta_k` for the step about to be taken with input `u_k`.
    pub fn beta_for(&mut self, k: usize, u_k: f64) -> f64 {
        let d = self.radius(k);
        beta_gain(&self.noise, d, self.u_max.max(u_k.abs()))
    }

    /// Consumes `(u_k, c_k, s_{k+1})` for `k = self.time()`.
    pub fn step(&mut self, k: usize, u: f64, c: f64, s_next: bool) -> Result<StepDiagnostics> {
        if k != self.k {
            return Err(Error::Sequencing {
                expected: self.k,
                got: k,
            });
        }
        if !u.is_finite() || !c.is_finite() {
            return Err(Error::Domain(format!("non-finite input {u} or threshold {c}")));
        }
        let radius = self.radius(k);
        self.u_max = self.u_max.max(u.abs());
        let beta = beta_gain(&self.noise, radius, self.u_max);
        self.inputs.push(u);
        self.obs.push(Observation {
            c,
            s: s_next,
            beta,
            radius,
        });
        let target = self.dims.dimension_at(k + 1);
        if target > self.p {
            match self.epoch_mode {
                EpochMode::Replay => self.replay_through(target, k)?,
                EpochMode::Zeropad => self.zero_pad(target),
            }
        }
        let diag = self.apply(k)?;
        self.k = k + 1;
        self.last = Some(diag);
        Ok(diag)
    }

    /// Restarts from `theta_0 = 0`, `P_0 = p0_scale * I` at `p_new` and
    /// replays every completed step. `p_new` may equal the current
    /// dimension, in which case the state is reproduced exactly.
    pub fn epoch_replay(&mut self, p_new: usize) -> Result<()> {
        if p_new < self.p {
            return Err(Error::Domain(format!(
                "replay dimension {p_new} below current dimension {}",
                self.p
            )));
        }
        self.replay_through(p_new, self.k)
    }

    fn reset(&mut self, p: usize) {
        self.p = p;
        self.theta = DVector::zeros(p);
        self.gain = DMatrix::identity(p, p) * self.p0_scale;
        self.info = DMatrix::identity(p, p) / self.p0_scale;
    }

    /// Resets at `p_new` and re-applies steps `0 .. upto`.
    fn replay_through(&mut self, p_new: usize, upto: usize) -> Result<()> {
        self.reset(p_new);
        let mut last = None;
        for j in 0..upto {
            last = Some(self.apply(j)?);
        }
        if upto > 0 {
            self.last = last;
        }
        Ok(())
    }

    fn zero_pad(&mut self, p_new: usize) {
        let old = self.p;
        let theta = self.theta.clone().resize_vertically(p_new, 0.0);
        let mut gain = self.gain.clone().resize(p_new, p_new, 0.0);
        let mut info = self.info.clone().resize(p_new, p_new, 0.0);
        for i in old..p_new {
            gain[(i, i)] = self.p0_scale;
            info[(i, i)] = 1.0 / self.p0_scale;
        }
        self.p = p_new;
        self.theta = theta;
        self.gain = gain;
        self.info = info;
    }

    fn apply(&mut self, j: usize) -> Result<StepDiagnostics> {
        let ob = self.obs[j];
        let phi = regressor(&self.inputs, j, self.p)?;
        self.updates_applied += 1;
        recursive_update(
            &mut self.theta,
            &mut self.gain,
            &mut self.info,
            &phi,
            ob.beta,
            ob.c,
            ob.s,
            ob.radius,
            &self.noise,
        )
        .map_err(|e| e.at_step(j))
    }

    /// `phi_k' theta` with `phi_k` completed by the input about to be applied.
    pub fn predict(&self, u_k: f64) -> f64 {
        let mut acc = u_k * self.theta[0];
        let k = self.inputs.len();
        for i in 1..self.p.min(k + 1) {
            acc += self.theta[i] * self.inputs[k - i];
        }
        acc
    }

    /// Smallest eigenvalue of `P_0^{-1} + sum_{k<=t} phi_k(t) phi_k(t)'` at
    /// dimension `p_t`, from the logged inputs.
    pub fn info_matrix_lambda_min(&self, t: usize) -> Result<f64> {
        if t >= self.inputs.len() {
            return Err(Error::Range {
                index: t,
                available: self.inputs.len(),
            });
        }
        let p = self.dims.dimension_at(t);
        let mut m = lagged_gram(&self.inputs[..=t], p);
        for i in 0..p {
            m[(i, i)] += 1.0 / self.p0_scale;
        }
        Ok(min_eigenvalue(m))
    }
}

/// `sum_{k} phi_k phi_k'` over all `k` in `inputs`, at dimension `p`,
/// built from lagged inner products in `O(len * p)`.
pub fn lagged_gram(inputs: &[f64], p: usize) -> DMatrix<f64> {
    let n = inputs.len();
    let mut m = DMatrix::zeros(p, p);
    // entry (i, j), i <= j: sum_{m=0}^{n-1-j} u_{m + j - i} u_m
    for lag in 0..p {
        let mut prefix = Vec::with_capacity(n);
        let mut acc = 0.0;
        for idx in 0..n.saturating_sub(lag) {
            acc += inputs[idx + lag] * inputs[idx];
            prefix.push(acc);
        }
        for i in 0..(p - lag) {
            let j = i + lag;
            if j < n {
                let upper = n - 1 - j;
                let v = prefix[upper];
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
    }
    m
}

pub fn min_eigenvalue(m: DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m).eigenvalues.min()
}

/// `P_0^{-1} + sum_k phi_k phi_k'`, maintained one input at a time at a
/// dimension that can only grow.
#[derive(Clone, Debug)]
pub struct InformationMatrix {
    prior: f64,
    p: usize,
    gram: DMatrix<f64>,
    inputs: Vec<f64>,
}

impl InformationMatrix {
    pub fn new(p: usize, p0_scale: f64) -> Self {
        Self {
            prior: 1.0 / p0_scale,
            p,
            gram: DMatrix::zeros(p, p),
            inputs: Vec::new(),
        }
    }

    pub fn dimension(&self) -> usize {
        self.p
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn push(&mut self, u: f64) {
        self.inputs.push(u);
        let k = self.inputs.len() - 1;
        let phi = regressor(&self.inputs, k, self.p).expect("just pushed");
        sym_rank_one(&mut self.gram, 1.0, &phi);
    }

    pub fn grow(&mut self, p_new: usize) {
        if p_new <= self.p {
            return;
        }
        self.gram = lagged_gram(&self.inputs, p_new);
        self.p = p_new;
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let mut m = self.gram.clone();
        for i in 0..self.p {
            m[(i, i)] += self.prior;
        }
        m
    }

    pub fn lambda_min(&self) -> f64 {
        min_eigenvalue(self.matrix())
    }

    /// Whether `lambda_min >= threshold`, decided by a Cholesky test.
    pub fn lambda_min_at_least(&self, threshold: f64) -> bool {
        // lambda_min <= every diagonal entry
        let min_diag = (0..self.p)
            .map(|i| self.gram[(i, i)] + self.prior)
            .fold(f64::INFINITY, f64::min);
        if min_diag < threshold {
            return false;
        }
        let mut m = self.matrix();
        for i in 0..self.p {
            m[(i, i)] -= threshold;
        }
        m.cholesky().is_some()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::g_floor;

    fn normal() -> NoiseModel {
        NoiseModel::gaussian(1.0, 0.0).unwrap()
    }

    #[test]
    fn dimension_examples() {
        let s = DimensionSchedule::new(2.0).unwrap();
        assert_eq!(s.dimension_at(1000), 47);
        assert_eq!(s.dimension_at(3), 1);
        assert_eq!(s.dimension_at(1), 1);
        assert_eq!(s.dimension_at(2), 1);
        let mut prev = 0;
        for n in 1..100_000 {
            let p = s.dimension_at(n);
            assert!(p >= prev);
            prev = p;
        }
        assert!(DimensionSchedule::new(1.0).is_err());
    }

    #[test]
    fn regressor_examples() {
        assert_eq!(regressor(&[1.0, 2.0], 1, 3).unwrap().as_slice(), &[2.0, 1.0, 0.0]);
        assert_eq!(regressor(&[5.0], 0, 2).unwrap().as_slice(), &[5.0, 0.0]);
        assert_eq!(regressor(&[1.0, 2.0, 3.0], 2, 1).unwrap().as_slice(), &[3.0]);
        assert!(matches!(regressor(&[1.0], 1, 1), Err(Error::Range { .. })));
    }

    #[test]
    fn innovation_examples() {
        let n = normal();
        assert!((innovation(true, 0.0, 0.0, &n) - 0.5).abs() < 1e-15);
        assert!((innovation(false, 0.0, 0.0, &n) + 0.5).abs() < 1e-15);
        let hi = innovation(true, 30.0, 0.0, &n);
        assert!(hi <= 1.0 && hi > 0.999);
        let lo = innovation(false, -30.0, 0.0, &n);
        assert!(lo >= -1.0 && lo < -0.999);
        assert!(innovation(false, 30.0, 0.0, &n) > -1e-100);
    }

    #[test]
    fn hand_computed_scalar_update() {
        // one step with beta_0 = g(0), as a direct scalar computation
        let n = normal();
        let beta = g_floor(&n, 0.0);
        let mut theta = DVector::zeros(1);
        let mut gain = DMatrix::identity(1, 1);
        let mut info = DMatrix::identity(1, 1);
        let phi = DVector::from_element(1, 1.0);
        let diag = recursive_update(
            &mut theta, &mut gain, &mut info, &phi, beta, 0.0, true, 1.0, &n,
        )
        .unwrap();
        assert!((diag.innovation - 0.5).abs() < 1e-15);
        assert!((diag.a - 0.8627).abs() < 1e-4);
        assert!((theta[0] - 0.1721).abs() < 1e-4);
        assert!(!diag.projected);
    }

    #[test]
    fn first_step_uses_running_max_including_u0() {
        let mut est = EstimatorState::new(
            EstimatorConfig { a_exponent: 2.0, ..Default::default() },
            normal(),
        )
        .unwrap();
        let diag = est.step(0, 1.0, 0.0, true).unwrap();
        // beta_0 = phi(d_0 * |u_0|) = phi(1); values from a scalar script
        assert!((diag.beta - 0.241_970_724_519_143_37).abs() < 1e-15);
        assert!((diag.a - 0.944_688_639_324_606).abs() < 1e-12);
        assert!((est.theta()[0] - 0.114_293_497_251_189_3).abs() < 1e-12);
    }

    #[test]
    fn zero_input_leaves_state_unchanged() {
        let mut est = EstimatorState::new(EstimatorConfig::default(), normal()).unwrap();
        est.step(0, 0.0, 0.0, true).unwrap();
        est.step(1, 0.0, 0.0, false).unwrap();
        assert!(est.theta().iter().all(|v| *v == 0.0));
        assert_eq!(est.gain_matrix(), &DMatrix::identity(est.dimension(), est.dimension()));
    }

    #[test]
    fn out_of_order_step_rejected() {
        let mut est = EstimatorState::new(EstimatorConfig::default(), normal()).unwrap();
        est.step(0, 1.0, 0.0, true).unwrap();
        assert!(matches!(
            est.step(2, 1.0, 0.0, true),
            Err(Error::Sequencing { expected: 1, got: 2 })
        ));
    }

    #[test]
    fn predict_examples() {
        let mut est = EstimatorState::new(EstimatorConfig::default(), normal()).unwrap();
        assert_eq!(est.predict(3.0), 0.0);
        est.p = 2;
        est.theta = DVector::from_column_slice(&[1.0, 0.5]);
        est.inputs = vec![2.0];
        assert_eq!(est.predict(1.0), 2.0);
    }

    #[test]
    fn regret_examples() {
        assert_eq!(regret_term(1.0, 1.0), 0.0);
        assert_eq!(regret_term(2.0, 0.0), 4.0);
        assert_eq!(regret_term(0.3, -1.2), regret_term(-1.2, 0.3));
    }

    #[test]
    fn lambda_min_examples() {
        let mut est = EstimatorState::new(EstimatorConfig::default(), normal()).unwrap();
        est.step(0, 1.0, 0.0, true).unwrap();
        est.step(1, 2.0, 0.0, false).unwrap();
        // p_1 = 1: 1 + 1 + 4
        assert!((est.info_matrix_lambda_min(1).unwrap() - 6.0).abs() < 1e-12);
        let info = InformationMatrix::new(3, 1.0);
        assert!((info.lambda_min() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn lagged_gram_matches_outer_products() {
        let inputs: Vec<f64> = (0..37).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
        for p in [1, 4, 9, 40] {
            let fast = lagged_gram(&inputs, p);
            let mut slow = DMatrix::zeros(p, p);
            for k in 0..inputs.len() {
                let phi = regressor(&inputs, k, p).unwrap();
                slow += &phi * phi.transpose();
            }
            assert!((fast - slow).amax() < 1e-9);
        }
    }

    #[test]
    fn tracker_grows_consistently() {
        let inputs: Vec<f64> = (0..200).map(|i| if (i * 31) % 7 < 3 { 1.0 } else { -1.0 }).collect();
        let mut tr = InformationMatrix::new(2, 1.0);
        for (i, u) in inputs.iter().enumerate() {
            if i == 50 {
                tr.grow(5);
            }
            tr.push(*u);
        }
        let mut direct = lagged_gram(&inputs, 5);
        for i in 0..5 {
            direct[(i, i)] += 1.0;
        }
        assert!((tr.matrix() - &direct).amax() < 1e-9);
        let lm = tr.lambda_min();
        assert!(tr.lambda_min_at_least(lm * 0.999));
        assert!(!tr.lambda_min_at_least(lm * 1.001));
    }
}
