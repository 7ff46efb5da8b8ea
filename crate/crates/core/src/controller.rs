//! Switching certainty-equivalence tracking controller.
//!
//! Time `t` is the zero-based step index; powers and logarithms of time in
//! the switching rules use the one-based clock `n = t + 1`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{EstimatorState, InformationMatrix};
use crate::lti::ImpulseResponse;
use crate::root::SqrtColumns;

/// Relative tolerance under which two argmax objective values count as tied.
const TIE_TOLERANCE: f64 = 1e-12;
const DEGENERATE_GAIN: f64 = 1e-300;

#[derive(Clone, Debug, PartialEq)]
pub struct ModifiedEstimate {
    pub ghat: DVector<f64>,
    /// `0` for no correction, else the 1-based column of `P^{1/2}` used.
    pub chosen_index: usize,
}

/// Symmetric square root by eigendecomposition.
pub fn sqrt_psd(p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !p.is_square() || p.nrows() == 0 {
        return Err(Error::Metric(format!("gain matrix is {}x{}", p.nrows(), p.ncols())));
    }
    let eig = SymmetricEigen::new(p.clone());
    if let Some(bad) = eig.eigenvalues.iter().find(|l| !(**l > 0.0)) {
        return Err(Error::Metric(format!("gain matrix not positive definite (eigenvalue {bad})")));
    }
    let v = &eig.eigenvectors;
    Ok(v * DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt)) * v.transpose())
}

/// `theta + (a P)^{1/2} e_i` with `i` maximizing `|theta_1 + [P^{1/2}]_{1,i}|`.
pub fn modified_estimate(
    theta: &DVector<f64>,
    p: &DMatrix<f64>,
    a_scalar: f64,
) -> Result<ModifiedEstimate> {
    if !(a_scalar > 0.0 && a_scalar <= 1.0) {
        return Err(Error::Domain(format!("a must lie in (0, 1], got {a_scalar}")));
    }
    if p.nrows() != theta.len() {
        return Err(Error::Metric(format!(
            "gain matrix is {}x{} for a {}-vector",
            p.nrows(),
            p.ncols(),
            theta.len()
        )));
    }
    let root = SqrtColumns::new(p)?;
    let first = root.column(0);
    let t1 = theta[0];
    let mut best = t1.abs();
    let mut chosen = 0;
    for i in 1..=theta.len() {
        let val = (t1 + first[i - 1]).abs();
        if val > best + TIE_TOLERANCE * best.max(val) {
            best = val;
            chosen = i;
        }
    }
    let mut ghat = theta.clone();
    if chosen > 0 {
        ghat.axpy(a_scalar.sqrt(), &root.column(chosen - 1), 1.0);
    }
    Ok(ModifiedEstimate {
        ghat,
        chosen_index: chosen,
    })
}

/// `(y* - sum_{i>=2} ghat_i u_{n-i+1}) / ghat_1`; `recent_u[0]` is `u_{n-1}`.
pub fn feedback_control(me: &ModifiedEstimate, y_star_next: f64, recent_u: &[f64]) -> Result<f64> {
    let g = &me.ghat;
    if g[0].abs() < DEGENERATE_GAIN {
        return Err(Error::DegenerateGain(g[0]));
    }
    let mut acc = y_star_next;
    for (gi, u) in g.iter().skip(1).zip(recent_u) {
        acc -= gi * u;
    }
    Ok(acc / g[0])
}

/// `u_n^0` for a known impulse response; `y_star[n]` is the target `y*_{n+1}`.
pub fn optimal_control_oracle(g: &ImpulseResponse, y_star: &[f64]) -> Result<Vec<f64>> {
    let g1 = g.g(1);
    if g1.abs() < DEGENERATE_GAIN {
        return Err(Error::DegenerateGain(g1));
    }
    let m = g.len();
    let mut u: Vec<f64> = Vec::with_capacity(y_star.len());
    for (n, ys) in y_star.iter().enumerate() {
        let mut acc = *ys;
        for i in 2..=m.min(n + 1) {
            acc -= g.coeffs[i - 1] * u[n + 1 - i];
        }
        u.push(acc / g1);
    }
    Ok(u)
}

/// Lower bound on `|u_t^s|` valid for every correction index, from `theta`
/// and `diag(P)` alone: `|P^{1/2} e_i|_2 = sqrt(P_ii)` and `a <= 1`.
fn candidate_lower_bound(est: &EstimatorState, y_star_next: f64) -> f64 {
    let theta = est.theta();
    let gain = est.gain_matrix();
    let p = theta.len();
    let r = (0..p).map(|i| gain[(i, i)]).fold(0.0_f64, f64::max).sqrt();
    let inputs = est.inputs();
    let mut num = y_star_next;
    let mut norm2 = 0.0;
    for (gi, u) in theta.iter().skip(1).zip(inputs.iter().rev()) {
        num -= gi * u;
        norm2 += u * u;
    }
    let slack = (num.abs() - r * norm2.sqrt()).max(0.0);
    // shaved so that rounding never certifies a value that is not there
    slack / (theta[0].abs() + r) * (1.0 - 1e-9)
}

/// Rademacher excitation with its own ChaCha stream.
#[derive(Clone, Debug)]
pub struct Dither {
    rng: ChaCha20Rng,
}

impl Dither {
    pub fn new(rng: ChaCha20Rng) -> Self {
        Self { rng }
    }

    pub fn from_seed(seed: u64) -> Self {
        Self::new(ChaCha20Rng::seed_from_u64(seed))
    }

    /// Bound on every draw.
    pub fn bound(&self) -> f64 {
        1.0
    }

    pub fn next_value(&mut self) -> f64 {
        if self.rng.random::<bool>() {
            1.0
        } else {
            -1.0
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Feedback,
    Excitation,
}

impl Phase {
    pub fn as_str(&self) -> &'static str {
        match self {
            Phase::Feedback => "feedback",
            Phase::Excitation => "excitation",
        }
    }
}

impl std::str::FromStr for Phase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "feedback" => Ok(Phase::Feedback),
            "excitation" => Ok(Phase::Excitation),
            other => Err(Error::Config(format!("unknown phase {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwitchEvent {
    pub time: usize,
    pub phase: Phase,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerConfig {
    #[serde(default = "default_b")]
    pub b_exponent: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub dither: DitherKind,
}

fn default_b() -> f64 {
    0.2
}

fn default_epsilon() -> f64 {
    0.5
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DitherKind {
    #[default]
    Rademacher,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            b_exponent: default_b(),
            epsilon: default_epsilon(),
            dither: DitherKind::Rademacher,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.b_exponent > 0.0 && self.b_exponent < 0.25) {
            return Err(Error::Config(format!(
                "controller.b_exponent must lie in (0, 1/4), got {}",
                self.b_exponent
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(format!(
                "controller.epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// Phase for the current step given the candidate `|u^s|`.
///
/// In feedback the run leaves when the candidate exceeds
/// `feedback_bound`; in excitation it returns once `tau_ready` holds.
pub fn next_phase(
    phase: Phase,
    candidate_abs: f64,
    feedback_bound: f64,
    tau_ready: impl FnOnce() -> bool,
) -> Phase {
    match phase {
        Phase::Feedback if candidate_abs > feedback_bound => Phase::Excitation,
        Phase::Feedback => Phase::Feedback,
        Phase::Excitation if tau_ready() => Phase::Feedback,
        Phase::Excitation => Phase::Excitation,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControlOutput {
    pub u: f64,
    pub phase: Phase,
    /// The certainty-equivalence candidate `u_t^s`, when it was needed.
    pub candidate: Option<f64>,
    /// `min(d_t, n^b)`.
    pub envelope: f64,
    pub switched: bool,
}

#[derive(Clone, Debug)]
pub struct ControllerState {
    cfg: ControllerConfig,
    phase: Phase,
    u0s: Option<f64>,
    dither: Dither,
    switch_log: Vec<SwitchEvent>,
    info: InformationMatrix,
}

impl ControllerState {
    pub fn new(cfg: ControllerConfig, dither: Dither, p0_scale: f64) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            phase: Phase::Feedback,
            u0s: None,
            dither,
            switch_log: Vec::new(),
            info: InformationMatrix::new(1, p0_scale),
        })
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.cfg
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    /// `|u_0^s|`, fixed by the first candidate ever computed.
    pub fn u0s_magnitude(&self) -> f64 {
        self.u0s.unwrap_or(0.0)
    }

    pub fn switch_log(&self) -> &[SwitchEvent] {
        &self.switch_log
    }

    pub fn dither_next(&mut self) -> f64 {
        self.dither.next_value()
    }

    /// `lambda_min` of the unweighted information matrix over the inputs
    /// emitted so far, at the tracker's current dimension.
    pub fn lambda_min(&self) -> f64 {
        self.info.lambda_min()
    }

    pub fn information(&self) -> &InformationMatrix {
        &self.info
    }

    /// Emits `u_t`. The estimator must have consumed steps `0 .. t`.
    pub fn control_step(
        &mut self,
        est: &mut EstimatorState,
        y_star_next: f64,
        t: usize,
    ) -> Result<ControlOutput> {
        if est.time() != t {
            return Err(Error::Sequencing {
                expected: est.time(),
                got: t,
            });
        }
        let n = (t + 1) as f64;
        let p = est.dimension();
        let d = est.radius(t);
        let b = self.cfg.b_exponent;
        let envelope = d.min(n.powf(b));

        // the candidate only steers feedback steps; in excitation it is
        // evaluated lazily, behind cheaper parts of the tau test
        let mut candidate = match (self.phase, self.u0s) {
            (Phase::Feedback, _) | (_, None) => Some(self.candidate(est, y_star_next, t)?),
            (Phase::Excitation, Some(_)) => None,
        };
        let u0s = *self.u0s.get_or_insert_with(|| candidate.map_or(0.0, f64::abs));

        self.info.grow(p);
        let new_phase = match (self.phase, candidate) {
            (Phase::Feedback, Some(c)) => next_phase(Phase::Feedback, c.abs(), envelope + u0s, || false),
            _ => {
                let small = d.sqrt().min(n.powf(b / 2.0));
                let recent = est.inputs().iter().rev().take(p).fold(0.0_f64, |m, u| m.max(u.abs()));
                let alpha = est.radius_schedule().alpha(t);
                let threshold = alpha * alpha * p as f64 * n.ln().powf(1.0 + self.cfg.epsilon);
                let ready = recent <= small
                    && candidate_lower_bound(est, y_star_next) <= small
                    && self.info.lambda_min_at_least(threshold)
                    && {
                        let c = self.candidate(est, y_star_next, t)?;
                        candidate = Some(c);
                        c.abs() <= small
                    };
                next_phase(Phase::Excitation, 0.0, 0.0, || ready)
            }
        };
        let switched = new_phase != self.phase;
        if switched {
            self.switch_log.push(SwitchEvent {
                time: t,
                phase: new_phase,
            });
            self.phase = new_phase;
        }
        let u = match (self.phase, candidate) {
            (Phase::Feedback, Some(c)) => c,
            _ => self.dither.next_value().clamp(-envelope, envelope),
        };
        self.info.push(u);
        Ok(ControlOutput {
            u,
            phase: self.phase,
            candidate,
            envelope,
            switched,
        })
    }

    /// `u_t^s` from the corrected estimate, with `a` evaluated on the
    /// regressor whose `u_t` slot is zero.
    fn candidate(&self, est: &mut EstimatorState, y_star_next: f64, t: usize) -> Result<f64> {
        let p = est.dimension();
        let beta = est.beta_for(t, 0.0);
        let inputs = est.inputs();
        let recent: Vec<f64> = inputs.iter().rev().take(p.saturating_sub(1)).copied().collect();
        let mut phi = DVector::zeros(p);
        for (i, u) in recent.iter().enumerate() {
            phi[i + 1] = *u;
        }
        let q = (est.gain_matrix() * &phi).dot(&phi);
        let a = 1.0 / (1.0 + beta * beta * q);
        let me = modified_estimate(est.theta(), est.gain_matrix(), a)?;
        feedback_control(&me, y_star_next, &recent)
    }
}
