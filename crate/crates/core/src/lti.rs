//! Polynomials in the backward-shift operator and exact ARX plant simulation.
//!
//! A plant `A(z) y_{n+1} = B(z) u_n` is described by
//! `A(z) = 1 + a_1 z + ... + a_p z^p` and `B(z) = b_1 + b_2 z + ... + b_q z^{q-1}`,
//! both stored constant term first.

use std::collections::VecDeque;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Roots must lie strictly outside `|z| <= 1 + STABILITY_MARGIN`.
pub const STABILITY_MARGIN: f64 = 1e-9;

/// Tail mass targeted by [`impulse_response_auto`].
pub const DEFAULT_TAIL_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    /// Builds a polynomial, dropping trailing zeros. At least one
    /// coefficient must be supplied and all must be finite.
    pub fn new(mut coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidPolynomial("no coefficients".into()));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidPolynomial("non-finite coefficient".into()));
        }
        while coeffs.len() > 1 && *coeffs.last().unwrap() == 0.0 {
            coeffs.pop();
        }
        Ok(Self { coeffs })
    }

    pub fn one() -> Self {
        Self { coeffs: vec![1.0] }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_monic(&self) -> bool {
        self.coeffs[0] == 1.0
    }

    /// Coefficient of `z^i`, zero beyond the degree.
    pub fn coeff(&self, i: usize) -> f64 {
        self.coeffs.get(i).copied().unwrap_or(0.0)
    }

    /// Roots in `z`, from the eigenvalues of the companion matrix.
    pub fn roots(&self) -> Vec<nalgebra::Complex<f64>> {
        let n = self.degree();
        if n == 0 {
            return Vec::new();
        }
        let lead = self.coeffs[n];
        let mut companion = DMatrix::<f64>::zeros(n, n);
        for i in 1..n {
            companion[(i, i - 1)] = 1.0;
        }
        for i in 0..n {
            companion[(i, n - 1)] = -self.coeffs[i] / lead;
        }
        companion.complex_eigenvalues().iter().copied().collect()
    }

    /// Product of two polynomials.
    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Polynomial::new(out).expect("product of finite polynomials")
    }
}

impl TryFrom<Vec<f64>> for Polynomial {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Polynomial::new(v)
    }
}

impl From<Polynomial> for Vec<f64> {
    fn from(p: Polynomial) -> Self {
        p.coeffs
    }
}

/// True iff every root has modulus strictly greater than `1 + STABILITY_MARGIN`.
pub fn is_stable(poly: &Polynomial) -> Result<bool> {
    if poly.degree() == 0 {
        if poly.coeffs[0] == 0.0 {
            return Err(Error::InvalidPolynomial("zero polynomial".into()));
        }
        return Ok(true);
    }
    Ok(poly
        .roots()
        .iter()
        .all(|z| z.norm() > 1.0 + STABILITY_MARGIN))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImpulseResponse {
    /// `G_1 .. G_m`; `coeffs[0]` is `G_1`.
    pub coeffs: Vec<f64>,
    /// Fitted `r` in `|G_i| <= K exp(-r i)`; infinite for a finite response.
    pub decay_rate_estimate: f64,
    /// Fitted `K` matching `decay_rate_estimate`.
    pub decay_scale_estimate: f64,
}

impl ImpulseResponse {
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `G_i` with 1-based indexing; zero outside the stored range.
    pub fn g(&self, i: usize) -> f64 {
        if i == 0 {
            0.0
        } else {
            self.coeffs.get(i - 1).copied().unwrap_or(0.0)
        }
    }

    pub fn l1_norm(&self) -> f64 {
        self.coeffs.iter().map(|g| g.abs()).sum()
    }

    /// Geometric bound on `sum_{i > m} |G_i|` from the fitted envelope.
    pub fn tail_bound(&self) -> f64 {
        let r = self.decay_rate_estimate;
        if r.is_infinite() {
            return 0.0;
        }
        let m = self.coeffs.len() as f64;
        self.decay_scale_estimate * (-r * (m + 1.0)).exp() / (1.0 - (-r).exp())
    }
}

/// Coefficients of `A^{-1}(z) B(z) = sum_i G_i z^{i-1}`, truncated to `m` terms.
pub fn impulse_response(a: &Polynomial, b: &Polynomial, m: usize) -> Result<ImpulseResponse> {
    if m == 0 {
        return Err(Error::Domain("truncation length must be at least 1".into()));
    }
    if !is_stable(a)? {
        return Err(Error::Unstable(format!("A(z) = {:?}", a.coeffs())));
    }
    let a0 = a.coeffs[0];
    let p = a.degree();
    let mut g = Vec::with_capacity(m);
    for i in 0..m {
        // i is zero-based: g[i] = G_{i+1}
        let mut acc = b.coeff(i);
        for j in 1..=p.min(i) {
            acc -= a.coeffs[j] * g[i - j];
        }
        g.push(acc / a0);
    }
    let (scale, rate) = fit_decay(&g);
    Ok(ImpulseResponse {
        coeffs: g,
        decay_rate_estimate: rate,
        decay_scale_estimate: scale,
    })
}

/// Impulse response long enough that the fitted tail mass is below
/// [`DEFAULT_TAIL_TOLERANCE`].
pub fn impulse_response_auto(a: &Polynomial, b: &Polynomial) -> Result<ImpulseResponse> {
    let mut m = 64;
    loop {
        let ir = impulse_response(a, b, m)?;
        if ir.tail_bound() < DEFAULT_TAIL_TOLERANCE || m >= 1 << 20 {
            return Ok(ir);
        }
        m *= 2;
    }
}

/// Least-squares fit of `ln max_{j >= i} |G_j| = ln K - r i`.
fn fit_decay(g: &[f64]) -> (f64, f64) {
    let mut envelope = vec![0.0; g.len()];
    let mut running = 0.0f64;
    for i in (0..g.len()).rev() {
        running = running.max(g[i].abs());
        envelope[i] = running;
    }
    let pts: Vec<(f64, f64)> = envelope
        .iter()
        .enumerate()
        .filter(|(_, e)| **e > 1e-290)
        .map(|(i, e)| ((i + 1) as f64, e.ln()))
        .collect();
    // An exactly-zero tail that starts at a non-negligible magnitude is a
    // finite response rather than floating-point underflow.
    let abrupt_stop = pts.len() < g.len() && pts.last().is_some_and(|p| p.1 > -500.0);
    if !abrupt_stop && pts.len() >= 2 {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let slope = sxy / sxx;
        let rate = -slope;
        if rate > 0.0 {
            // Lift the intercept so the line dominates every stored point.
            let lift = pts
                .iter()
                .map(|(i, l)| l + rate * i)
                .fold(f64::NEG_INFINITY, f64::max);
            return (lift.exp(), rate);
        }
        let peak = envelope[0];
        return (peak, 0.0);
    }
    // Response vanishes exactly beyond the last nonzero term.
    (envelope.first().copied().unwrap_or(0.0), f64::INFINITY)
}

#[derive(Clone, Debug)]
pub struct PlantModel {
    a: Polynomial,
    b: Polynomial,
    /// Most recent output first.
    outputs: VecDeque<f64>,
    /// Most recent input first.
    inputs: VecDeque<f64>,
}

impl PlantModel {
    /// Plant with zero initial histories. `A` must be monic, both polynomials
    /// stable and `b_1 != 0`.
    pub fn new(a: Polynomial, b: Polynomial) -> Result<Self> {
        if !a.is_monic() {
            return Err(Error::InvalidPolynomial("A(z) must have constant term 1".into()));
        }
        if b.coeffs[0] == 0.0 {
            return Err(Error::InvalidPolynomial("b_1 must be nonzero".into()));
        }
        if !is_stable(&a)? {
            return Err(Error::Unstable(format!("A(z) = {:?}", a.coeffs())));
        }
        if !is_stable(&b)? {
            return Err(Error::Unstable(format!("B(z) = {:?}", b.coeffs())));
        }
        Ok(Self::new_unchecked(a, b))
    }

    /// Skips the stability checks; used where only the recursion matters.
    pub fn new_unchecked(a: Polynomial, b: Polynomial) -> Self {
        let p = a.degree();
        let q = b.degree() + 1;
        Self {
            a,
            b,
            outputs: VecDeque::from(vec![0.0; p]),
            inputs: VecDeque::from(vec![0.0; q]),
        }
    }

    pub fn a(&self) -> &Polynomial {
        &self.a
    }

    pub fn b(&self) -> &Polynomial {
        &self.b
    }

    /// Applies `u_n` and returns `y_{n+1}`.
    pub fn step(&mut self, u: f64) -> f64 {
        self.step_with_disturbance(u, 0.0)
    }

    /// `A(z) y_{n+1} = B(z) u_n + v`.
    pub fn step_with_disturbance(&mut self, u: f64, v: f64) -> f64 {
        if !self.inputs.is_empty() {
            self.inputs.pop_back();
            self.inputs.push_front(u);
        }
        let mut y = v;
        for (j, uj) in self.inputs.iter().enumerate() {
            y += self.b.coeffs[j] * uj;
        }
        for (i, yi) in self.outputs.iter().enumerate() {
            y -= self.a.coeffs[i + 1] * yi;
        }
        if !self.outputs.is_empty() {
            self.outputs.pop_back();
            self.outputs.push_front(y);
        }
        y
    }
}

/// Free-function form of [`PlantModel::step`].
pub fn plant_step(model: &mut PlantModel, u: f64) -> f64 {
    model.step(u)
}

/// `I(y + w > c)`.
pub fn binary_sensor(y: f64, w: f64, c: f64) -> bool {
    y + w > c
}
