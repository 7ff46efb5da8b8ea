//! Sensor-noise families and the quantities the estimator derives from them.
//!
//! `g(t)` is the smallest noise density over `|x| <= t + C`, `h` its
//! generalised inverse, `d_k = sqrt(h(g(0) / alpha_k) + 1)` the projection
//! radius and `beta_k` the density floor over the widest argument the
//! sensor can currently see.

use std::f64::consts::PI;
use std::fmt::Debug;
use std::sync::Arc;

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

const BISECTION_TOL: f64 = 1e-12;

/// A continuous, unimodal noise distribution with strictly positive density.
pub trait Density: Debug + Send + Sync {
    fn pdf(&self, x: f64) -> f64;
    fn cdf(&self, x: f64) -> f64;
    /// `1 - cdf(x)`, overridable for accuracy in the upper tail.
    fn sf(&self, x: f64) -> f64 {
        1.0 - self.cdf(x)
    }
    fn mode(&self) -> f64 {
        0.0
    }
    /// Draw by inverting the CDF.
    fn sample(&self, rng: &mut dyn RngCore) -> f64 {
        let u: f64 = rng.random_range(f64::EPSILON..1.0);
        quantile_by_bisection(self, u)
    }
}

fn quantile_by_bisection<D: Density + ?Sized>(dist: &D, u: f64) -> f64 {
    let (mut lo, mut hi) = (-1.0, 1.0);
    while dist.cdf(lo) > u {
        lo *= 2.0;
    }
    while dist.cdf(hi) < u {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if dist.cdf(mid) < u {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 * (1.0 + mid.abs()) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Logistic distribution with location 0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Logistic {
    pub scale: f64,
}

impl Logistic {
    pub fn new(scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::Domain(format!("logistic scale must be positive, got {scale}")));
        }
        Ok(Self { scale })
    }
}

impl Density for Logistic {
    fn pdf(&self, x: f64) -> f64 {
        let z = (-(x / self.scale).abs()).exp();
        z / (self.scale * (1.0 + z).powi(2))
    }

    fn cdf(&self, x: f64) -> f64 {
        1.0 / (1.0 + (-x / self.scale).exp())
    }

    fn sf(&self, x: f64) -> f64 {
        1.0 / (1.0 + (x / self.scale).exp())
    }

    fn sample(&self, rng: &mut dyn RngCore) -> f64 {
        let u: f64 = rng.random_range(f64::EPSILON..1.0);
        self.scale * (u / (1.0 - u)).ln()
    }
}

#[derive(Clone, Debug)]
pub enum NoiseFamily {
    Gaussian { sigma: f64 },
    Unimodal(Arc<dyn Density>),
}

#[derive(Clone, Debug)]
pub struct NoiseModel {
    family: NoiseFamily,
    threshold_bound: f64,
}

impl NoiseModel {
    pub fn gaussian(sigma: f64, threshold_bound: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Domain(format!("sigma must be positive, got {sigma}")));
        }
        Self::new(NoiseFamily::Gaussian { sigma }, threshold_bound)
    }

    pub fn new(family: NoiseFamily, threshold_bound: f64) -> Result<Self> {
        if !(threshold_bound >= 0.0 && threshold_bound.is_finite()) {
            return Err(Error::Domain(format!(
                "threshold bound must be nonnegative, got {threshold_bound}"
            )));
        }
        Ok(Self {
            family,
            threshold_bound,
        })
    }

    pub fn family(&self) -> &NoiseFamily {
        &self.family
    }

    /// `C`, the bound on every threshold used in a run.
    pub fn threshold_bound(&self) -> f64 {
        self.threshold_bound
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match &self.family {
            NoiseFamily::Gaussian { sigma } => {
                let z = x / sigma;
                (-0.5 * z * z).exp() / (sigma * (2.0 * PI).sqrt())
            }
            NoiseFamily::Unimodal(d) => d.pdf(x),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match &self.family {
            NoiseFamily::Gaussian { sigma } => 0.5 * erfc(-x / (sigma * std::f64::consts::SQRT_2)),
            NoiseFamily::Unimodal(d) => d.cdf(x),
        }
    }

    pub fn sf(&self, x: f64) -> f64 {
        match &self.family {
            NoiseFamily::Gaussian { sigma } => 0.5 * erfc(x / (sigma * std::f64::consts::SQRT_2)),
            NoiseFamily::Unimodal(d) => d.sf(x),
        }
    }

    pub fn sample<R: RngCore>(&self, rng: &mut R) -> f64 {
        match &self.family {
            NoiseFamily::Gaussian { sigma } => {
                let z: f64 = rng.sample(StandardNormal);
                sigma * z
            }
            NoiseFamily::Unimodal(d) => d.sample(rng),
        }
    }

    /// Infimum of the density over `|x| <= radius`. For a unimodal density
    /// the infimum over an interval is attained at one of its ends.
    fn density_floor(&self, radius: f64) -> f64 {
        match &self.family {
            NoiseFamily::Gaussian { .. } => self.pdf(radius),
            NoiseFamily::Unimodal(d) => {
                let m = d.mode();
                if m.abs() > radius {
                    // mode outside the interval: density monotone on it
                    d.pdf(radius.copysign(-m))
                } else {
                    d.pdf(-radius).min(d.pdf(radius))
                }
            }
        }
    }
}

/// `g(t) = inf_{|x| <= t + C} f(x)`.
pub fn g_floor(model: &NoiseModel, t: f64) -> f64 {
    model.density_floor(t.max(0.0) + model.threshold_bound)
}

/// `h(u) = inf { s >= 0 : g(s) = u }` for `0 < u <= g(0)`.
pub fn h_inverse(model: &NoiseModel, u: f64) -> Result<f64> {
    let g0 = g_floor(model, 0.0);
    if !(u > 0.0 && u <= g0) {
        return Err(Error::Domain(format!("h is defined on (0, {g0}], got {u}")));
    }
    match model.family {
        NoiseFamily::Gaussian { sigma } => Ok(h_inverse_gaussian(sigma, model.threshold_bound, u)),
        NoiseFamily::Unimodal(_) => Ok(h_inverse_bisection(model, u)),
    }
}

fn h_inverse_gaussian(sigma: f64, c: f64, u: f64) -> f64 {
    // sigma * sqrt(2 pi) * u = exp(-R^2 / (2 sigma^2))
    let log_ratio = (u * sigma * (2.0 * PI).sqrt()).ln();
    let radius = sigma * (-2.0 * log_ratio).max(0.0).sqrt();
    (radius - c).max(0.0)
}

/// Bisection on `[0, S]`, doubling `S` until `g(S) < u`.
pub fn h_inverse_bisection(model: &NoiseModel, u: f64) -> f64 {
    if g_floor(model, 0.0) <= u {
        return 0.0;
    }
    let mut hi = 1.0;
    while g_floor(model, hi) >= u {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    while hi - lo > BISECTION_TOL * (1.0 + hi) {
        let mid = 0.5 * (lo + hi);
        if g_floor(model, mid) > u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `alpha_k = (k + 1)^exponent`, with `exponent` in `(0, 1/4)`.
#[derive(Clone, Debug)]
pub struct RadiusSchedule {
    alpha_exponent: f64,
    cache: Vec<f64>,
}

impl RadiusSchedule {
    pub fn new(alpha_exponent: f64) -> Result<Self> {
        if !(alpha_exponent > 0.0 && alpha_exponent < 0.25) {
            return Err(Error::Domain(format!(
                "alpha exponent must lie in (0, 1/4), got {alpha_exponent}"
            )));
        }
        Ok(Self {
            alpha_exponent,
            cache: Vec::new(),
        })
    }

    pub fn alpha_exponent(&self) -> f64 {
        self.alpha_exponent
    }

    pub fn alpha(&self, k: usize) -> f64 {
        ((k + 1) as f64).powf(self.alpha_exponent)
    }

    /// Cached `d_k`; extends the cache up to `k` on demand.
    pub fn radius_cached(&mut self, model: &NoiseModel, k: usize) -> f64 {
        while self.cache.len() <= k {
            let next = radius(model, self, self.cache.len());
            self.cache.push(next);
        }
        self.cache[k]
    }
}

/// `d_k = sqrt(h(g(0) / alpha_k) + 1)`.
pub fn radius(model: &NoiseModel, sched: &RadiusSchedule, k: usize) -> f64 {
    let g0 = g_floor(model, 0.0);
    let h = h_inverse(model, g0 / sched.alpha(k)).expect("g(0)/alpha_k lies in (0, g(0)]");
    (h + 1.0).sqrt()
}

/// `beta_k`: density floor over `|x| <= d_k * u_max + C`.
pub fn beta_gain(model: &NoiseModel, d_k: f64, u_max: f64) -> f64 {
    g_floor(model, d_k * u_max)
}
