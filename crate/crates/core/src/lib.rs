//! Adaptive tracking control of linear ARX plants whose output is seen only
//! through a binary threshold sensor.
//!
//! The crate is organised bottom-up:
//!
//! * [`lti`]: shift-operator polynomials, stability, impulse responses and
//!   exact plant simulation.
//! * [`noise`]: sensor-noise families and the density floor, its inverse,
//!   the projection radius and the scalar estimator gain.
//! * [`projection`]: projection onto an L1 ball under a quadratic metric.
//! * [`estimator`]: the growing-dimension projected recursive estimator,
//!   adaptive predictor and information-matrix diagnostics.
//! * [`controller`]: modified estimate, certainty-equivalence feedback,
//!   dither and the two-stopping-time switching logic.
//! * [`recovery`]: mapping an impulse response back to ARX coefficients.
//! * [`reference`]: bounded reference trajectories.
//! * [`harness`]: closed-loop and open-loop experiment runners, metrics,
//!   configuration and CSV/JSON persistence.

pub mod controller;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod lti;
pub mod noise;
pub mod projection;
pub mod recovery;
pub mod reference;
mod root;

pub use error::{Error, Result};
