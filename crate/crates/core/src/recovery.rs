//! ARX coefficients from an impulse response with known orders.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Largest accepted condition number of `L L'`.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Clone, Debug, PartialEq)]
pub struct RecoveredParams {
    /// `a_1 .. a_p`.
    pub a_coeffs: Vec<f64>,
    /// `b_1 .. b_q`.
    pub b_coeffs: Vec<f64>,
    /// `|L' a + [G_{q+1} .. G_{q+p}]|`.
    pub residual: f64,
    /// Condition number of `L L'` (1 when `p = 0`).
    pub condition: f64,
}

/// `G_i` for 1-based `i`, zero for `i <= 0`.
fn g_at(g: &[f64], i: isize) -> f64 {
    if i <= 0 {
        0.0
    } else {
        g[(i - 1) as usize]
    }
}

/// `L[i][j] = G_{q - i + j}`, a `p x p` Toeplitz block.
pub fn toeplitz_block(g: &[f64], p: usize, q: usize) -> DMatrix<f64> {
    DMatrix::from_fn(p, p, |i, j| g_at(g, q as isize - i as isize + j as isize))
}

/// Recovers `(a, b)` from `G_1 .. G_{q+p}` (`g[0]` is `G_1`).
pub fn recover(g: &[f64], p: usize, q: usize) -> Result<RecoveredParams> {
    if g.len() < p + q {
        return Err(Error::Domain(format!(
            "need at least {} impulse-response terms, got {}",
            p + q,
            g.len()
        )));
    }
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("impulse response contains non-finite values".into()));
    }
    let (a, residual, condition) = if p == 0 {
        (Vec::new(), 0.0, 1.0)
    } else {
        let l = toeplitz_block(g, p, q);
        let sv = l.singular_values();
        let (smax, smin) = (sv.max(), sv.min());
        let condition = if smin > 0.0 { (smax / smin).powi(2) } else { f64::INFINITY };
        if !(condition <= MAX_CONDITION) {
            return Err(Error::Identifiability(condition));
        }
        let rhs = DVector::from_fn(p, |i, _| -g[q + i]);
        let lt = l.transpose();
        let a = lt
            .clone()
            .qr()
            .solve(&rhs)
            .ok_or(Error::Identifiability(f64::INFINITY))?;
        let residual = (&lt * &a - &rhs).norm();
        (a.as_slice().to_vec(), residual, condition)
    };
    let b = (1..=q)
        .map(|i| {
            let mut acc = g_at(g, i as isize);
            for (j, aj) in a.iter().enumerate().take(i.min(p)) {
                acc += aj * g_at(g, i as isize - j as isize - 1);
            }
            acc
        })
        .collect();
    Ok(RecoveredParams {
        a_coeffs: a,
        b_coeffs: b,
        residual,
        condition,
    })
}
