//! Columns of the symmetric square root of a positive definite matrix.
//!
//! `P = Q Z diag(lambda) Z' Q'` with `Q` a product of Householder reflectors
//! (tridiagonal reduction) and `Z` a product of plane rotations (implicit QL).
//! Neither factor is assembled: both are applied to the requested vectors,
//! so after the `O(p^3)` reduction each column costs `O(p^2)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 60;

struct Reflector {
    start: usize,
    v: DVector<f64>,
    beta: f64,
}

impl Reflector {
    fn apply(&self, x: &mut DVector<f64>) {
        let mut tail = x.rows_mut(self.start, self.v.len());
        let k = self.beta * self.v.dot(&tail);
        tail.axpy(-k, &self.v, 1.0);
    }
}

pub(crate) struct SqrtColumns {
    reflectors: Vec<Reflector>,
    /// `(i, c, s)` acting on coordinates `i, i + 1`, in the order generated.
    rotations: Vec<(usize, f64, f64)>,
    roots: Vec<f64>,
}

impl SqrtColumns {
    pub(crate) fn new(p: &DMatrix<f64>) -> Result<Self> {
        let n = p.nrows();
        if !p.is_square() || n == 0 {
            return Err(Error::Metric(format!("gain matrix is {}x{}", p.nrows(), p.ncols())));
        }
        let (reflectors, mut d, mut e) = tridiagonalize(p.clone());
        let rotations = ql_implicit(&mut d, &mut e)?;
        if let Some(bad) = d.iter().find(|l| !(**l > 0.0)) {
            return Err(Error::Metric(format!("gain matrix not positive definite (eigenvalue {bad})")));
        }
        let roots = d.iter().map(|l| l.sqrt()).collect();
        Ok(Self { reflectors, rotations, roots })
    }

    /// Column (equivalently row) `i` of `P^{1/2}`.
    pub(crate) fn column(&self, i: usize) -> DVector<f64> {
        let n = self.roots.len();
        let mut x = DVector::zeros(n);
        x[i] = 1.0;
        // Q' x
        for h in &self.reflectors {
            h.apply(&mut x);
        }
        // Z' x
        for &(k, c, s) in &self.rotations {
            let (a, b) = (x[k], x[k + 1]);
            x[k] = c * a - s * b;
            x[k + 1] = s * a + c * b;
        }
        for (xi, r) in x.iter_mut().zip(&self.roots) {
            *xi *= r;
        }
        // Z x
        for &(k, c, s) in self.rotations.iter().rev() {
            let (a, b) = (x[k], x[k + 1]);
            x[k] = c * a + s * b;
            x[k + 1] = -s * a + c * b;
        }
        // Q x
        for h in self.reflectors.iter().rev() {
            h.apply(&mut x);
        }
        x
    }
}

/// Householder reduction; returns the reflectors, diagonal and subdiagonal
/// (`e[i]` couples `i` and `i + 1`, `e[n - 1] = 0`).
fn tridiagonalize(mut a: DMatrix<f64>) -> (Vec<Reflector>, Vec<f64>, Vec<f64>) {
    let n = a.nrows();
    let mut reflectors = Vec::new();
    let mut e = vec![0.0; n];
    for k in 0..n.saturating_sub(2) {
        let m = n - k - 1;
        let x = a.view((k + 1, k), (m, 1)).column(0).clone_owned();
        let tail = x.rows(1, m - 1).norm();
        if tail == 0.0 {
            e[k] = x[0];
            continue;
        }
        let norm = x[0].hypot(tail);
        let alpha = if x[0] > 0.0 { -norm } else { norm };
        let mut v = x;
        v[0] -= alpha;
        let beta = 2.0 / v.norm_squared();
        let mut b = a.view_mut((k + 1, k + 1), (m, m));
        let mut w = DVector::zeros(m);
        // only the lower triangle of the trailing block is read or kept
        w.sygemv(beta, &b, &v, 0.0);
        let kk = 0.5 * beta * w.dot(&v);
        w.axpy(-kk, &v, 1.0);
        b.syger(-1.0, &v, &w, 1.0);
        b.syger(-1.0, &w, &v, 1.0);
        e[k] = alpha;
        reflectors.push(Reflector { start: k + 1, v, beta });
    }
    if n >= 2 {
        e[n - 2] = a[(n - 1, n - 2)];
    }
    let d = (0..n).map(|i| a[(i, i)]).collect();
    (reflectors, d, e)
}

/// Implicit QL with Wilkinson-type shifts on a symmetric tridiagonal matrix.
/// Leaves the eigenvalues in `d` and returns the rotations whose product,
/// applied on the right in order, gives the eigenvectors.
fn ql_implicit(d: &mut [f64], e: &mut [f64]) -> Result<Vec<(usize, f64, f64)>> {
    let n = d.len();
    let mut rotations = Vec::with_capacity(2 * n * n);
    for l in 0..n {
        let mut sweeps = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            sweeps += 1;
            if sweeps > MAX_SWEEPS {
                return Err(Error::Metric("eigenvalue iteration did not converge".into()));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut underflow = false;
            for i in (l..m).rev() {
                let f = s * e[i];
                let b = c * e[i];
                r = (f * f + g * g).sqrt();
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                rotations.push((i, c, s));
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(rotations)
}
