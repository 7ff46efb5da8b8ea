#![allow(dead_code)]

use bintrack::lti::Polynomial;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// Monic polynomial of the given degree with every root at modulus >= 1.2,
/// built from real roots and conjugate pairs.
pub fn random_stable<R: Rng>(rng: &mut R, degree: usize) -> Polynomial {
    let mut coeffs = vec![1.0];
    let mut left = degree;
    while left > 0 {
        let modulus = rng.random_range(1.2..4.0);
        let factor = if left >= 2 && rng.random_bool(0.5) {
            // (1 - z/r)(1 - z/conj r) = 1 - 2 cos(w)/|r| z + z^2/|r|^2
            let w: f64 = rng.random_range(0.0..std::f64::consts::PI);
            left -= 2;
            vec![1.0, -2.0 * w.cos() / modulus, 1.0 / (modulus * modulus)]
        } else {
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            left -= 1;
            vec![1.0, -sign / modulus]
        };
        let mut next = vec![0.0; coeffs.len() + factor.len() - 1];
        for (i, a) in coeffs.iter().enumerate() {
            for (j, b) in factor.iter().enumerate() {
                next[i + j] += a * b;
            }
        }
        coeffs = next;
    }
    Polynomial::new(coeffs).unwrap()
}

/// `G` by solving the lower-triangular Toeplitz system `T_A g = b`.
pub fn long_division(a: &Polynomial, b: &Polynomial, m: usize) -> Vec<f64> {
    let t = DMatrix::from_fn(m, m, |i, j| if i >= j { a.coeff(i - j) } else { 0.0 });
    let rhs = DVector::from_fn(m, |i, _| b.coeff(i));
    t.solve_lower_triangular(&rhs).unwrap().as_slice().to_vec()
}

/// Exhaustive search over every face `(S, s)` of the L1 ball. Each face
/// minimiser comes from the bordered KKT system
/// `[M_SS s; s' 0] [w_S; mu] = [(M x)_S; d]`, solved by LU; sign-consistent
/// candidates are feasible, and the best of them is the projection.
pub fn projection_oracle(x: &DVector<f64>, m: &DMatrix<f64>, d: f64) -> DVector<f64> {
    let p = x.len();
    if x.iter().map(|v| v.abs()).sum::<f64>() <= d {
        return x.clone();
    }
    let c = m * x;
    let objective = |w: &DVector<f64>| {
        let r = w - x;
        0.5 * r.dot(&(m * &r))
    };
    let mut best: Option<(f64, DVector<f64>)> = None;
    // each coordinate is off (0), positive (1) or negative (2)
    for code in 1..3usize.pow(p as u32) {
        let mut digits = code;
        let mut support = Vec::new();
        let mut signs = Vec::new();
        for i in 0..p {
            match digits % 3 {
                1 => {
                    support.push(i);
                    signs.push(1.0);
                }
                2 => {
                    support.push(i);
                    signs.push(-1.0);
                }
                _ => {}
            }
            digits /= 3;
        }
        let k = support.len();
        let mut kkt = DMatrix::zeros(k + 1, k + 1);
        let mut rhs = DVector::zeros(k + 1);
        for a in 0..k {
            for b in 0..k {
                kkt[(a, b)] = m[(support[a], support[b])];
            }
            kkt[(a, k)] = signs[a];
            kkt[(k, a)] = signs[a];
            rhs[a] = c[support[a]];
        }
        rhs[k] = d;
        let Some(sol) = kkt.lu().solve(&rhs) else { continue };
        if (0..k).any(|a| sol[a] * signs[a] < -1e-12) {
            continue;
        }
        let mut w = DVector::zeros(p);
        for a in 0..k {
            w[support[a]] = sol[a];
        }
        let f = objective(&w);
        if best.as_ref().is_none_or(|(bf, _)| f < *bf) {
            best = Some((f, w));
        }
    }
    best.expect("some face is feasible").1
}

pub fn random_spd<R: Rng>(rng: &mut R, p: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(p, p, |_, _| rng.random_range(-1.0..1.0));
    let scale = 10f64.powf(rng.random_range(-1.0..2.0));
    (a.transpose() * a) * scale + DMatrix::identity(p, p) * 0.05
}

