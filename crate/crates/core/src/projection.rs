//! Projection onto `{w : ||w||_1 <= d}` in the metric `(x - w)' M (x - w)`.
//!
//! For a point outside the ball the minimiser sits on a face of the ball
//! given by a support `S` and signs `s`. On that face
//! `w_S = M_SS^{-1} (c_S - lambda s)` with `c = M x`, and `lambda` follows
//! from `s' w_S = d`. The face is found by following the solution path of
//! `min 1/2 (x - w)' M (x - w) + lambda ||w||_1` upwards from `lambda = 0`
//! (where `w = x`) until the L1 norm drops to `d`. Points just outside the
//! ball therefore cost a handful of path events. When `M^{-1}` is known,
//! face systems are solved through its Schur complements, which is cheap
//! while the support stays large.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug)]
pub struct ProjectionProblem<'a> {
    pub point: &'a DVector<f64>,
    pub metric: &'a DMatrix<f64>,
    pub radius: f64,
}

/// Support and signs of a boundary solution.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ActivePattern {
    pub indices: Vec<usize>,
    pub signs: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct Projection {
    pub point: DVector<f64>,
    /// `None` when the input already lies in the ball.
    pub pattern: Option<ActivePattern>,
    /// Multiplier of the L1 constraint.
    pub multiplier: f64,
}

/// Validated projection.
pub fn project(prob: ProjectionProblem<'_>) -> Result<DVector<f64>> {
    validate(&prob)?;
    Ok(project_unchecked(prob, None)?.point)
}

/// Projection without input validation. `inverse`, when given, must be
/// `M^{-1}`; otherwise face systems are factorised directly.
pub fn project_unchecked(
    prob: ProjectionProblem<'_>,
    inverse: Option<&DMatrix<f64>>,
) -> Result<Projection> {
    let ProjectionProblem {
        point: x,
        metric: m,
        radius: d,
    } = prob;
    if !(d > 0.0) {
        return Err(Error::Domain(format!("radius must be positive, got {d}")));
    }
    if x.lp_norm(1) <= d {
        return Ok(Projection {
            point: x.clone(),
            pattern: None,
            multiplier: 0.0,
        });
    }
    let solver = FaceSolver { m, inverse };
    reverse_path(&solver, x, d)
}

pub fn project_euclidean(x: &DVector<f64>, d: f64) -> Result<DVector<f64>> {
    if !(d > 0.0) {
        return Err(Error::Domain(format!("radius must be positive, got {d}")));
    }
    if x.lp_norm(1) <= d {
        return Ok(x.clone());
    }
    let mut mags: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut shift = 0.0;
    for (j, u) in mags.iter().enumerate() {
        cumsum += u;
        let candidate = (cumsum - d) / (j + 1) as f64;
        if u - candidate > 0.0 {
            shift = candidate;
        } else {
            break;
        }
    }
    Ok(x.map(|v| v.signum() * (v.abs() - shift).max(0.0)))
}

/// Largest violation of the optimality conditions at `w`: stationarity on
/// the support, the dual bound off it, and primal feasibility.
pub fn kkt_residual(x: &DVector<f64>, m: &DMatrix<f64>, d: f64, w: &DVector<f64>) -> f64 {
    let g = m * (x - w);
    let l1 = w.lp_norm(1);
    let feas = (l1 - d).max(0.0);
    if x.lp_norm(1) <= d {
        return (x - w).amax() + feas;
    }
    let lambda = g.amax();
    let mut worst: f64 = feas + (d - l1).abs();
    for i in 0..w.len() {
        if w[i] != 0.0 {
            worst = worst.max((g[i] - lambda * w[i].signum()).abs());
        }
    }
    worst
}

fn validate(prob: &ProjectionProblem<'_>) -> Result<()> {
    let m = prob.metric;
    let p = prob.point.len();
    if m.nrows() != p || m.ncols() != p {
        return Err(Error::Domain(format!(
            "metric is {}x{} but point has dimension {p}",
            m.nrows(),
            m.ncols()
        )));
    }
    let scale = m.amax().max(f64::MIN_POSITIVE);
    if (m - m.transpose()).amax() > SYMMETRY_TOL * scale {
        return Err(Error::Metric("not symmetric".into()));
    }
    if m.clone().cholesky().is_none() {
        return Err(Error::Metric("not positive definite".into()));
    }
    Ok(())
}

fn sub_matrix(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

struct FaceSolver<'a> {
    m: &'a DMatrix<f64>,
    inverse: Option<&'a DMatrix<f64>>,
}

impl FaceSolver<'_> {
    /// `M_SS^{-1} R` where `D` is the complement of `S`.
    fn solve(&self, support: &[usize], dropped: &[usize], rhs: DMatrix<f64>) -> Result<DMatrix<f64>> {
        match self.inverse {
            Some(pinv) if dropped.len() <= support.len() => {
                // (M_SS)^{-1} = P_SS - P_SD P_DD^{-1} P_DS with P = M^{-1}
                let mut out = sub_matrix(pinv, support, support) * &rhs;
                if !dropped.is_empty() {
                    let p_ds = sub_matrix(pinv, dropped, support);
                    let chol = sub_matrix(pinv, dropped, dropped)
                        .cholesky()
                        .ok_or_else(|| Error::Metric("inverse block not positive definite".into()))?;
                    let inner = chol.solve(&(&p_ds * &rhs));
                    out -= p_ds.transpose() * inner;
                }
                Ok(out)
            }
            _ => {
                let chol = sub_matrix(self.m, support, support)
                    .cholesky()
                    .ok_or_else(|| Error::Metric("principal block not positive definite".into()))?;
                Ok(chol.solve(&rhs))
            }
        }
    }
}

/// `(M_SS)^{-1}` for the support in its current order, updated in `O(k^2)`
/// as indices leave or join.
struct FaceInverse {
    h: DMatrix<f64>,
}

impl FaceInverse {
    fn new(solver: &FaceSolver<'_>, support: &[usize], dropped: &[usize]) -> Result<Self> {
        let h = match solver.inverse {
            Some(pinv) if dropped.is_empty() => pinv.clone(),
            _ => solver.solve(support, dropped, DMatrix::identity(support.len(), support.len()))?,
        };
        Ok(Self { h })
    }

    fn apply(&self, v: &[f64]) -> DVector<f64> {
        &self.h * DVector::from_column_slice(v)
    }

    /// Inverse of the block with row and column `r` removed.
    fn remove(&mut self, r: usize) {
        let col = self.h.column(r).clone_owned().remove_row(r);
        let hrr = self.h[(r, r)];
        let h = std::mem::replace(&mut self.h, DMatrix::zeros(0, 0));
        self.h = h.remove_row(r).remove_column(r);
        self.h.ger(-1.0 / hrr, &col, &col, 1.0);
    }

    /// Inverse of the block bordered by index `j` of `m`, appended last.
    /// `None` when the bordered block is numerically singular.
    fn append(&mut self, m: &DMatrix<f64>, support: &[usize], j: usize) -> Option<()> {
        let k = support.len();
        let col = m.column(j);
        let b = DVector::from_iterator(k, support.iter().map(|&i| col[i]));
        let hb = &self.h * &b;
        let schur = m[(j, j)] - b.dot(&hb);
        if !(schur > 0.0) {
            return None;
        }
        let h = std::mem::replace(&mut self.h, DMatrix::zeros(0, 0));
        let mut h = h.resize(k + 1, k + 1, 0.0);
        {
            let mut top = h.view_mut((0, 0), (k, k));
            top.ger(1.0 / schur, &hb, &hb, 1.0);
        }
        for i in 0..k {
            h[(i, k)] = -hb[i] / schur;
            h[(k, i)] = -hb[i] / schur;
        }
        h[(k, k)] = 1.0 / schur;
        self.h = h;
        Some(())
    }
}

/// Exact solution on the face `(S, s)`; `None` unless the multiplier is
/// positive and the signs are consistent.
fn solve_face(
    solver: &FaceSolver<'_>,
    c: &DVector<f64>,
    d: f64,
    support: &[usize],
    signs: &[f64],
    dropped: &[usize],
) -> Result<Option<(Vec<f64>, f64)>> {
    let k = support.len();
    let mut rhs = DMatrix::zeros(k, 2);
    for (r, &i) in support.iter().enumerate() {
        rhs[(r, 0)] = c[i];
        rhs[(r, 1)] = signs[r];
    }
    let sol = solver.solve(support, dropped, rhs)?;
    let (t, z) = (sol.column(0), sol.column(1));
    let s = DVector::from_column_slice(signs);
    let lambda = (s.dot(&t) - d) / s.dot(&z);
    if !(lambda > 0.0) {
        return Ok(None);
    }
    let w: Vec<f64> = (t - z * lambda).iter().copied().collect();
    if w.iter().zip(signs).any(|(v, s)| v * s < 0.0) {
        return Ok(None);
    }
    Ok(Some((w, lambda)))
}

/// Scatters a face solution into a full vector, shrinking it by the
/// rounding excess when its L1 norm lands just above `d`.
fn finish(p: usize, d: f64, support: Vec<usize>, signs: Vec<f64>, w: &[f64], lambda: f64) -> Projection {
    let mut point = DVector::zeros(p);
    for (&i, v) in support.iter().zip(w) {
        point[i] = *v;
    }
    let l1 = point.lp_norm(1);
    if l1 > d {
        point *= d / l1;
        while point.lp_norm(1) > d {
            point *= 1.0 - f64::EPSILON;
        }
    }
    Projection {
        point,
        pattern: Some(ActivePattern {
            indices: support,
            signs,
        }),
        multiplier: lambda,
    }
}

fn reverse_path(solver: &FaceSolver<'_>, x: &DVector<f64>, d: f64) -> Result<Projection> {
    let p = x.len();
    let c = solver.m * x;
    let mut support: Vec<usize> = (0..p).filter(|&i| x[i] != 0.0).collect();
    let mut dropped: Vec<usize> = (0..p).filter(|&i| x[i] == 0.0).collect();
    let mut signs: Vec<f64> = support.iter().map(|&i| x[i].signum()).collect();
    let mut w: Vec<f64> = support.iter().map(|&i| x[i]).collect();
    // dual residual c_j - M_j w on the dropped set; zero at w = x
    let mut g: Vec<f64> = vec![0.0; dropped.len()];
    let mut lambda = 0.0;
    let scale = c.amax().max(f64::MIN_POSITIVE);
    let tiny = 1e-14 * scale;
    let mut just_dropped: Option<usize> = None;
    let mut just_added: Option<usize> = None;
    let mut face = FaceInverse::new(solver, &support, &dropped)?;

    for _ in 0..(50 * p + 100) {
        let k = support.len();
        let z = face.apply(&signs);
        let slope: f64 = z.iter().zip(&signs).map(|(a, b)| a * b).sum();
        let l1: f64 = w.iter().zip(&signs).map(|(a, b)| a * b).sum();
        enum Event {
            Boundary,
            Drop(usize),
            Add(usize),
        }
        let mut step = ((l1 - d) / slope).max(0.0);
        let mut event = Event::Boundary;
        for r in 0..k {
            if z[r] * signs[r] > 0.0 && Some(support[r]) != just_added {
                let cand = (w[r] / z[r]).max(0.0);
                if cand < step {
                    step = cand;
                    event = Event::Drop(r);
                }
            }
        }
        // rate of change of the dual residual off the support
        let a: Vec<f64> = dropped
            .iter()
            .map(|&j| {
                let col = solver.m.column(j);
                support.iter().zip(z.iter()).map(|(&i, zi)| col[i] * zi).sum()
            })
            .collect();
        for (q, &j) in dropped.iter().enumerate() {
            let mut cand = f64::INFINITY;
            if a[q] > 1.0 {
                cand = cand.min(((lambda - g[q]) / (a[q] - 1.0)).max(0.0));
            }
            if a[q] < -1.0 {
                cand = cand.min(((lambda + g[q]) / (-a[q] - 1.0)).max(0.0));
            }
            if Some(j) == just_dropped && cand <= tiny {
                continue;
            }
            if cand < step {
                step = cand;
                event = Event::Add(q);
            }
        }
        for (wr, zr) in w.iter_mut().zip(z.iter()) {
            *wr -= zr * step;
        }
        for (gq, aq) in g.iter_mut().zip(&a) {
            *gq += aq * step;
        }
        lambda += step;
        just_dropped = None;
        just_added = None;
        match event {
            Event::Boundary => {
                if let Some((exact, lam)) = solve_face(solver, &c, d, &support, &signs, &dropped)? {
                    return Ok(finish(p, d, support, signs, &exact, lam));
                }
                return Ok(finish(p, d, support, signs, &w, lambda));
            }
            Event::Drop(r) => {
                face.remove(r);
                let j = support.remove(r);
                signs.remove(r);
                w.remove(r);
                let gj = c[j]
                    - support
                        .iter()
                        .zip(&w)
                        .map(|(&i, v)| solver.m[(j, i)] * v)
                        .sum::<f64>();
                dropped.push(j);
                g.push(gj);
                just_dropped = Some(j);
            }
            Event::Add(q) => {
                let j = dropped.remove(q);
                let gj = g.remove(q);
                if face.append(solver.m, &support, j).is_none() {
                    support.push(j);
                    face = FaceInverse::new(solver, &support, &dropped)?;
                    support.pop();
                }
                support.push(j);
                signs.push(gj.signum());
                w.push(0.0);
                just_added = Some(j);
            }
        }
    }
    Err(Error::Metric("projection path did not terminate".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn euclidean_examples() {
        let out = project_euclidean(&v(&[3.0, -1.0]), 2.0).unwrap();
        assert!((out - v(&[2.0, 0.0])).amax() < 1e-15);
        assert_eq!(project_euclidean(&v(&[0.2, 0.3]), 1.0).unwrap(), v(&[0.2, 0.3]));
        assert!((project_euclidean(&v(&[1.0, 1.0]), 1.0).unwrap() - v(&[0.5, 0.5])).amax() < 1e-15);
    }

    #[test]
    fn identity_metric_examples() {
        let eye = DMatrix::identity(2, 2);
        let x = v(&[2.0, 0.0]);
        let w = project(ProjectionProblem { point: &x, metric: &eye, radius: 1.0 }).unwrap();
        assert!((w - v(&[1.0, 0.0])).amax() < 1e-14);
        let inside = v(&[0.3, -0.4]);
        let w = project(ProjectionProblem { point: &inside, metric: &eye, radius: 1.0 }).unwrap();
        assert_eq!(w, inside);
    }

    #[test]
    fn rejects_bad_inputs() {
        let x = v(&[2.0, 0.0]);
        let eye = DMatrix::identity(2, 2);
        assert!(matches!(
            project(ProjectionProblem { point: &x, metric: &eye, radius: 0.0 }),
            Err(Error::Domain(_))
        ));
        let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            project(ProjectionProblem { point: &x, metric: &indefinite, radius: 1.0 }),
            Err(Error::Metric(_))
        ));
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(
            project(ProjectionProblem { point: &x, metric: &asym, radius: 1.0 }),
            Err(Error::Metric(_))
        ));
    }

    #[test]
    fn known_inverse_gives_same_answer() {
        let m = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.0, 0.2, 0.1, 0.2, 1.5]);
        let inv = m.clone().try_inverse().unwrap();
        for x in [v(&[1.5, -2.0, 0.7]), v(&[0.0, 3.0, -0.1]), v(&[0.4, 0.4, 0.4])] {
            let prob = ProjectionProblem { point: &x, metric: &m, radius: 1.0 };
            let direct = project_unchecked(prob, None).unwrap();
            let via_inverse = project_unchecked(prob, Some(&inv)).unwrap();
            assert!((direct.point.clone() - via_inverse.point).amax() < 1e-12);
            assert!(kkt_residual(&x, &m, 1.0, &direct.point) < 1e-10);
        }
    }
}
