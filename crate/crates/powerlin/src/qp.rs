//! Convex quadratic programming over box bounds and linear equalities:
//!
//! ```text
//!     minimize   1/2 x' diag(q) x + c' x
//!     subject to A x = b,   l <= x <= u
//! ```
//!
//! Solved with a Mehrotra predictor-corrector primal-dual interior point
//! method on the dense KKT system. Exactly pinned variables (l == u) are
//! eliminated by substitution before the solve. Runs are deterministic:
//! identical inputs give bit-identical solutions.

use crate::linalg::{DMatrix, LuFactors};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum QpError {
    #[error("problem is infeasible (constraint violation at least {violation:.3e})")]
    Infeasible { violation: f64 },
    #[error("iteration limit reached after {iterations} iterations (mu {mu:.3e})")]
    IterLimit { iterations: usize, mu: f64 },
    #[error("objective is not convex: {0}")]
    NonConvex(String),
    #[error("KKT system is singular at iteration {0}")]
    Singular(usize),
    #[error("bad problem data: {0}")]
    BadData(String),
}

/// Sparse equality row: Σ coef·x = rhs.
pub type EqualityRow = (Vec<(usize, f64)>, f64);

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub q_diag: Vec<f64>,
    pub c: Vec<f64>,
    pub equalities: Vec<EqualityRow>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct KktResiduals {
    pub stationarity: f64,
    pub primal: f64,
    pub complementarity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: Vec<f64>,
    /// Equality multipliers.
    pub y: Vec<f64>,
    pub z_lower: Vec<f64>,
    pub z_upper: Vec<f64>,
    pub iterations: usize,
    pub kkt: KktResiduals,
}

/// Independent KKT re-check, written against the problem data only (no
/// solver state): stationarity Qx + c − A'y − z_l + z_u, primal Ax − b and
/// bound violations, elementwise complementarity (x−l)·z_l and (u−x)·z_u.
pub fn kkt_residuals(p: &QpProblem, x: &[f64], y: &[f64], zl: &[f64], zu: &[f64]) -> KktResiduals {
    let n = p.c.len();
    let mut rd = vec![0.0; n];
    for i in 0..n {
        rd[i] = p.q_diag[i] * x[i] + p.c[i] - zl[i] + zu[i];
    }
    for (row, (terms, _)) in p.equalities.iter().enumerate() {
        for &(i, a) in terms {
            rd[i] -= a * y[row];
        }
    }
    let mut primal = 0.0f64;
    for (terms, b) in &p.equalities {
        let ax: f64 = terms.iter().map(|&(i, a)| a * x[i]).sum();
        primal = primal.max((ax - b).abs());
    }
    let mut compl = 0.0f64;
    for i in 0..n {
        if p.lower[i].is_finite() {
            primal = primal.max(p.lower[i] - x[i]);
            compl = compl.max(((x[i] - p.lower[i]) * zl[i]).abs());
        }
        if p.upper[i].is_finite() {
            primal = primal.max(x[i] - p.upper[i]);
            compl = compl.max(((p.upper[i] - x[i]) * zu[i]).abs());
        }
    }
    KktResiduals {
        stationarity: rd.iter().fold(0.0f64, |m, v| m.max(v.abs())),
        primal: primal.max(0.0),
        complementarity: compl,
    }
}

pub fn solve_qp(p: &QpProblem) -> Result<QpSolution, QpError> {
    let n = p.c.len();
    if p.q_diag.len() != n || p.lower.len() != n || p.upper.len() != n {
        return Err(QpError::BadData("length mismatch across problem vectors".into()));
    }
    if let Some(i) = p.q_diag.iter().position(|&q| q < 0.0) {
        return Err(QpError::NonConvex(format!("q[{i}] = {}", p.q_diag[i])));
    }
    for i in 0..n {
        if p.lower[i] > p.upper[i] {
            return Err(QpError::Infeasible { violation: p.lower[i] - p.upper[i] });
        }
    }

    // eliminate exactly pinned variables
    let pinned: Vec<bool> = (0..n).map(|i| p.lower[i] == p.upper[i]).collect();
    let keep: Vec<usize> = (0..n).filter(|&i| !pinned[i]).collect();
    let pos: Vec<usize> = {
        let mut pos = vec![usize::MAX; n];
        for (k, &i) in keep.iter().enumerate() {
            pos[i] = k;
        }
        pos
    };
    let nr = keep.len();
    let q: Vec<f64> = keep.iter().map(|&i| p.q_diag[i]).collect();
    let c: Vec<f64> = keep.iter().map(|&i| p.c[i]).collect();
    let lo: Vec<f64> = keep.iter().map(|&i| p.lower[i]).collect();
    let hi: Vec<f64> = keep.iter().map(|&i| p.upper[i]).collect();
    let mut eqs: Vec<EqualityRow> = Vec::with_capacity(p.equalities.len());
    for (terms, b) in &p.equalities {
        let mut rhs = *b;
        let mut row = Vec::new();
        for &(i, a) in terms {
            if pinned[i] {
                rhs -= a * p.lower[i];
            } else {
                row.push((pos[i], a));
            }
        }
        eqs.push((row, rhs));
    }

    match ip_solve(&q, &c, &eqs, &lo, &hi, 100) {
        Ok((xr, y, zlr, zur, iterations)) => {
            let mut x = vec![0.0; n];
            let mut zl = vec![0.0; n];
            let mut zu = vec![0.0; n];
            for (k, &i) in keep.iter().enumerate() {
                x[i] = xr[k];
                zl[i] = zlr[k];
                zu[i] = zur[k];
            }
            for i in 0..n {
                if pinned[i] {
                    x[i] = p.lower[i];
                }
            }
            let kkt = kkt_residuals_reduced(p, &pinned, &x, &y, &zl, &zu);
            Ok(QpSolution { x, y, z_lower: zl, z_upper: zu, iterations, kkt })
        }
        Err(NotConverged { iterations, mu }) => {
            // classify: elastic phase-1 bounds the best achievable violation
            let viol = elastic_violation(&eqs, &lo, &hi, nr)?;
            if viol > 1e-7 {
                Err(QpError::Infeasible { violation: viol })
            } else {
                Err(QpError::IterLimit { iterations, mu })
            }
        }
    }
}

/// KKT residuals skipping pinned variables' stationarity rows (their
/// multipliers were eliminated with them).
fn kkt_residuals_reduced(
    p: &QpProblem,
    pinned: &[bool],
    x: &[f64],
    y: &[f64],
    zl: &[f64],
    zu: &[f64],
) -> KktResiduals {
    let n = p.c.len();
    let mut rd = vec![0.0; n];
    for i in 0..n {
        rd[i] = p.q_diag[i] * x[i] + p.c[i] - zl[i] + zu[i];
    }
    for (row, (terms, _)) in p.equalities.iter().enumerate() {
        for &(i, a) in terms {
            rd[i] -= a * y[row];
        }
    }
    let mut stat = 0.0f64;
    for i in 0..n {
        if !pinned[i] {
            stat = stat.max(rd[i].abs());
        }
    }
    let mut primal = 0.0f64;
    for (terms, b) in &p.equalities {
        let ax: f64 = terms.iter().map(|&(i, a)| a * x[i]).sum();
        primal = primal.max((ax - b).abs());
    }
    let mut compl = 0.0f64;
    for i in 0..n {
        if pinned[i] {
            continue;
        }
        if p.lower[i].is_finite() {
            primal = primal.max(p.lower[i] - x[i]);
            compl = compl.max(((x[i] - p.lower[i]) * zl[i]).abs());
        }
        if p.upper[i].is_finite() {
            primal = primal.max(x[i] - p.upper[i]);
            compl = compl.max(((p.upper[i] - x[i]) * zu[i]).abs());
        }
    }
    KktResiduals { stationarity: stat, primal: primal.max(0.0), complementarity: compl }
}

struct NotConverged {
    iterations: usize,
    mu: f64,
}

type IpResult = Result<(Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>, usize), NotConverged>;

#[allow(clippy::too_many_arguments)]
fn ip_solve(
    q: &[f64],
    c: &[f64],
    eqs: &[EqualityRow],
    lo: &[f64],
    hi: &[f64],
    max_iterations: usize,
) -> IpResult {
    let n = c.len();
    let m = eqs.len();
    let has_lo: Vec<bool> = lo.iter().map(|v| v.is_finite()).collect();
    let has_hi: Vec<bool> = hi.iter().map(|v| v.is_finite()).collect();
    let nc = has_lo.iter().filter(|&&b| b).count() + has_hi.iter().filter(|&&b| b).count();

    // start: centered in the box where possible
    let mut x = vec![0.0; n];
    let mut sl = vec![1.0; n];
    let mut su = vec![1.0; n];
    for i in 0..n {
        match (has_lo[i], has_hi[i]) {
            (true, true) => {
                let w = (hi[i] - lo[i]) / 2.0;
                x[i] = lo[i] + w;
                sl[i] = w.max(1e-8);
                su[i] = w.max(1e-8);
            }
            (true, false) => {
                x[i] = lo[i] + 1.0;
                sl[i] = 1.0;
            }
            (false, true) => {
                x[i] = hi[i] - 1.0;
                su[i] = 1.0;
            }
            (false, false) => x[i] = 0.0,
        }
    }
    let mut y = vec![0.0; m];
    let mut zl: Vec<f64> = has_lo.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    let mut zu: Vec<f64> = has_hi.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();

    let scale_g = 1.0 + c.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let scale_b = 1.0 + eqs.iter().fold(0.0f64, |a, (_, b)| a.max(b.abs()));
    let tol_rd = 1e-9 * scale_g;
    let tol_rp = 1e-11 * scale_b;
    let tol_mu = 1e-11 * scale_g;

    let mut mu = 1.0;
    for iteration in 0..max_iterations {
        // residuals
        let mut rd = vec![0.0; n];
        for i in 0..n {
            rd[i] = q[i] * x[i] + c[i] - zl[i] + zu[i];
        }
        for (row, (terms, _)) in eqs.iter().enumerate() {
            for &(i, a) in terms {
                rd[i] -= a * y[row];
            }
        }
        let mut rp = vec![0.0; m];
        for (row, (terms, b)) in eqs.iter().enumerate() {
            rp[row] = terms.iter().map(|&(i, a)| a * x[i]).sum::<f64>() - b;
        }
        mu = if nc > 0 {
            (dot_masked(&sl, &zl, &has_lo) + dot_masked(&su, &zu, &has_hi)) / nc as f64
        } else {
            0.0
        };
        let rd_max = rd.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let rp_max = rp.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if rd_max <= tol_rd && rp_max <= tol_rp && mu <= tol_mu {
            return Ok((x, y, zl, zu, iteration));
        }

        // KKT matrix [Q + D, -A'; A, 0]
        let dim = n + m;
        let mut k = DMatrix::zeros(dim, dim);
        for i in 0..n {
            let mut d = q[i];
            if has_lo[i] {
                d += zl[i] / sl[i];
            }
            if has_hi[i] {
                d += zu[i] / su[i];
            }
            k.set(i, i, d);
        }
        // rows may carry duplicate variable indices; coefficients accumulate
        for (row, (terms, _)) in eqs.iter().enumerate() {
            for &(i, a) in terms {
                k.add(i, n + row, -a);
                k.add(n + row, i, a);
            }
        }
        let Ok(lu) = LuFactors::factor(&k) else {
            return Err(NotConverged { iterations: iteration, mu });
        };

        let newton = |lu: &LuFactors,
                      sig_mu: f64,
                      corr_l: &[f64],
                      corr_u: &[f64]|
         -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
            let mut rhs = vec![0.0; dim];
            let mut rcl = vec![0.0; n];
            let mut rcu = vec![0.0; n];
            for i in 0..n {
                if has_lo[i] {
                    rcl[i] = sl[i] * zl[i] - sig_mu + corr_l[i];
                }
                if has_hi[i] {
                    rcu[i] = su[i] * zu[i] - sig_mu + corr_u[i];
                }
                rhs[i] = -rd[i]
                    - if has_lo[i] { rcl[i] / sl[i] } else { 0.0 }
                    + if has_hi[i] { rcu[i] / su[i] } else { 0.0 };
            }
            for row in 0..m {
                rhs[n + row] = -rp[row];
            }
            let sol = lu.solve(&rhs);
            let dx = sol[..n].to_vec();
            let dy = sol[n..].to_vec();
            let mut dsl = vec![0.0; n];
            let mut dsu = vec![0.0; n];
            let mut dzl = vec![0.0; n];
            let mut dzu = vec![0.0; n];
            for i in 0..n {
                if has_lo[i] {
                    dsl[i] = dx[i];
                    dzl[i] = -(rcl[i] + zl[i] * dsl[i]) / sl[i];
                }
                if has_hi[i] {
                    dsu[i] = -dx[i];
                    dzu[i] = -(rcu[i] + zu[i] * dsu[i]) / su[i];
                }
            }
            (dx, dy, dsl, dsu, dzl, dzu)
        };

        let zeros = vec![0.0; n];
        // affine predictor
        let (_dx_a, _dy_a, dsl_a, dsu_a, dzl_a, dzu_a) = newton(&lu, 0.0, &zeros, &zeros);
        let ap = step_limit(&sl, &dsl_a, &has_lo).min(step_limit(&su, &dsu_a, &has_hi));
        let ad = step_limit(&zl, &dzl_a, &has_lo).min(step_limit(&zu, &dzu_a, &has_hi));
        let mu_aff = if nc > 0 {
            (affine_product(&sl, &dsl_a, &zl, &dzl_a, ap, ad, &has_lo)
                + affine_product(&su, &dsu_a, &zu, &dzu_a, ap, ad, &has_hi))
                / nc as f64
        } else {
            0.0
        };
        let sigma = if mu > 0.0 { (mu_aff / mu).powi(3).clamp(0.0, 1.0) } else { 0.1 };

        // corrector
        let corr_l: Vec<f64> = dsl_a.iter().zip(&dzl_a).map(|(a, b)| a * b).collect();
        let corr_u: Vec<f64> = dsu_a.iter().zip(&dzu_a).map(|(a, b)| a * b).collect();
        let (dx, dy, dsl, dsu, dzl, dzu) = newton(&lu, sigma * mu, &corr_l, &corr_u);
        let ap = 0.995 * step_limit(&sl, &dsl, &has_lo).min(step_limit(&su, &dsu, &has_hi));
        let ad = 0.995 * step_limit(&zl, &dzl, &has_lo).min(step_limit(&zu, &dzu, &has_hi));
        let a = ap.min(ad).min(1.0);
        for i in 0..n {
            x[i] += a * dx[i];
            sl[i] += a * dsl[i];
            su[i] += a * dsu[i];
            zl[i] += a * dzl[i];
            zu[i] += a * dzu[i];
        }
        for (row, dyr) in dy.iter().enumerate() {
            y[row] += a * dyr;
        }
    }
    Err(NotConverged { iterations: max_iterations, mu })
}

fn dot_masked(a: &[f64], b: &[f64], mask: &[bool]) -> f64 {
    a.iter()
        .zip(b)
        .zip(mask)
        .filter(|&(_, &m)| m)
        .map(|((x, y), _)| x * y)
        .sum()
}

fn affine_product(
    s: &[f64],
    ds: &[f64],
    z: &[f64],
    dz: &[f64],
    ap: f64,
    ad: f64,
    mask: &[bool],
) -> f64 {
    s.iter()
        .zip(ds)
        .zip(z.iter().zip(dz))
        .zip(mask)
        .filter(|&(_, &m)| m)
        .map(|(((s, ds), (z, dz)), _)| (s + ap * ds) * (z + ad * dz))
        .sum()
}

fn step_limit(v: &[f64], dv: &[f64], mask: &[bool]) -> f64 {
    let mut a = 1.0f64;
    for i in 0..v.len() {
        if mask[i] && dv[i] < 0.0 {
            a = a.min(-v[i] / dv[i]);
        }
    }
    a
}

/// Phase-1 elastic feasibility: minimize Σ(t⁺ + t⁻) with
/// A x + t⁺ − t⁻ = b over the box. The optimum is a lower bound on the
/// total constraint violation of the original problem.
fn elastic_violation(
    eqs: &[EqualityRow],
    lo: &[f64],
    hi: &[f64],
    n: usize,
) -> Result<f64, QpError> {
    let m = eqs.len();
    let total = n + 2 * m;
    let mut q = vec![0.0; total];
    // tiny curvature keeps the LP's KKT system comfortably regular
    for qi in q.iter_mut().skip(n) {
        *qi = 1e-9;
    }
    let mut c = vec![0.0; total];
    for ci in c.iter_mut().skip(n) {
        *ci = 1.0;
    }
    let mut lo2 = lo.to_vec();
    let mut hi2 = hi.to_vec();
    lo2.extend(std::iter::repeat_n(0.0, 2 * m));
    hi2.extend(std::iter::repeat_n(f64::INFINITY, 2 * m));
    let eqs2: Vec<EqualityRow> = eqs
        .iter()
        .enumerate()
        .map(|(row, (terms, b))| {
            let mut t = terms.clone();
            t.push((n + 2 * row, 1.0));
            t.push((n + 2 * row + 1, -1.0));
            (t, *b)
        })
        .collect();
    match ip_solve(&q, &c, &eqs2, &lo2, &hi2, 100) {
        Ok((x, ..)) => Ok(x[n..].iter().sum()),
        Err(nc) => Err(QpError::IterLimit { iterations: nc.iterations, mu: nc.mu }),
    }
}
