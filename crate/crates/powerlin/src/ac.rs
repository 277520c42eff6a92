//! Ground-truth AC machinery: exact branch flow/loss formulas, the nodal
//! admittance matrix, and a full Newton-Raphson power flow in polar form.
//!
//! The power flow holds PV-bus voltage magnitudes at their setpoints, pins
//! the slack bus at its setpoint magnitude and angle zero, and enforces
//! neither reactive limits nor voltage bounds (the validation protocol this
//! crate implements ignores both).

use crate::linalg::{DMatrix, LuFactors};
use crate::model::{BusKind, Network};
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AcError {
    #[error("power flow did not converge in {iterations} iterations (max mismatch {mismatch:.3e})")]
    NonConvergence { iterations: usize, mismatch: f64 },
    #[error("singular Jacobian at iteration {0}")]
    SingularJacobian(usize),
    #[error("network has no slack bus")]
    NoSlack,
    #[error("dispatch length {got} does not match generator count {want}")]
    DispatchLength { got: usize, want: usize },
}

/// Sparse complex nodal admittance matrix (row adjacency).
#[derive(Debug, Clone)]
pub struct AdmittanceMatrix {
    pub n: usize,
    rows: Vec<Vec<(usize, Complex64)>>,
}

impl AdmittanceMatrix {
    pub fn get(&self, i: usize, k: usize) -> Complex64 {
        self.rows[i]
            .iter()
            .find(|(c, _)| *c == k)
            .map(|(_, v)| *v)
            .unwrap_or_default()
    }

    pub fn row(&self, i: usize) -> &[(usize, Complex64)] {
        &self.rows[i]
    }

    /// I = Y V
    pub fn mul(&self, v: &[Complex64]) -> Vec<Complex64> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(c, y)| y * v[c]).sum())
            .collect()
    }

    pub fn off_diagonal_pairs(&self) -> usize {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, row)| row.iter().filter(|(c, _)| *c > i).count())
            .sum()
    }
}

/// Exact from-side active flow, plain series line:
/// P = g(V_i² − V_iV_j cos Δθ) − b V_iV_j sin Δθ.
pub fn exact_branch_flow(g: f64, b: f64, v_i: f64, v_j: f64, th_i: f64, th_j: f64) -> f64 {
    let dth = th_i - th_j;
    g * (v_i * v_i - v_i * v_j * dth.cos()) - b * v_i * v_j * dth.sin()
}

/// Exact active loss: g(V_i² + V_j² − 2 V_iV_j cos Δθ).
/// Equals the sum of the two directed flows; nonnegative for g ≥ 0.
pub fn exact_branch_loss(g: f64, v_i: f64, v_j: f64, th_i: f64, th_j: f64) -> f64 {
    let dth = th_i - th_j;
    g * (v_i * v_i + v_j * v_j - 2.0 * v_i * v_j * dth.cos())
}

/// Standard Pi-model construction, tap ratio and phase shift on the from
/// side, bus shunts on the diagonal.
pub fn build_admittance(net: &Network) -> AdmittanceMatrix {
    let n = net.buses.len();
    let mut dense: std::collections::HashMap<(usize, usize), Complex64> = Default::default();
    for br in net.in_service_branches() {
        let (Some(f), Some(t)) = (net.bus_index(br.from_bus), net.bus_index(br.to_bus)) else {
            continue;
        };
        let ys = Complex64::new(1.0, 0.0) / Complex64::new(br.r, br.x);
        let bc = Complex64::new(0.0, br.b_charge / 2.0);
        let a = Complex64::from_polar(br.tap, br.shift);
        *dense.entry((f, f)).or_default() += (ys + bc) / (br.tap * br.tap);
        *dense.entry((t, t)).or_default() += ys + bc;
        *dense.entry((f, t)).or_default() += -ys / a.conj();
        *dense.entry((t, f)).or_default() += -ys / a;
    }
    for (i, b) in net.buses.iter().enumerate() {
        *dense.entry((i, i)).or_default() += Complex64::new(b.shunt_g, b.shunt_b);
    }
    let mut rows = vec![Vec::new(); n];
    for ((i, k), y) in dense {
        rows[i].push((k, y));
    }
    for row in &mut rows {
        row.sort_by_key(|(c, _)| *c);
    }
    AdmittanceMatrix { n, rows }
}

/// Converged operating point of a full AC power flow.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    pub v_mag: Vec<f64>,
    pub v_ang: Vec<f64>,
    /// Per in-service branch, from- and to-side active flows (full Pi model).
    pub branch_flow_from: Vec<f64>,
    pub branch_flow_to: Vec<f64>,
    pub branch_loss: Vec<f64>,
    /// Net active injection picked up at the slack bus (generation minus
    /// load at that bus equals this value).
    pub slack_injection: f64,
    pub iterations: usize,
    pub max_mismatch: f64,
    /// Max |mismatch| before each Newton step, plus the final residual.
    pub mismatch_history: Vec<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct PfConfig {
    pub tolerance: Option<f64>,
    pub max_iterations: Option<usize>,
    /// Warm start (v_mag, v_ang) per bus; flat start when absent.
    pub warm_start: Option<(Vec<f64>, Vec<f64>)>,
}

impl PfConfig {
    fn tolerance(&self) -> f64 {
        self.tolerance.unwrap_or(1e-8)
    }

    fn max_iterations(&self) -> usize {
        self.max_iterations.unwrap_or(30)
    }
}

/// Newton-Raphson power flow at a fixed dispatch.
///
/// `dispatch` and `v_setpoints` are indexed like `net.generators`
/// (out-of-service units ignored). Slack-bus generation is free; every
/// other generator injects its dispatch value.
pub fn solve_power_flow(
    net: &Network,
    dispatch: &[f64],
    v_setpoints: &[f64],
    cfg: &PfConfig,
) -> Result<SteadyState, AcError> {
    let n = net.buses.len();
    if dispatch.len() != net.generators.len() || v_setpoints.len() != net.generators.len() {
        return Err(AcError::DispatchLength { got: dispatch.len(), want: net.generators.len() });
    }
    let slack = net.slack_index().ok_or(AcError::NoSlack)?;
    let y = build_admittance(net);

    // scheduled injections (slack's P is overwritten by the solve)
    let mut p_sched: Vec<f64> = net.buses.iter().map(|b| -b.p_load).collect();
    let q_sched: Vec<f64> = net.buses.iter().map(|b| -b.q_load).collect();
    let mut vset_bus: Vec<Option<f64>> = vec![None; n];
    for (gi, g) in net.generators.iter().enumerate() {
        if !g.in_service {
            continue;
        }
        let Some(bi) = net.bus_index(g.bus) else { continue };
        p_sched[bi] += dispatch[gi];
        if vset_bus[bi].is_none() {
            vset_bus[bi] = Some(v_setpoints[gi]);
        }
    }

    let (mut vm, mut va) = match &cfg.warm_start {
        Some((wm, wa)) => (wm.clone(), wa.clone()),
        None => (vec![1.0; n], vec![0.0; n]),
    };
    for (i, b) in net.buses.iter().enumerate() {
        match b.kind {
            BusKind::Slack | BusKind::Pv => {
                vm[i] = vset_bus[i].unwrap_or(b.v_mag);
            }
            BusKind::Pq => {}
        }
    }
    va[slack] = 0.0;

    let ang_idx: Vec<usize> =
        (0..n).filter(|&i| net.buses[i].kind != BusKind::Slack).collect();
    let mag_idx: Vec<usize> =
        (0..n).filter(|&i| net.buses[i].kind == BusKind::Pq).collect();
    let na = ang_idx.len();
    let nm = mag_idx.len();

    let mut iterations = 0usize;
    let mut max_mismatch;
    let mut mismatch_history = Vec::new();
    loop {
        let v: Vec<Complex64> =
            vm.iter().zip(&va).map(|(&m, &a)| Complex64::from_polar(m, a)).collect();
        let ibus = y.mul(&v);
        let s: Vec<Complex64> =
            v.iter().zip(&ibus).map(|(vi, ii)| vi * ii.conj()).collect();
        let mut f = vec![0.0; na + nm];
        for (k, &i) in ang_idx.iter().enumerate() {
            f[k] = p_sched[i] - s[i].re;
        }
        for (k, &i) in mag_idx.iter().enumerate() {
            f[na + k] = q_sched[i] - s[i].im;
        }
        max_mismatch = f.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
        mismatch_history.push(max_mismatch);
        if max_mismatch <= cfg.tolerance() {
            break;
        }
        if iterations >= cfg.max_iterations() {
            return Err(AcError::NonConvergence { iterations, mismatch: max_mismatch });
        }
        iterations += 1;

        let mut pos_a = vec![usize::MAX; n];
        for (k, &i) in ang_idx.iter().enumerate() {
            pos_a[i] = k;
        }
        let mut pos_m = vec![usize::MAX; n];
        for (k, &i) in mag_idx.iter().enumerate() {
            pos_m[i] = k;
        }
        let mut jac = DMatrix::zeros(na + nm, na + nm);
        for i in 0..n {
            let (pi, qi) = (s[i].re, s[i].im);
            for &(k, yik) in y.row(i) {
                let (gik, bik) = (yik.re, yik.im);
                let thik = va[i] - va[k];
                let (sin, cos) = thik.sin_cos();
                if k == i {
                    let dp_dth = -qi - bik * vm[i] * vm[i];
                    let dp_dv = pi / vm[i] + gik * vm[i];
                    let dq_dth = pi - gik * vm[i] * vm[i];
                    let dq_dv = qi / vm[i] - bik * vm[i];
                    set_block(&mut jac, &pos_a, &pos_m, na, i, i, dp_dth, dp_dv, dq_dth, dq_dv);
                } else {
                    let vv = vm[i] * vm[k];
                    let dp_dth = vv * (gik * sin - bik * cos);
                    let dp_dv = vm[i] * (gik * cos + bik * sin);
                    let dq_dth = -vv * (gik * cos + bik * sin);
                    let dq_dv = vm[i] * (gik * sin - bik * cos);
                    set_block(&mut jac, &pos_a, &pos_m, na, i, k, dp_dth, dp_dv, dq_dth, dq_dv);
                }
            }
        }
        let lu = LuFactors::factor(&jac).map_err(|_| AcError::SingularJacobian(iterations))?;
        let dx = lu.solve(&f);
        for (k, &i) in ang_idx.iter().enumerate() {
            va[i] += dx[k];
        }
        for (k, &i) in mag_idx.iter().enumerate() {
            vm[i] += dx[na + k];
        }
    }

    // branch quantities from the full Pi model
    let v: Vec<Complex64> =
        vm.iter().zip(&va).map(|(&m, &a)| Complex64::from_polar(m, a)).collect();
    let mut flow_from = Vec::new();
    let mut flow_to = Vec::new();
    let mut loss = Vec::new();
    for br in net.in_service_branches() {
        let (Some(f), Some(t)) = (net.bus_index(br.from_bus), net.bus_index(br.to_bus)) else {
            continue;
        };
        let ys = Complex64::new(1.0, 0.0) / Complex64::new(br.r, br.x);
        let bc = Complex64::new(0.0, br.b_charge / 2.0);
        let a = Complex64::from_polar(br.tap, br.shift);
        let i_f = (ys + bc) / (br.tap * br.tap) * v[f] - ys / a.conj() * v[t];
        let i_t = -ys / a * v[f] + (ys + bc) * v[t];
        let pf = (v[f] * i_f.conj()).re;
        let pt = (v[t] * i_t.conj()).re;
        flow_from.push(pf);
        flow_to.push(pt);
        loss.push(pf + pt);
    }
    let ibus = y.mul(&v);
    let s_slack = (v[slack] * ibus[slack].conj()).re;
    Ok(SteadyState {
        v_mag: vm,
        v_ang: va,
        branch_flow_from: flow_from,
        branch_flow_to: flow_to,
        branch_loss: loss,
        slack_injection: s_slack,
        iterations,
        max_mismatch,
        mismatch_history,
    })
}

#[allow(clippy::too_many_arguments)]
fn set_block(
    jac: &mut DMatrix,
    pos_a: &[usize],
    pos_m: &[usize],
    na: usize,
    i: usize,
    k: usize,
    dp_dth: f64,
    dp_dv: f64,
    dq_dth: f64,
    dq_dv: f64,
) {
    let (ra, rm) = (pos_a[i], pos_m[i]);
    let (ca, cm) = (pos_a[k], pos_m[k]);
    if ra != usize::MAX && ca != usize::MAX {
        jac.add(ra, ca, dp_dth);
    }
    if ra != usize::MAX && cm != usize::MAX {
        jac.add(ra, na + cm, dp_dv);
    }
    if rm != usize::MAX && ca != usize::MAX {
        jac.add(na + rm, ca, dq_dth);
    }
    if rm != usize::MAX && cm != usize::MAX {
        jac.add(na + rm, na + cm, dq_dv);
    }
}

/// Case-file voltage setpoints, indexed like `net.generators`.
pub fn case_setpoints(net: &Network) -> Vec<f64> {
    net.generators.iter().map(|g| g.v_set).collect()
}
