//! Linearized optimal power flow: problem assembly over a
//! [`LinearFlowModel`], the interior-point solve, and the loss-feedback
//! iteration that turns method 1 into methods 6 and 7.

use crate::linear::{
    build_model, recover_state, LinearError, LinearFlowModel, Method,
};
use crate::model::Network;
use crate::qp::{solve_qp, KktResiduals, QpError, QpProblem};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OpfError {
    #[error(transparent)]
    Linear(#[from] LinearError),
    #[error(transparent)]
    Solver(#[from] QpError),
    #[error("inconsistent model: {0}")]
    InconsistentModel(String),
    #[error("method {0} is not solvable by this routine")]
    WrongMethod(u8),
}

/// Assembled QP plus the model it came from.
#[derive(Debug, Clone)]
pub struct OpfProblem {
    pub qp: QpProblem,
    pub model: LinearFlowModel,
    /// Constant cost offset (sum of c0 terms), currency/hr.
    pub cost_offset: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OpfStatus {
    Optimal,
    Infeasible,
    IterLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpfSolution {
    pub method: Method,
    pub status: OpfStatus,
    /// Per in-service generator dispatch (p.u.), model order.
    pub pg: Vec<f64>,
    /// Full variable vector in the model's space.
    pub x: Vec<f64>,
    pub v_mag: Vec<f64>,
    pub v_ang: Vec<f64>,
    /// Model-implied from-side branch flows at the solution (p.u.).
    pub branch_flows: Vec<f64>,
    /// Objective at the solved dispatch, currency/hr.
    pub objective: f64,
    pub kkt: KktResiduals,
    pub qp_iterations: usize,
}

/// Build the QP for a model: one balance equality per bus, box bounds and
/// pins from the variable space, quadratic-diagonal cost in per-unit
/// generator variables (cost(p.u.) = c2·(S·Pg)² + c1·(S·Pg) + c0).
pub fn assemble_opf(
    model: &LinearFlowModel,
    net: &Network,
    extra_loads: Option<&[f64]>,
) -> Result<OpfProblem, OpfError> {
    let n = model.space.len();
    if let Some(extra) = extra_loads {
        if extra.len() != net.buses.len() {
            return Err(OpfError::InconsistentModel(format!(
                "extra_loads has {} entries for {} buses",
                extra.len(),
                net.buses.len()
            )));
        }
    }
    let mut lower = model.space.lower.clone();
    let mut upper = model.space.upper.clone();
    for (i, pin) in model.space.pinned.iter().enumerate() {
        if let Some(v) = pin {
            lower[i] = *v;
            upper[i] = *v;
        }
    }
    let mut equalities = Vec::with_capacity(model.balances.len());
    for bal in &model.balances {
        let mut terms = bal.lhs.terms.clone();
        let mut rhs = bal.rhs - bal.lhs.constant;
        if let Some(extra) = extra_loads {
            let e = extra[bal.bus];
            if e != 0.0 {
                rhs -= e * bal.extra_load_scale;
                if let Some(u) = bal.extra_load_var {
                    // method-5 PQ bus: the U coefficient tracks total load
                    terms.push((u, -e));
                }
            }
        }
        equalities.push((terms, rhs));
    }
    let base = net.base_mva;
    let mut q_diag = vec![0.0; n];
    let mut c = vec![0.0; n];
    let mut cost_offset = 0.0;
    let gens: Vec<&crate::model::Generator> =
        net.active_generators().map(|(_, g)| g).collect();
    if gens.len() != model.pg_var.len() {
        return Err(OpfError::InconsistentModel(
            "model generator count differs from network".into(),
        ));
    }
    for (g, &xi) in gens.iter().zip(&model.pg_var) {
        q_diag[xi] = 2.0 * g.cost.c2() * base * base;
        c[xi] = g.cost.c1() * base;
        cost_offset += g.cost.c0();
    }
    Ok(OpfProblem {
        qp: QpProblem { q_diag, c, equalities, lower, upper },
        model: model.clone(),
        cost_offset,
    })
}

/// Solve an assembled problem and recover the physical state.
pub fn solve_opf(problem: &OpfProblem, net: &Network) -> Result<OpfSolution, OpfError> {
    let sol = solve_qp(&problem.qp)?;
    let model = &problem.model;
    let pg: Vec<f64> = model.pg_var.iter().map(|&i| sol.x[i]).collect();
    let (v_mag, v_ang) = recover_state(model, &sol.x)?;
    let branch_flows = crate::linear::branch_flows_at(model, &sol.x)?;
    let gens: Vec<&crate::model::Generator> =
        net.active_generators().map(|(_, g)| g).collect();
    let objective: f64 = gens
        .iter()
        .zip(&pg)
        .map(|(g, &p)| g.cost.cost(p * net.base_mva))
        .sum();
    Ok(OpfSolution {
        method: model.method,
        status: OpfStatus::Optimal,
        pg,
        x: sol.x,
        v_mag,
        v_ang,
        branch_flows,
        objective,
        kkt: sol.kkt,
        qp_iterations: sol.iterations,
    })
}

/// Build, assemble, and solve one of the five linear methods.
pub fn run_method(method: Method, net: &Network) -> Result<OpfSolution, OpfError> {
    if method.is_iterative() {
        return Err(OpfError::WrongMethod(method.id()));
    }
    let model = build_model(method, net)?;
    let problem = assemble_opf(&model, net, None)?;
    solve_opf(&problem, net)
}

/// Quadratic loss estimate of method 6: g·(θ_i − θ_j)² per branch.
pub fn estimate_loss_m6(prev: &OpfSolution, net: &Network) -> Vec<f64> {
    net.in_service_branches()
        .filter_map(|br| {
            let f = net.bus_index(br.from_bus)?;
            let t = net.bus_index(br.to_bus)?;
            let (g, _) = br.series_admittance().ok()?;
            let dth = prev.v_ang[f] - prev.v_ang[t];
            Some(g * dth * dth)
        })
        .collect()
}

/// Flow-proportional loss estimate of method 7: (α·P)²·r per branch.
pub fn estimate_loss_m7(prev: &OpfSolution, net: &Network, alpha: &[f64]) -> Vec<f64> {
    net.in_service_branches()
        .zip(&prev.branch_flows)
        .zip(alpha)
        .map(|((br, &p), &a)| (a * p).powi(2) * br.r)
        .collect()
}

/// How an estimated branch loss is charged to its terminal buses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LossSplit {
    /// Half of the loss at each terminal (default).
    Half,
    From,
    To,
}

#[derive(Debug, Clone)]
pub struct LossIterationConfig {
    pub iterations: usize,
    pub split: LossSplit,
    /// Per-branch α for method 7; 1.0 everywhere by default.
    pub alpha: Vec<f64>,
}

impl LossIterationConfig {
    pub fn new(net: &Network) -> Self {
        LossIterationConfig {
            iterations: 4,
            split: LossSplit::Half,
            alpha: vec![1.0; net.in_service_branches().count()],
        }
    }
}

/// One pass of the loss loop.
#[derive(Debug, Clone, PartialEq)]
pub struct LossIterationStep {
    pub dispatch: Vec<f64>,
    pub loss_estimate: Vec<f64>,
    /// Fictitious bus loads applied while solving this pass.
    pub extra_loads: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossIterationTrace {
    pub steps: Vec<LossIterationStep>,
}

impl LossIterationTrace {
    pub fn total_fictitious_load(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.extra_loads.iter().sum()).collect()
    }
}

/// Methods 6/7: iteration 1 is the plain method-1 OPF; each later pass adds
/// the estimated branch losses as fictitious loads and re-solves.
pub fn run_loss_iteration(
    method: Method,
    net: &Network,
    cfg: &LossIterationConfig,
) -> Result<(OpfSolution, LossIterationTrace), OpfError> {
    if !method.is_iterative() {
        return Err(OpfError::WrongMethod(method.id()));
    }
    if cfg.iterations == 0 {
        return Err(OpfError::InconsistentModel("loss loop needs at least 1 iteration".into()));
    }
    let model = build_model(Method::DcFlow, net)?;
    let nb = net.buses.len();
    let mut trace = LossIterationTrace::default();
    let mut extra = vec![0.0; nb];
    let mut solution = None;
    for _ in 0..cfg.iterations {
        let problem = assemble_opf(&model, net, Some(&extra))?;
        let sol = solve_opf(&problem, net)?;
        let loss = match method {
            Method::LossQuadratic => estimate_loss_m6(&sol, net),
            Method::LossProportional => estimate_loss_m7(&sol, net, &cfg.alpha),
            _ => unreachable!(),
        };
        trace.steps.push(LossIterationStep {
            dispatch: sol.pg.clone(),
            loss_estimate: loss.clone(),
            extra_loads: extra.clone(),
        });
        // next pass charges the freshly estimated losses to the buses
        extra = vec![0.0; nb];
        for (k, br) in net.in_service_branches().enumerate() {
            let (Some(f), Some(t)) = (net.bus_index(br.from_bus), net.bus_index(br.to_bus))
            else {
                continue;
            };
            match cfg.split {
                LossSplit::Half => {
                    extra[f] += loss[k] / 2.0;
                    extra[t] += loss[k] / 2.0;
                }
                LossSplit::From => extra[f] += loss[k],
                LossSplit::To => extra[t] += loss[k],
            }
        }
        solution = Some(sol);
    }
    let mut sol = solution.expect("at least one iteration ran");
    sol.method = method;
    Ok((sol, trace))
}
