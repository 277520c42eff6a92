//! Benchmark metrics: approximation error, optimality and feasibility
//! errors against a reference optimum, method timing, and the 1–100
//! log-reciprocal scoring.

use crate::ac::{solve_power_flow, AcError, PfConfig, SteadyState};
use crate::baseline::BaselineSolution;
use crate::linear::{evaluate_flow, LinearError, LinearFlowModel, Method};
use crate::model::Network;
use crate::opf::{run_loss_iteration, run_method, LossIterationConfig, OpfError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Zero-denominator guard of the error formulas.
pub const DELTA: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Linear(#[from] LinearError),
    #[error(transparent)]
    Ac(#[from] AcError),
    #[error(transparent)]
    Opf(#[from] OpfError),
    #[error("aggregate value must be positive, got {0}")]
    NonPositiveAggregate(f64),
    #[error("shape mismatch: {0}")]
    Shape(String),
}

/// RMS of the relative deviation of the model's flow predictions at the
/// baseline state (V*, θ*) from the baseline flows, δ-guarded.
pub fn approx_error(
    model: &LinearFlowModel,
    baseline: &BaselineSolution,
) -> Result<f64, EvalError> {
    let flows = evaluate_flow(model, &baseline.v_mag, &baseline.v_ang)?;
    if flows.len() != baseline.branch_flow.len() {
        return Err(EvalError::Shape(format!(
            "model has {} branches, baseline has {}",
            flows.len(),
            baseline.branch_flow.len()
        )));
    }
    let n = flows.len() as f64;
    let sum: f64 = flows
        .iter()
        .zip(&baseline.branch_flow)
        .map(|(&pk, &ps)| {
            let rel = (pk - ps - DELTA) / (ps + DELTA);
            rel * rel
        })
        .sum();
    Ok((sum / n).sqrt())
}

/// A dispatch after AC validation: the steady state, the post-power-flow
/// generator outputs (slack pickup included), and the re-priced objective.
#[derive(Debug, Clone)]
pub struct ValidatedSolution {
    pub state: SteadyState,
    /// Per in-service generator (p.u.).
    pub pg: Vec<f64>,
    /// Cost of `pg`, currency/hr.
    pub objective: f64,
}

/// Where the validation power flow takes its PV setpoints from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PfVset {
    /// Generator setpoints from the case file (default).
    Case,
    /// Baseline voltages at the generator buses.
    Baseline,
}

pub fn pf_setpoints(net: &Network, baseline: Option<&BaselineSolution>, choice: PfVset) -> Vec<f64> {
    match (choice, baseline) {
        (PfVset::Baseline, Some(b)) => net
            .generators
            .iter()
            .map(|g| net.bus_index(g.bus).map(|i| b.v_mag[i]).unwrap_or(g.v_set))
            .collect(),
        _ => net.generators.iter().map(|g| g.v_set).collect(),
    }
}

/// Run the validation power flow for a dispatch: non-slack generators hold
/// their values, slack-bus units absorb the mismatch (split equally), and
/// the objective is re-priced at the resulting outputs.
pub fn validate_dispatch(
    net: &Network,
    pg: &[f64],
    v_setpoints: &[f64],
    cfg: &PfConfig,
) -> Result<ValidatedSolution, EvalError> {
    let gens: Vec<(usize, &crate::model::Generator)> = net.active_generators().collect();
    if pg.len() != gens.len() {
        return Err(EvalError::Shape(format!(
            "dispatch has {} entries for {} in-service generators",
            pg.len(),
            gens.len()
        )));
    }
    let slack_bus = net
        .slack_index()
        .ok_or_else(|| EvalError::Shape("network has no slack bus".into()))?;
    // solve_power_flow wants per-generator vectors over net.generators
    let mut full_pg = Vec::with_capacity(net.generators.len());
    let mut full_vs = Vec::with_capacity(net.generators.len());
    let mut k = 0;
    for g in &net.generators {
        if g.in_service {
            full_pg.push(pg[k]);
            full_vs.push(v_setpoints[k]);
            k += 1;
        } else {
            full_pg.push(0.0);
            full_vs.push(g.v_set);
        }
    }
    let state = solve_power_flow(net, &full_pg, &full_vs, cfg)?;
    let slack_gens: Vec<usize> = gens
        .iter()
        .enumerate()
        .filter(|(_, (bi, _))| *bi == slack_bus)
        .map(|(k, _)| k)
        .collect();
    let mut pg_post = pg.to_vec();
    if !slack_gens.is_empty() {
        let total = state.slack_injection + net.buses[slack_bus].p_load;
        let share = total / slack_gens.len() as f64;
        for &k in &slack_gens {
            pg_post[k] = share;
        }
    }
    let objective = gens
        .iter()
        .zip(&pg_post)
        .map(|((_, g), &p)| g.cost.cost(p * net.base_mva))
        .sum();
    Ok(ValidatedSolution { state, pg: pg_post, objective })
}

/// ε_f, ε_Pg, ε_V of a validated solution against the baseline.
pub fn optimality_errors(
    validated: &ValidatedSolution,
    baseline: &BaselineSolution,
) -> (f64, f64, f64) {
    let f_ref = baseline.objective + DELTA;
    let eps_f = ((validated.objective - f_ref) / f_ref).abs();
    let ng = validated.pg.len() as f64;
    let eps_pg = (validated
        .pg
        .iter()
        .zip(&baseline.pg)
        .map(|(&p, &ps)| {
            let rel = (p - (ps + DELTA)) / (ps + DELTA);
            rel * rel
        })
        .sum::<f64>()
        / ng)
        .sqrt();
    let nb = validated.state.v_mag.len() as f64;
    let eps_v = (validated
        .state
        .v_mag
        .iter()
        .zip(&baseline.v_mag)
        .map(|(&v, &vs)| {
            let rel = (v - vs) / vs;
            rel * rel
        })
        .sum::<f64>()
        / nb)
        .sqrt();
    (eps_f, eps_pg, eps_v)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Feasibility {
    pub n_out: usize,
    pub n_above: usize,
    pub n_below: usize,
    pub out_ratio: f64,
    pub eps_v_out: f64,
}

/// Count strict voltage-bound violations of a validated state and compute
/// the RMS relative error of the violating buses against the baseline.
pub fn feasibility_check(
    v_mag: &[f64],
    net: &Network,
    baseline: &BaselineSolution,
) -> Feasibility {
    let mut n_above = 0;
    let mut n_below = 0;
    let mut sum = 0.0;
    let mut count = 0usize;
    for (i, bus) in net.buses.iter().enumerate() {
        let v = v_mag[i];
        let out = if v > bus.v_max {
            n_above += 1;
            true
        } else if v < bus.v_min {
            n_below += 1;
            true
        } else {
            false
        };
        if out {
            let rel = (v - baseline.v_mag[i]) / baseline.v_mag[i];
            sum += rel * rel;
            count += 1;
        }
    }
    let n_out = n_above + n_below;
    Feasibility {
        n_out,
        n_above,
        n_below,
        out_ratio: n_out as f64 / net.buses.len() as f64,
        eps_v_out: if count > 0 { (sum / count as f64).sqrt() } else { 0.0 },
    }
}

/// Wall-clock seconds for `repetitions` full runs of a method (model build
/// plus solve; the whole loss loop for methods 6/7). One warm-up run is
/// excluded from the timing. Must not run concurrently with other solves.
pub fn time_method(
    method: Method,
    net: &Network,
    repetitions: usize,
    loss_cfg: &LossIterationConfig,
) -> Result<f64, EvalError> {
    let run = || -> Result<(), EvalError> {
        if method.is_iterative() {
            run_loss_iteration(method, net, loss_cfg)?;
        } else {
            run_method(method, net)?;
        }
        Ok(())
    };
    run()?; // warm-up, also surfaces solver errors before the clock starts
    let start = std::time::Instant::now();
    for _ in 0..repetitions {
        run()?;
    }
    Ok(start.elapsed().as_secs_f64())
}

/// Per-axis 1–100 score: s = log(1/v) linearly rescaled so the best method
/// gets 100 and the worst 1; all-equal degenerates to 100 everywhere.
pub fn score_axis(values: &[f64]) -> Result<Vec<f64>, EvalError> {
    for &v in values {
        if v <= 0.0 || v.is_nan() {
            return Err(EvalError::NonPositiveAggregate(v));
        }
    }
    let s: Vec<f64> = values.iter().map(|&v| (1.0 / v).ln()).collect();
    let lo = s.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi == lo {
        return Ok(vec![100.0; values.len()]);
    }
    Ok(s.iter().map(|&v| 1.0 + 99.0 * (v - lo) / (hi - lo)).collect())
}

/// Score all four axes for a set of methods. `aggregates[m]` holds one
/// positive value per axis for method `m`; the result is indexed the same
/// way.
pub fn score_methods(aggregates: &[[f64; 4]]) -> Result<Vec<[f64; 4]>, EvalError> {
    let mut out = vec![[0.0; 4]; aggregates.len()];
    for axis in 0..4 {
        let col: Vec<f64> = aggregates.iter().map(|row| row[axis]).collect();
        let scored = score_axis(&col)?;
        for (m, &s) in scored.iter().enumerate() {
            out[m][axis] = s;
        }
    }
    Ok(out)
}

/// Area of the radar quadrilateral with the four spokes at right angles.
pub fn radar_area(spokes: &[f64; 4]) -> f64 {
    0.5 * (spokes[0] * spokes[1]
        + spokes[1] * spokes[2]
        + spokes[2] * spokes[3]
        + spokes[3] * spokes[0])
}

/// All benchmark metrics for one (method, case) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub method: u8,
    pub case: String,
    /// None for the iterative methods, which the protocol does not test
    /// for linear-approximation accuracy.
    pub approx_error: Option<f64>,
    pub eps_f: f64,
    pub eps_pg: f64,
    pub eps_v: f64,
    pub n_out: usize,
    pub n_above: usize,
    pub n_below: usize,
    pub out_ratio: f64,
    pub eps_v_out: f64,
    pub wall_time_s: f64,
    pub pf_iterations: usize,
    pub qp_iterations: usize,
}
