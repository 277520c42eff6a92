//! Brute-force reference optimum for tiny networks: exhaustive dispatch
//! grid, each point priced after a full AC power flow with the slack
//! absorbing losses. Desk-scale substitute for an external OPF baseline.

use powerlin::ac::PfConfig;
use powerlin::baseline::BaselineSolution;
use powerlin::evaluation::{pf_setpoints, validate_dispatch, PfVset};
use powerlin::model::Network;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("oracle is for networks of at most {max} buses, this one has {got}")]
    TooLarge { max: usize, got: usize },
    #[error("oracle supports at most 2 dispatchable generators besides the slack, found {0}")]
    TooManyGenerators(usize),
    #[error("grid step must be positive")]
    BadStep,
    #[error("no feasible point on the dispatch grid")]
    NoFeasiblePoint,
    #[error("network has no slack bus")]
    NoSlack,
}

#[derive(Debug, Clone)]
pub struct OracleSolution {
    /// Per in-service generator (p.u.), slack pickup included.
    pub dispatch: Vec<f64>,
    pub objective: f64,
    pub v_mag: Vec<f64>,
    pub v_ang: Vec<f64>,
    pub branch_flow: Vec<f64>,
    pub points_evaluated: usize,
    pub points_feasible: usize,
}

impl OracleSolution {
    pub fn as_baseline(&self, net: &Network) -> BaselineSolution {
        BaselineSolution {
            case: net.name.clone(),
            objective: self.objective,
            v_mag: self.v_mag.clone(),
            v_ang: self.v_ang.clone(),
            pg: self.dispatch.clone(),
            branch_flow: self.branch_flow.clone(),
        }
    }
}

pub const MAX_ORACLE_BUSES: usize = 3;

/// Exhaustive grid over the non-slack generators' output boxes. A point is
/// feasible when the power flow converges and the slack pickup lands
/// inside the slack units' combined output box.
pub fn brute_force_opf_oracle(net: &Network, grid_step: f64) -> Result<OracleSolution, OracleError> {
    brute_force_with_mode(net, grid_step, cfg!(feature = "parallel"))
}

/// Like [`brute_force_opf_oracle`] with explicit control over the rayon
/// fan-out (used by the benchmark suite to compare both).
pub fn brute_force_with_mode(
    net: &Network,
    grid_step: f64,
    parallel: bool,
) -> Result<OracleSolution, OracleError> {
    if net.buses.len() > MAX_ORACLE_BUSES {
        return Err(OracleError::TooLarge { max: MAX_ORACLE_BUSES, got: net.buses.len() });
    }
    if grid_step <= 0.0 || grid_step.is_nan() {
        return Err(OracleError::BadStep);
    }
    let slack_bus = net.slack_index().ok_or(OracleError::NoSlack)?;
    let gens: Vec<(usize, &powerlin::model::Generator)> = net.active_generators().collect();
    let free: Vec<usize> = gens
        .iter()
        .enumerate()
        .filter(|(_, (bi, _))| *bi != slack_bus)
        .map(|(k, _)| k)
        .collect();
    if free.len() > 2 {
        return Err(OracleError::TooManyGenerators(free.len()));
    }
    let slack_units: Vec<usize> = gens
        .iter()
        .enumerate()
        .filter(|(_, (bi, _))| *bi == slack_bus)
        .map(|(k, _)| k)
        .collect();
    let slack_min: f64 = slack_units.iter().map(|&k| gens[k].1.p_min).sum();
    let slack_max: f64 = slack_units.iter().map(|&k| gens[k].1.p_max).sum();

    let axis = |k: usize| -> Vec<f64> {
        let g = gens[k].1;
        let steps = ((g.p_max - g.p_min) / grid_step).floor() as usize;
        let mut v: Vec<f64> = (0..=steps).map(|s| g.p_min + s as f64 * grid_step).collect();
        if *v.last().unwrap() < g.p_max - 1e-12 {
            v.push(g.p_max);
        }
        v
    };
    let points: Vec<Vec<f64>> = match free.len() {
        0 => vec![vec![]],
        1 => axis(free[0]).into_iter().map(|p| vec![p]).collect(),
        _ => {
            let (a, b) = (axis(free[0]), axis(free[1]));
            a.iter().flat_map(|&pa| b.iter().map(move |&pb| vec![pa, pb])).collect()
        }
    };
    let vset = pf_setpoints(net, None, PfVset::Case);
    let evaluate = |point: &Vec<f64>| -> Option<(f64, Vec<f64>)> {
        let mut pg = vec![0.0; gens.len()];
        for (slot, &k) in free.iter().enumerate() {
            pg[k] = point[slot];
        }
        let validated = validate_dispatch(net, &pg, &vset, &PfConfig::default()).ok()?;
        let pickup: f64 = slack_units.iter().map(|&k| validated.pg[k]).sum();
        if pickup < slack_min - 1e-9 || pickup > slack_max + 1e-9 {
            return None;
        }
        Some((validated.objective, validated.pg))
    };

    // deterministic reduce: strictly better cost wins, ties break by index
    let reduce = |results: Vec<(usize, Option<(f64, Vec<f64>)>)>| {
        let mut best: Option<(f64, usize, Vec<f64>)> = None;
        let mut feasible = 0usize;
        for (idx, r) in results {
            if let Some((cost, pg)) = r {
                feasible += 1;
                let better = match &best {
                    None => true,
                    Some((bc, bi, _)) => cost < *bc || (cost == *bc && idx < *bi),
                };
                if better {
                    best = Some((cost, idx, pg));
                }
            }
        }
        (best, feasible)
    };
    let results: Vec<(usize, Option<(f64, Vec<f64>)>)> = if parallel {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            points.par_iter().enumerate().map(|(i, p)| (i, evaluate(p))).collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            points.iter().enumerate().map(|(i, p)| (i, evaluate(p))).collect()
        }
    } else {
        points.iter().enumerate().map(|(i, p)| (i, evaluate(p))).collect()
    };
    let evaluated = results.len();
    let (best, feasible) = reduce(results);
    let Some((_, _, pg)) = best else {
        return Err(OracleError::NoFeasiblePoint);
    };
    // re-run the winning point to carry its full state out
    let validated = validate_dispatch(net, &pg, &vset, &PfConfig::default())
        .map_err(|_| OracleError::NoFeasiblePoint)?;
    Ok(OracleSolution {
        dispatch: validated.pg.clone(),
        objective: validated.objective,
        v_mag: validated.state.v_mag.clone(),
        v_ang: validated.state.v_ang.clone(),
        branch_flow: validated.state.branch_flow_from.clone(),
        points_evaluated: evaluated,
        points_feasible: feasible,
    })
}

/// Objective change across one grid cell at the optimum, the oracle's
/// resolution when comparing against an exact solver. Each dispatchable
/// axis contributes its own marginal step plus the slack's compensating
/// repricing.
pub fn one_cell_variation(net: &Network, sol: &OracleSolution, grid_step: f64) -> f64 {
    let gens: Vec<&powerlin::model::Generator> = net.active_generators().map(|(_, g)| g).collect();
    let slack_bus = net.slack_index();
    let d = grid_step * net.base_mva;
    let slack_marginal: f64 = gens
        .iter()
        .enumerate()
        .filter(|(_, g)| net.bus_index(g.bus) == slack_bus)
        .map(|(k, g)| {
            let p = sol.dispatch[k] * net.base_mva;
            (g.cost.cost(p + d) - g.cost.cost(p)).abs()
        })
        .sum();
    let mut total = 0.0f64;
    for (k, g) in gens.iter().enumerate() {
        if slack_bus == net.bus_index(g.bus) {
            continue;
        }
        let p = sol.dispatch[k] * net.base_mva;
        let up = (g.cost.cost(p + d) - g.cost.cost(p)).abs();
        let down = (g.cost.cost(p - d) - g.cost.cost(p)).abs();
        total += up.max(down) + slack_marginal;
    }
    total.max(slack_marginal)
}
