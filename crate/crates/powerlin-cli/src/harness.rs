//! The benchmark runner: fans (method, case) cells across workers for the
//! metric phase, then times methods serially, then scores.

use crate::config::{AlphaEntry, ConfigError, EpsFSource, Parallelism, RunConfig};
use crate::report::{
    fnv1a_hex, BenchmarkReport, Cell, ConfigEcho, FixtureInfo, MethodScore, ScoreBlock, AXES,
};
use powerlin::ac::PfConfig;
use powerlin::baseline::{load_baseline, BaselineSolution};
use powerlin::evaluation::{
    approx_error, feasibility_check, optimality_errors, pf_setpoints, radar_area, score_methods,
    time_method, validate_dispatch, MetricsReport, PfVset,
};
use powerlin::linear::{build_model, Method};
use powerlin::matpower::load_case;
use powerlin::model::Network;
use powerlin::opf::{run_loss_iteration, run_method, LossIterationConfig, LossSplit};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parsing {path}: {message}")]
    Parse { path: String, message: String },
}

struct LoadedCase {
    name: String,
    net: Network,
    baseline: BaselineSolution,
}

fn load_inputs(cfg: &RunConfig) -> Result<Vec<LoadedCase>, HarnessError> {
    let read = |path: &std::path::Path| -> Result<String, HarnessError> {
        std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.display().to_string(),
            source,
        })
    };
    let mut out = Vec::new();
    for (case_path, baseline_path) in cfg.cases.iter().zip(&cfg.baselines) {
        let net = load_case(&read(case_path)?).map_err(|e| HarnessError::Parse {
            path: case_path.display().to_string(),
            message: e.to_string(),
        })?;
        let baseline =
            load_baseline(&read(baseline_path)?, &net).map_err(|e| HarnessError::Parse {
                path: baseline_path.display().to_string(),
                message: e.to_string(),
            })?;
        out.push(LoadedCase { name: net.name.clone(), net, baseline });
    }
    Ok(out)
}

fn alpha_vector(net: &Network, overrides: &Option<Vec<AlphaEntry>>) -> Vec<f64> {
    let mut alpha = vec![1.0; net.in_service_branches().count()];
    if let Some(entries) = overrides {
        for (k, br) in net.in_service_branches().enumerate() {
            for e in entries {
                if e.from == br.from_bus && e.to == br.to_bus {
                    alpha[k] = e.alpha;
                }
            }
        }
    }
    alpha
}

fn loss_config(net: &Network, cfg: &RunConfig) -> LossIterationConfig {
    LossIterationConfig {
        iterations: cfg.iters,
        split: cfg.loss_split,
        alpha: alpha_vector(net, &cfg.alpha),
    }
}

/// One (method, case) pipeline pass: OPF (or loss loop), approximation
/// error, AC validation, optimality and feasibility metrics. Timing is
/// filled in later by the serial phase.
fn run_cell(case: &LoadedCase, method: Method, cfg: &RunConfig) -> Result<MetricsReport, String> {
    let net = &case.net;
    let (sol, approx) = if method.is_iterative() {
        let (sol, _) = run_loss_iteration(method, net, &loss_config(net, cfg))
            .map_err(|e| e.to_string())?;
        (sol, None)
    } else {
        let sol = run_method(method, net).map_err(|e| e.to_string())?;
        let model = build_model(method, net).map_err(|e| e.to_string())?;
        let eps = approx_error(&model, &case.baseline).map_err(|e| e.to_string())?;
        (sol, Some(eps))
    };
    let vset = pf_setpoints(net, Some(&case.baseline), cfg.pf_vset);
    let validated =
        validate_dispatch(net, &sol.pg, &vset, &PfConfig::default()).map_err(|e| e.to_string())?;
    let objective = match cfg.eps_f_source {
        EpsFSource::Post => validated.objective,
        EpsFSource::Pre => sol.objective,
    };
    let priced = powerlin::evaluation::ValidatedSolution {
        state: validated.state.clone(),
        pg: validated.pg.clone(),
        objective,
    };
    let (eps_f, eps_pg, eps_v) = optimality_errors(&priced, &case.baseline);
    let feas = feasibility_check(&validated.state.v_mag, net, &case.baseline);
    Ok(MetricsReport {
        method: method.id(),
        case: case.name.clone(),
        approx_error: approx,
        eps_f,
        eps_pg,
        eps_v,
        n_out: feas.n_out,
        n_above: feas.n_above,
        n_below: feas.n_below,
        out_ratio: feas.out_ratio,
        eps_v_out: feas.eps_v_out,
        wall_time_s: 0.0,
        pf_iterations: validated.state.iterations,
        qp_iterations: sol.qp_iterations,
    })
}

/// Map cells to outcomes with the configured parallelism. Cells are
/// independent; failures never poison other cells.
fn run_cells(
    cases: &[LoadedCase],
    cfg: &RunConfig,
) -> Vec<(usize, Method, Result<MetricsReport, String>)> {
    let jobs: Vec<(usize, Method)> = cases
        .iter()
        .enumerate()
        .flat_map(|(ci, _)| cfg.methods.iter().map(move |&m| (ci, m)))
        .collect();
    match cfg.parallelism {
        #[cfg(feature = "parallel")]
        Parallelism::Rayon => {
            use rayon::prelude::*;
            jobs.par_iter()
                .map(|&(ci, m)| (ci, m, run_cell(&cases[ci], m, cfg)))
                .collect()
        }
        #[cfg(not(feature = "parallel"))]
        Parallelism::Rayon => jobs
            .iter()
            .map(|&(ci, m)| (ci, m, run_cell(&cases[ci], m, cfg)))
            .collect(),
        Parallelism::Sequential => jobs
            .iter()
            .map(|&(ci, m)| (ci, m, run_cell(&cases[ci], m, cfg)))
            .collect(),
    }
}

/// Full benchmark: metric phase (parallel by default), serial timing
/// phase, scoring, report assembly.
pub fn run_benchmark(cfg: &RunConfig) -> Result<BenchmarkReport, HarnessError> {
    cfg.validate()?;
    let cases = load_inputs(cfg)?;
    let mut outcomes = run_cells(&cases, cfg);

    // timing phase is serial: wall-clock comparability requires exclusive
    // use of the machine
    if cfg.repeat > 0 {
        for (ci, method, outcome) in outcomes.iter_mut() {
            if let Ok(metrics) = outcome {
                let lcfg = loss_config(&cases[*ci].net, cfg);
                match time_method(*method, &cases[*ci].net, cfg.repeat, &lcfg) {
                    Ok(seconds) => metrics.wall_time_s = seconds,
                    Err(e) => *outcome = Err(e.to_string()),
                }
            }
        }
    }

    let cells: Vec<Cell> = outcomes
        .iter()
        .map(|(ci, method, outcome)| match outcome {
            Ok(m) => Cell {
                case: cases[*ci].name.clone(),
                method: method.id(),
                ok: true,
                error: None,
                metrics: Some(m.clone()),
            },
            Err(e) => Cell {
                case: cases[*ci].name.clone(),
                method: method.id(),
                ok: false,
                error: Some(e.clone()),
                metrics: None,
            },
        })
        .collect();

    let (scores, scores_skipped) = match compute_scores(&cells, &cfg.methods) {
        Ok(block) => (Some(block), None),
        Err(reason) => (None, Some(reason)),
    };

    let mut fixtures = Vec::new();
    for path in cfg.cases.iter().chain(&cfg.baselines) {
        let bytes = std::fs::read(path).map_err(|source| HarnessError::Io {
            path: path.display().to_string(),
            source,
        })?;
        fixtures.push(FixtureInfo {
            path: path.display().to_string(),
            checksum: fnv1a_hex(&bytes),
        });
    }
    Ok(BenchmarkReport {
        version: env!("CARGO_PKG_VERSION").to_string(),
        generated_unix: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        config: ConfigEcho {
            methods: cfg.methods.iter().map(|m| m.id()).collect(),
            iters: cfg.iters,
            repeat: cfg.repeat,
            pf_vset: match cfg.pf_vset {
                PfVset::Case => "case".into(),
                PfVset::Baseline => "baseline".into(),
            },
            loss_split: match cfg.loss_split {
                LossSplit::Half => "half".into(),
                LossSplit::From => "from".into(),
                LossSplit::To => "to".into(),
            },
            eps_f_source: match cfg.eps_f_source {
                EpsFSource::Post => "post".into(),
                EpsFSource::Pre => "pre".into(),
            },
            parallel_cells: matches!(cfg.parallelism, Parallelism::Rayon)
                && cfg!(feature = "parallel"),
        },
        fixtures,
        cells,
        scores,
        scores_skipped,
    })
}

/// Aggregate the four axes over cases per method and score them.
/// Accuracy for the iterative methods inherits method 1's aggregate.
pub fn compute_scores(cells: &[Cell], methods: &[Method]) -> Result<ScoreBlock, String> {
    if cells.iter().any(|c| !c.ok) {
        return Err("matrix incomplete: at least one cell failed".into());
    }
    let metric = |method: u8, case: &str| {
        cells
            .iter()
            .find(|c| c.method == method && c.case == case)
            .and_then(|c| c.metrics.as_ref())
    };
    let cases: Vec<String> = {
        let mut seen = Vec::new();
        for c in cells {
            if !seen.contains(&c.case) {
                seen.push(c.case.clone());
            }
        }
        seen
    };
    let mut aggregates = Vec::new();
    for &m in methods {
        let mut acc = 0.0;
        let mut opt = 0.0;
        let mut fea = 0.0;
        let mut spd = 0.0;
        for case in &cases {
            let Some(r) = metric(m.id(), case) else {
                return Err(format!("matrix incomplete: no cell for M{} on {case}", m.id()));
            };
            let acc_value = if m.is_iterative() {
                // iterative methods are not tested for approximation
                // accuracy; they inherit method 1's value
                metric(1, case).and_then(|r1| r1.approx_error).ok_or_else(|| {
                    format!("accuracy for M{} on {case} needs a method-1 cell", m.id())
                })?
            } else {
                r.approx_error
                    .ok_or_else(|| format!("no approx error for M{} on {case}", m.id()))?
            };
            acc += acc_value;
            opt += r.eps_f + r.eps_pg + r.eps_v;
            fea += r.out_ratio + r.eps_v_out;
            spd += r.wall_time_s;
        }
        aggregates.push([acc, opt, fea, spd]);
    }
    let scored = score_methods(&aggregates).map_err(|e| e.to_string())?;
    let per_method = methods
        .iter()
        .zip(&scored)
        .map(|(&m, s)| MethodScore {
            method: m.id(),
            scores: *s,
            area: radar_area(s),
            vertices: polygon_vertices(s),
        })
        .collect();
    Ok(ScoreBlock { axes: AXES.map(String::from), per_method })
}

/// Vertices of the radar polygon: axes at 0°, 90°, 180°, 270°.
pub fn polygon_vertices(spokes: &[f64; 4]) -> [[f64; 2]; 4] {
    [
        [spokes[0], 0.0],
        [0.0, spokes[1]],
        [-spokes[2], 0.0],
        [0.0, -spokes[3]],
    ]
}
