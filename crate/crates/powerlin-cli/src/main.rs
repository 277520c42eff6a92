//! `powerlin` command line: run the benchmark matrix, score reports,
//! validate cases, and produce brute-force reference optima.
//!
//! Exit codes: 0 success, 1 configuration or I/O errors, 2 cell failures
//! or validation violations.

use clap::{Args, Parser, Subcommand};
use powerlin::ac::PfConfig;
use powerlin::evaluation::PfVset;
use powerlin::matpower::parse_case;
use powerlin::model::validate_network;
use powerlin::opf::LossSplit;
use powerlin_cli::config::{parse_methods, AlphaEntry, EpsFSource, OutputFormat, Parallelism, RunConfig};
use powerlin_cli::oracle::{brute_force_opf_oracle, OracleError};
use powerlin_cli::radar::{render_svg, score_report};
use powerlin_cli::report::BenchmarkReport;
use powerlin_cli::run_benchmark;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "powerlin", version, about = "Linear power flow approximation benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline over cases and methods and emit a report.
    Run(RunArgs),
    /// Compute 1-100 radar scores and polygon areas from a report.
    Score(ScoreArgs),
    /// Parse a case, check its invariants, and run a flat-start power flow.
    Validate { case: PathBuf },
    /// Brute-force reference optimum for a tiny case (<= 3 buses).
    Oracle(OracleArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Case file paths.
    #[arg(long, num_args = 1.., required = true)]
    cases: Vec<PathBuf>,
    /// Baseline file paths, one per case, same order.
    #[arg(long, num_args = 1.., required = true)]
    baselines: Vec<PathBuf>,
    /// Method ids, e.g. --methods 1,2,6; an empty list selects nothing.
    #[arg(long, default_value = "1,2,3,4,5,6,7", allow_hyphen_values = false)]
    methods: String,
    /// Loss-loop iterations for methods 6/7.
    #[arg(long, default_value_t = 4)]
    iters: usize,
    /// Timing repetitions (0 skips timing and scoring).
    #[arg(long, default_value_t = 100)]
    repeat: usize,
    #[arg(long, value_enum, default_value_t = FormatArg::Text)]
    format: FormatArg,
    /// Output path; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// PV setpoint source for the validation power flow.
    #[arg(long, value_enum, default_value_t = VsetArg::Case)]
    pf_vset: VsetArg,
    /// How estimated branch losses are charged to terminal buses.
    #[arg(long, value_enum, default_value_t = SplitArg::Half)]
    loss_split: SplitArg,
    /// JSON file with per-branch alpha overrides for method 7.
    #[arg(long)]
    alpha: Option<PathBuf>,
    /// Which objective enters eps_f.
    #[arg(long, value_enum, default_value_t = EpsFArg::Post)]
    eps_f: EpsFArg,
    /// Disable the parallel cell fan-out.
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct ScoreArgs {
    /// Report JSON produced by `run --format report`.
    #[arg(long = "in")]
    input: PathBuf,
    /// Score document output path; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Optional radar chart rendering.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    case: PathBuf,
    /// Dispatch grid step, per-unit.
    #[arg(long, default_value_t = 1e-3)]
    step: f64,
    /// Write the optimum as a baseline file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum FormatArg {
    Text,
    Csv,
    Report,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum VsetArg {
    Case,
    Baseline,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum SplitArg {
    Half,
    From,
    To,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum EpsFArg {
    Post,
    Pre,
}

fn main() -> ExitCode {
    match dispatch() {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn dispatch() -> anyhow::Result<ExitCode> {
    match Cli::parse().command {
        Command::Run(args) => cmd_run(args),
        Command::Score(args) => cmd_score(args),
        Command::Validate { case } => cmd_validate(&case),
        Command::Oracle(args) => cmd_oracle(args),
    }
}

fn write_or_print(out: &Option<PathBuf>, content: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => std::fs::write(path, content)
            .map_err(|e| anyhow::anyhow!("writing {}: {e}", path.display())),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn cmd_run(args: RunArgs) -> anyhow::Result<ExitCode> {
    let alpha: Option<Vec<AlphaEntry>> = match &args.alpha {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| anyhow::anyhow!("reading {}: {e}", path.display()))?;
            Some(serde_json::from_str(&text)
                .map_err(|e| anyhow::anyhow!("alpha map {}: {e}", path.display()))?)
        }
        None => None,
    };
    let ids: Vec<u8> = args
        .methods
        .split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse::<u8>().map_err(|_| anyhow::anyhow!("bad method id `{t}`")))
        .collect::<anyhow::Result<_>>()?;
    let cfg = RunConfig {
        cases: args.cases,
        baselines: args.baselines,
        methods: parse_methods(&ids)?,
        iters: args.iters,
        repeat: args.repeat,
        format: match args.format {
            FormatArg::Text => OutputFormat::Text,
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Report => OutputFormat::Report,
        },
        out: args.out,
        pf_vset: match args.pf_vset {
            VsetArg::Case => PfVset::Case,
            VsetArg::Baseline => PfVset::Baseline,
        },
        loss_split: match args.loss_split {
            SplitArg::Half => LossSplit::Half,
            SplitArg::From => LossSplit::From,
            SplitArg::To => LossSplit::To,
        },
        alpha,
        eps_f_source: match args.eps_f {
            EpsFArg::Post => EpsFSource::Post,
            EpsFArg::Pre => EpsFSource::Pre,
        },
        parallelism: if args.sequential {
            Parallelism::Sequential
        } else {
            Parallelism::default()
        },
    };
    let report = run_benchmark(&cfg)?;
    let content = match cfg.format {
        OutputFormat::Text => report.to_text(),
        OutputFormat::Csv => report.to_csv(),
        OutputFormat::Report => report.to_json(),
    };
    write_or_print(&cfg.out, &content)?;
    Ok(if report.any_failed() { ExitCode::from(2) } else { ExitCode::SUCCESS })
}

fn cmd_score(args: ScoreArgs) -> anyhow::Result<ExitCode> {
    let text = std::fs::read_to_string(&args.input)
        .map_err(|e| anyhow::anyhow!("reading {}: {e}", args.input.display()))?;
    let report = BenchmarkReport::from_json(&text)
        .map_err(|e| anyhow::anyhow!("report {}: {e}", args.input.display()))?;
    let doc = match score_report(&report) {
        Ok(doc) => doc,
        Err(err) => {
            eprintln!("error: {err}");
            return Ok(ExitCode::from(2));
        }
    };
    let content = serde_json::to_string_pretty(&doc)?;
    write_or_print(&args.out, &format!("{content}\n"))?;
    if let Some(svg_path) = &args.svg {
        std::fs::write(svg_path, render_svg(&doc))
            .map_err(|e| anyhow::anyhow!("writing {}: {e}", svg_path.display()))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_validate(case: &PathBuf) -> anyhow::Result<ExitCode> {
    let text = std::fs::read_to_string(case)
        .map_err(|e| anyhow::anyhow!("reading {}: {e}", case.display()))?;
    let ast = match parse_case(&text) {
        Ok(ast) => ast,
        Err(e) => {
            println!("parse error: {e}");
            return Ok(ExitCode::from(2));
        }
    };
    let net = match powerlin::matpower::lower_case(&ast) {
        Ok(net) => net,
        Err(e) => {
            println!("lowering error: {e}");
            return Ok(ExitCode::from(2));
        }
    };
    let violations = validate_network(&net);
    if !violations.is_empty() {
        for v in &violations {
            println!("violation: {v}");
        }
        return Ok(ExitCode::from(2));
    }
    let dispatch: Vec<f64> = net.generators.iter().map(|g| g.p_gen).collect();
    let vset = powerlin::ac::case_setpoints(&net);
    match powerlin::ac::solve_power_flow(&net, &dispatch, &vset, &PfConfig::default()) {
        Ok(st) => {
            println!(
                "OK, NR converged in {} iterations (max mismatch {:.2e} p.u.)",
                st.iterations, st.max_mismatch
            );
            Ok(ExitCode::SUCCESS)
        }
        Err(e) => {
            println!("power flow: {e}");
            Ok(ExitCode::from(2))
        }
    }
}

fn cmd_oracle(args: OracleArgs) -> anyhow::Result<ExitCode> {
    let text = std::fs::read_to_string(&args.case)
        .map_err(|e| anyhow::anyhow!("reading {}: {e}", args.case.display()))?;
    let net = powerlin::matpower::load_case(&text)
        .map_err(|e| anyhow::anyhow!("case {}: {e}", args.case.display()))?;
    match brute_force_opf_oracle(&net, args.step) {
        Ok(sol) => {
            println!("objective: {:.6} $/hr", sol.objective);
            for ((_, g), pg) in net.active_generators().zip(&sol.dispatch) {
                println!("gen at bus {}: {:.4} MW", g.bus, pg * net.base_mva);
            }
            println!(
                "grid: {} points evaluated, {} feasible",
                sol.points_evaluated, sol.points_feasible
            );
            if let Some(out) = &args.out {
                let baseline = sol.as_baseline(&net);
                std::fs::write(out, powerlin::baseline::save_baseline(&baseline, &net))
                    .map_err(|e| anyhow::anyhow!("writing {}: {e}", out.display()))?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Err(e @ OracleError::NoFeasiblePoint) => {
            eprintln!("error: {e}");
            Ok(ExitCode::from(2))
        }
        Err(e) => Err(e.into()),
    }
}
