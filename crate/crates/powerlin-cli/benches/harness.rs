//! Criterion benches: per-method solve cost on the shipped fixtures, and
//! sequential vs rayon execution of the two data-parallel workloads (the
//! benchmark cell matrix and the oracle's dispatch grid sweep).

use criterion::{criterion_group, criterion_main, Criterion};
use powerlin::linear::Method;
use powerlin::matpower::load_case;
use powerlin::opf::{run_loss_iteration, run_method, LossIterationConfig};
use powerlin_cli::config::{EpsFSource, OutputFormat, Parallelism, RunConfig};
use powerlin_cli::oracle::brute_force_with_mode;
use powerlin_cli::run_benchmark;
use std::hint::black_box;
use std::path::PathBuf;

const CASE_57: &str = include_str!("../../../fixtures/case57.m");

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn method_solves(c: &mut Criterion) {
    let mut group = c.benchmark_group("method_solve_case57");
    group.sample_size(20);
    let net = load_case(CASE_57).unwrap();
    for method in Method::all() {
        group.bench_function(format!("M{}", method.id()), |b| {
            b.iter(|| {
                if method.is_iterative() {
                    let cfg = LossIterationConfig::new(&net);
                    black_box(run_loss_iteration(method, &net, &cfg).unwrap());
                } else {
                    black_box(run_method(method, &net).unwrap());
                }
            })
        });
    }
    group.finish();
}

fn cell_matrix(c: &mut Criterion) {
    let mut group = c.benchmark_group("cell_matrix_case14_case57");
    group.sample_size(10);
    let config = |parallelism| RunConfig {
        cases: vec![fixture("case14.m"), fixture("case57.m")],
        baselines: vec![fixture("case14.baseline.json"), fixture("case57.baseline.json")],
        methods: Method::all().to_vec(),
        iters: 4,
        repeat: 0,
        format: OutputFormat::Report,
        out: None,
        pf_vset: powerlin::evaluation::PfVset::Case,
        loss_split: powerlin::opf::LossSplit::Half,
        alpha: None,
        eps_f_source: EpsFSource::Post,
        parallelism,
    };
    group.bench_function("sequential", |b| {
        let cfg = config(Parallelism::Sequential);
        b.iter(|| black_box(run_benchmark(&cfg).unwrap()))
    });
    #[cfg(feature = "parallel")]
    group.bench_function("rayon", |b| {
        let cfg = config(Parallelism::Rayon);
        b.iter(|| black_box(run_benchmark(&cfg).unwrap()))
    });
    group.finish();
}

fn oracle_grid(c: &mut Criterion) {
    let mut group = c.benchmark_group("oracle_grid_3bus");
    group.sample_size(10);
    // lossless 3-bus toy with two dispatchable units
    let text = "function mpc = bench3\nmpc.version = '2';\nmpc.baseMVA = 100;\n\
        mpc.bus = [\n1 3 0 0 0 0 1 1 0 0 1 1.2 0.8;\n2 1 60 0 0 0 1 1 0 0 1 1.2 0.8;\n\
        3 1 30 0 0 0 1 1 0 0 1 1.2 0.8;\n];\n\
        mpc.gen = [\n1 0 0 100 -100 1 100 1 200 0 0 0 0 0 0 0 0 0 0 0 0;\n\
        2 0 0 100 -100 1 100 1 80 0 0 0 0 0 0 0 0 0 0 0 0;\n\
        3 0 0 100 -100 1 100 1 80 0 0 0 0 0 0 0 0 0 0 0 0;\n];\n\
        mpc.branch = [\n1 2 0 0.2 0 0 0 0 0 0 1 -360 360;\n2 3 0 0.25 0 0 0 0 0 0 1 -360 360;\n];\n\
        mpc.gencost = [\n2 0 0 3 0.05 20 0;\n2 0 0 3 0.08 18 0;\n2 0 0 3 0.06 22 0;\n];\n";
    let net = load_case(text).unwrap();
    let step = 2e-2;
    group.bench_function("sequential", |b| {
        b.iter(|| black_box(brute_force_with_mode(&net, step, false).unwrap()))
    });
    #[cfg(feature = "parallel")]
    group.bench_function("rayon", |b| {
        b.iter(|| black_box(brute_force_with_mode(&net, step, true).unwrap()))
    });
    group.finish();
}

criterion_group!(benches, method_solves, cell_matrix, oracle_grid);
criterion_main!(benches);
