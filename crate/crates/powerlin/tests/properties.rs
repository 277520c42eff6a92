//! Property tests for the model-level invariants: antisymmetry of the
//! lossless methods, second-order accuracy about the flat state, parser
//! round-trips, and loss-estimate behavior.

use powerlin::ac::exact_branch_flow;
use powerlin::linear::{m1_flow, m2_flow, m3_flow, m4_flow, m5_flow};
use powerlin::matpower::{load_case, serialize_case};
use powerlin::model::{
    derive_series_admittance, Branch, Bus, BusKind, CostCurve, Generator, Network,
};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn branch_params() -> impl Strategy<Value = (f64, f64)> {
    // r in [0, 0.3], x in [0.01, 0.6]
    (0.0..0.3f64, 0.01..0.6f64)
}

fn state_pair() -> impl Strategy<Value = (f64, f64, f64, f64)> {
    (
        0.9..1.1f64,
        0.9..1.1f64,
        -0.5..0.5f64,
        -0.5..0.5f64,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    /// Methods 1-4 are antisymmetric: the from-side expression evaluated
    /// j->i is the exact negation of i->j at any state.
    #[test]
    fn lossless_methods_are_antisymmetric(
        (r, x) in branch_params(),
        (vi, vj, ti, tj) in state_pair(),
    ) {
        let (g, b) = derive_series_admittance(r, x).unwrap();
        let (wi, wj) = (vi * vi, vj * vj);
        let (phii, phij) = (ti * wi, tj * wj);
        let pairs = [
            (m1_flow(x, ti, tj), m1_flow(x, tj, ti)),
            (m2_flow(g, b, vi, vj, ti, tj), m2_flow(g, b, vj, vi, tj, ti)),
            (m3_flow(g, b, wi, wj, phii, phij), m3_flow(g, b, wj, wi, phij, phii)),
            (m4_flow(g, b, wi, wj, ti, tj), m4_flow(g, b, wj, wi, tj, ti)),
        ];
        for (fwd, rev) in pairs {
            prop_assert!((fwd + rev).abs() <= 1e-12 * (1.0 + fwd.abs()),
                "fwd {fwd} rev {rev}");
        }
    }

    /// g >= 0 for r >= 0, and g² + b² = 1/(r²+x²).
    #[test]
    fn admittance_identities((r, x) in branch_params()) {
        let (g, b) = derive_series_admittance(r, x).unwrap();
        prop_assert!(g >= 0.0);
        let lhs = g * g + b * b;
        let rhs = 1.0 / (r * r + x * x);
        prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs);
    }

    /// Exact loss is nonnegative for r >= 0 and matches the sum of the
    /// two directed exact flows.
    #[test]
    fn exact_loss_nonnegative_and_consistent(
        (r, x) in branch_params(),
        (vi, vj, ti, tj) in state_pair(),
    ) {
        let (g, b) = derive_series_admittance(r, x).unwrap();
        let loss = powerlin::ac::exact_branch_loss(g, vi, vj, ti, tj);
        prop_assert!(loss >= -1e-12);
        let sum = exact_branch_flow(g, b, vi, vj, ti, tj)
            + exact_branch_flow(g, b, vj, vi, tj, ti);
        prop_assert!((loss - sum).abs() <= 1e-10 * (1.0 + loss.abs()));
    }

    /// Method-6 style loss estimate g·Δθ² stays within a fourth-order gap
    /// of the exact loss at flat voltage: halving Δθ shrinks it ~16x.
    #[test]
    fn m6_loss_gap_is_fourth_order((r, x) in branch_params(), dth in 0.02..0.3f64) {
        let (g, _) = derive_series_admittance(r.max(1e-3), x).unwrap();
        let gap = |d: f64| (powerlin::ac::exact_branch_loss(g, 1.0, 1.0, d, 0.0) - g * d * d).abs();
        let ratio = gap(dth) / gap(dth / 2.0);
        prop_assert!((15.0..=17.0).contains(&ratio), "ratio {ratio}");
    }
}

/// Second-order accuracy about the flat state for methods 2, 4, 5:
/// halving the perturbation reduces the RMS formula error by ~4x.
#[test]
fn methods_2_4_5_are_second_order_accurate() {
    let mut rng = StdRng::seed_from_u64(0x5eed);
    const TRIALS: usize = 200;
    for method in [2u8, 4, 5] {
        let mut rms = [0.0f64; 2];
        for trial in 0..TRIALS {
            let r: f64 = rng.random_range(0.0..0.2);
            let x: f64 = rng.random_range(0.05..0.5);
            let (g, b) = derive_series_admittance(r, x).unwrap();
            let av: [f64; 2] = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let at: [f64; 2] = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let _ = trial;
            for (k, eps) in [1e-3, 5e-4].into_iter().enumerate() {
                let vi = 1.0 + eps * av[0];
                let vj = 1.0 + eps * av[1];
                let ti = eps * at[0];
                let tj = eps * at[1];
                let exact = exact_branch_flow(g, b, vi, vj, ti, tj);
                let approx = match method {
                    2 => m2_flow(g, b, vi, vj, ti, tj),
                    4 => m4_flow(g, b, vi * vi, vj * vj, ti, tj),
                    5 => m5_flow(g, b, vi.ln(), vj.ln(), ti, tj),
                    _ => unreachable!(),
                };
                rms[k] += (approx - exact).powi(2);
            }
        }
        let ratio = (rms[0] / rms[1]).sqrt();
        assert!(
            (3.5..=4.5).contains(&ratio),
            "method {method}: halving ratio {ratio} outside [3.5, 4.5]"
        );
    }
}

fn arbitrary_network() -> impl Strategy<Value = Network> {
    // 2..=6 buses on a chain plus optional extra branch, 1..=2 generators
    (2usize..=6, proptest::collection::vec((0.001..0.2f64, 0.02..0.5f64, 0.0..0.1f64), 5),
        proptest::collection::vec((0.1..2.0f64, 1.0..50.0f64, 0.0..0.4f64), 2),
        proptest::collection::vec(0.0..1.5f64, 6))
        .prop_map(|(nb, lines, gens, loads)| {
            let buses: Vec<Bus> = (0..nb)
                .map(|i| Bus {
                    id: i + 1,
                    kind: if i == 0 { BusKind::Slack } else { BusKind::Pq },
                    p_load: loads[i],
                    q_load: 0.3 * loads[i],
                    shunt_g: 0.0,
                    shunt_b: 0.0,
                    v_mag: 1.0,
                    v_ang: 0.0,
                    v_max: 1.06,
                    v_min: 0.94,
                    base_kv: 0.0,
                })
                .collect();
            let branches: Vec<Branch> = (1..nb)
                .map(|i| {
                    let (r, x, bc) = lines[(i - 1) % lines.len()];
                    Branch {
                        from_bus: i,
                        to_bus: i + 1,
                        r,
                        x,
                        b_charge: bc,
                        tap: if i % 3 == 0 { 0.97 } else { 1.0 },
                        shift: if i % 4 == 0 { 0.02 } else { 0.0 },
                        in_service: true,
                    }
                })
                .collect();
            let generators: Vec<Generator> = gens
                .iter()
                .enumerate()
                .map(|(k, &(pmax, c1, c2))| Generator {
                    bus: 1 + (k * (nb - 1)).min(nb - 1),
                    p_gen: 0.0,
                    p_min: 0.0,
                    p_max: pmax,
                    q_min: -1.0,
                    q_max: 1.0,
                    v_set: 1.0,
                    in_service: true,
                    cost: CostCurve::new(vec![0.0, c1, c2]),
                })
                .collect();
            Network {
                name: "prop".into(),
                base_mva: 100.0,
                buses,
                branches,
                generators,
                per_unit: true,
            }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    /// serialize -> parse -> lower reproduces every field to 1e-12 relative.
    #[test]
    fn parser_roundtrip_on_random_networks(net in arbitrary_network()) {
        let text = serialize_case(&net);
        let again = load_case(&text).unwrap();
        prop_assert_eq!(net.buses.len(), again.buses.len());
        prop_assert_eq!(net.branches.len(), again.branches.len());
        prop_assert_eq!(net.generators.len(), again.generators.len());
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0);
        for (x, y) in net.buses.iter().zip(&again.buses) {
            prop_assert_eq!(x.id, y.id);
            prop_assert!(close(x.p_load, y.p_load));
            prop_assert!(close(x.v_ang, y.v_ang));
            prop_assert!(close(x.v_max, y.v_max));
        }
        for (x, y) in net.branches.iter().zip(&again.branches) {
            prop_assert!(close(x.r, y.r));
            prop_assert!(close(x.x, y.x));
            prop_assert!(close(x.b_charge, y.b_charge));
            prop_assert!(close(x.tap, y.tap));
            prop_assert!(close(x.shift, y.shift));
        }
        for (x, y) in net.generators.iter().zip(&again.generators) {
            prop_assert!(close(x.p_max, y.p_max));
            prop_assert!(close(x.cost.c1(), y.cost.c1()));
            prop_assert!(close(x.cost.c2(), y.cost.c2()));
        }
    }

    /// Whitespace mutations and comment insertion leave the AST unchanged.
    #[test]
    fn parse_is_whitespace_insensitive(extra_ws in 1usize..6) {
        let text = include_str!("../../../fixtures/case14.m");
        let pad = " ".repeat(extra_ws);
        let mutated = text.replace('\t', &pad);
        let a = powerlin::matpower::parse_case(text).unwrap();
        let b = powerlin::matpower::parse_case(&mutated).unwrap();
        prop_assert_eq!(a.bus.rows, b.bus.rows);
        prop_assert_eq!(a.branch.rows, b.branch.rows);
    }
}
