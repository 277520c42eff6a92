//! Reference optimum loading: the comparison anchor every metric is
//! measured against.
//!
//! Baselines travel as a small JSON document holding MATPOWER-native units
//! (MW, degrees); see the repository README for the export recipe. On load
//! the document is mapped onto a specific [`Network`] and re-checked for
//! active-power balance at the stated operating point.

use crate::ac::build_admittance;
use crate::model::Network;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("baseline document: {0}")]
    Document(#[from] serde_json::Error),
    #[error("baseline does not match network: {0}")]
    Mismatch(String),
    #[error("baseline violates AC active balance at bus {bus}: residual {residual:.3e} p.u.")]
    BalanceViolation { bus: usize, residual: f64 },
}

/// Reference optimum in network order and per-unit/radian form.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineSolution {
    pub case: String,
    /// Reference objective, currency/hour.
    pub objective: f64,
    pub v_mag: Vec<f64>,
    pub v_ang: Vec<f64>,
    /// Per-generator reference dispatch (p.u.).
    pub pg: Vec<f64>,
    /// Per-branch from-side active flow (p.u.).
    pub branch_flow: Vec<f64>,
}

/// On-disk schema: MW and degrees, entity labels external.
#[derive(Debug, Serialize, Deserialize)]
struct BaselineDoc {
    version: u32,
    case: String,
    objective: f64,
    /// rows [bus_id, vm_pu, va_deg]
    bus: Vec<(usize, f64, f64)>,
    /// rows [bus_id, pg_mw]
    gen: Vec<(usize, f64)>,
    /// rows [from, to, pij_mw]
    branch: Vec<(usize, usize, f64)>,
}

const BALANCE_TOL: f64 = 1e-4;

pub fn load_baseline(text: &str, net: &Network) -> Result<BaselineSolution, BaselineError> {
    let doc: BaselineDoc = serde_json::from_str(text)?;
    if doc.bus.len() != net.buses.len() {
        return Err(BaselineError::Mismatch(format!(
            "{} bus rows for a {}-bus network",
            doc.bus.len(),
            net.buses.len()
        )));
    }
    if doc.gen.len() != net.generators.len() {
        return Err(BaselineError::Mismatch(format!(
            "{} gen rows for {} generators",
            doc.gen.len(),
            net.generators.len()
        )));
    }
    if doc.branch.len() != net.branches.len() {
        return Err(BaselineError::Mismatch(format!(
            "{} branch rows for {} branches",
            doc.branch.len(),
            net.branches.len()
        )));
    }
    let mut v_mag = vec![0.0; net.buses.len()];
    let mut v_ang = vec![0.0; net.buses.len()];
    for &(id, vm, va_deg) in &doc.bus {
        let Some(i) = net.bus_index(id) else {
            return Err(BaselineError::Mismatch(format!("unknown bus {id}")));
        };
        v_mag[i] = vm;
        v_ang[i] = va_deg.to_radians();
    }
    // generators and branches must follow network row order (parallel
    // branches are disambiguated by position)
    let mut pg = Vec::with_capacity(doc.gen.len());
    for (gi, (&(bus, pg_mw), g)) in doc.gen.iter().zip(&net.generators).enumerate() {
        if g.bus != bus {
            return Err(BaselineError::Mismatch(format!(
                "gen row {gi} is for bus {bus}, network has bus {}",
                g.bus
            )));
        }
        pg.push(pg_mw / net.base_mva);
    }
    let mut branch_flow = Vec::with_capacity(doc.branch.len());
    for (bi, (&(from, to, p_mw), br)) in doc.branch.iter().zip(&net.branches).enumerate() {
        if br.from_bus != from || br.to_bus != to {
            return Err(BaselineError::Mismatch(format!(
                "branch row {bi} is {from}-{to}, network has {}-{}",
                br.from_bus, br.to_bus
            )));
        }
        branch_flow.push(p_mw / net.base_mva);
    }
    let b = BaselineSolution {
        case: doc.case,
        objective: doc.objective,
        v_mag,
        v_ang,
        pg,
        branch_flow,
    };
    check_active_balance(&b, net)?;
    Ok(b)
}

/// Recompute active injections from (V*, θ*) through the full admittance
/// matrix and compare with Pg* − Pl at every bus.
fn check_active_balance(b: &BaselineSolution, net: &Network) -> Result<(), BaselineError> {
    let y = build_admittance(net);
    let v: Vec<Complex64> = b
        .v_mag
        .iter()
        .zip(&b.v_ang)
        .map(|(&m, &a)| Complex64::from_polar(m, a))
        .collect();
    let ibus = y.mul(&v);
    let mut sched: Vec<f64> = net.buses.iter().map(|bus| -bus.p_load).collect();
    for (gi, g) in net.generators.iter().enumerate() {
        if let Some(i) = net.bus_index(g.bus) {
            if g.in_service {
                sched[i] += b.pg[gi];
            }
        }
    }
    for (i, bus) in net.buses.iter().enumerate() {
        let injected = (v[i] * ibus[i].conj()).re;
        let residual = (sched[i] - injected).abs();
        if residual > BALANCE_TOL {
            return Err(BaselineError::BalanceViolation { bus: bus.id, residual });
        }
    }
    Ok(())
}

pub fn save_baseline(b: &BaselineSolution, net: &Network) -> String {
    let doc = BaselineDoc {
        version: 1,
        case: b.case.clone(),
        objective: b.objective,
        bus: net
            .buses
            .iter()
            .enumerate()
            .map(|(i, bus)| (bus.id, b.v_mag[i], b.v_ang[i].to_degrees()))
            .collect(),
        gen: net
            .generators
            .iter()
            .zip(&b.pg)
            .map(|(g, &pg)| (g.bus, pg * net.base_mva))
            .collect(),
        branch: net
            .branches
            .iter()
            .zip(&b.branch_flow)
            .map(|(br, &p)| (br.from_bus, br.to_bus, p * net.base_mva))
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("baseline serialization cannot fail")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matpower::load_case;

    const FIXTURE_14: &str = include_str!("../../../fixtures/case14.m");
    const BASELINE_14: &str = include_str!("../../../fixtures/case14.baseline.json");
    const FIXTURE_57: &str = include_str!("../../../fixtures/case57.m");
    const BASELINE_57: &str = include_str!("../../../fixtures/case57.baseline.json");

    #[test]
    fn loads_case14_baseline() {
        let net = load_case(FIXTURE_14).unwrap();
        let b = load_baseline(BASELINE_14, &net).unwrap();
        assert!((b.objective - 8081.5275).abs() < 0.01);
        assert_eq!(b.pg.len(), 5);
        // known MATPOWER optimum dispatch, MW
        assert!((b.pg[0] * 100.0 - 194.33).abs() < 0.05);
        assert!((b.pg[1] * 100.0 - 36.72).abs() < 0.05);
    }

    #[test]
    fn loads_case57_baseline() {
        let net = load_case(FIXTURE_57).unwrap();
        let b = load_baseline(BASELINE_57, &net).unwrap();
        assert!((b.objective - 41737.788).abs() < 0.05);
        assert_eq!(b.branch_flow.len(), 80);
    }

    #[test]
    fn balance_check_rejects_corrupted_dispatch() {
        let net = load_case(FIXTURE_14).unwrap();
        let mut b = load_baseline(BASELINE_14, &net).unwrap();
        b.pg[1] += 0.3;
        match check_active_balance(&b, &net) {
            Err(BaselineError::BalanceViolation { bus: 2, .. }) => {}
            other => panic!("expected balance violation at bus 2, got {other:?}"),
        }
    }

    #[test]
    fn roundtrips_through_save() {
        let net = load_case(FIXTURE_14).unwrap();
        let b = load_baseline(BASELINE_14, &net).unwrap();
        let again = load_baseline(&save_baseline(&b, &net), &net).unwrap();
        assert_eq!(b.pg, again.pg);
        assert_eq!(b.branch_flow, again.branch_flow);
        assert_eq!(b.v_mag, again.v_mag);
        for (x, y) in b.v_ang.iter().zip(&again.v_ang) {
            // one radian/degree round trip
            assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
        }
    }

    #[test]
    fn wrong_network_is_rejected() {
        let net57 = load_case(FIXTURE_57).unwrap();
        assert!(matches!(
            load_baseline(BASELINE_14, &net57),
            Err(BaselineError::Mismatch(_))
        ));
    }
}
