//! Domain types shared by every other module: buses, branches, generators,
//! cost curves, and the per-unit [`Network`] container.
//!
//! All power quantities on a lowered `Network` are per-unit on `base_mva`;
//! angles are radians. Types are immutable after construction and safe to
//! share across threads.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("branch {from}-{to} has zero series impedance")]
    ZeroImpedance { from: usize, to: usize },
    #[error("system base power must be positive, got {0}")]
    NonPositiveBase(f64),
}

/// Bus role in the power flow problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BusKind {
    Slack,
    Pv,
    Pq,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    /// External integer label from the case file.
    pub id: usize,
    pub kind: BusKind,
    /// Active load (p.u. once lowered).
    pub p_load: f64,
    /// Reactive load, carried for the AC engine only.
    pub q_load: f64,
    /// Shunt conductance / susceptance (p.u.).
    pub shunt_g: f64,
    pub shunt_b: f64,
    /// Initial / stored voltage magnitude (p.u.) and angle (rad).
    pub v_mag: f64,
    pub v_ang: f64,
    pub v_max: f64,
    pub v_min: f64,
    pub base_kv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub from_bus: usize,
    pub to_bus: usize,
    /// Series resistance / reactance (p.u.).
    pub r: f64,
    pub x: f64,
    /// Total line charging susceptance (p.u.).
    pub b_charge: f64,
    /// Off-nominal turns ratio; 1.0 when none.
    pub tap: f64,
    /// Phase shift (rad).
    pub shift: f64,
    pub in_service: bool,
}

impl Branch {
    /// Series conductance and susceptance: g = r/(r²+x²), b = −x/(r²+x²).
    pub fn series_admittance(&self) -> Result<(f64, f64), ModelError> {
        derive_series_admittance(self.r, self.x).ok_or(ModelError::ZeroImpedance {
            from: self.from_bus,
            to: self.to_bus,
        })
    }
}

/// g = r/(r²+x²), b = −x/(r²+x²); `None` when r²+x² = 0.
pub fn derive_series_admittance(r: f64, x: f64) -> Option<(f64, f64)> {
    let z2 = r * r + x * x;
    if z2 == 0.0 {
        return None;
    }
    Some((r / z2, -x / z2))
}

/// Polynomial generation cost over active power in megawatts
/// (MATPOWER convention), coefficients stored lowest degree first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostCurve {
    pub coefficients: Vec<f64>,
}

impl CostCurve {
    pub fn new(coefficients: Vec<f64>) -> Self {
        CostCurve { coefficients }
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len().saturating_sub(1)
    }

    /// c0 + c1·p + c2·p² with `p_mw` in megawatts.
    pub fn cost(&self, p_mw: f64) -> f64 {
        let mut acc = 0.0;
        for &c in self.coefficients.iter().rev() {
            acc = acc * p_mw + c;
        }
        acc
    }

    pub fn c0(&self) -> f64 {
        self.coefficients.first().copied().unwrap_or(0.0)
    }

    pub fn c1(&self) -> f64 {
        self.coefficients.get(1).copied().unwrap_or(0.0)
    }

    pub fn c2(&self) -> f64 {
        self.coefficients.get(2).copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub bus: usize,
    /// Initial dispatch from the case file (p.u.).
    pub p_gen: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub q_min: f64,
    pub q_max: f64,
    /// Voltage setpoint (p.u.).
    pub v_set: f64,
    pub in_service: bool,
    pub cost: CostCurve,
}

/// A parsed, per-unit power system case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub name: String,
    pub base_mva: f64,
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    pub generators: Vec<Generator>,
    /// True once power quantities have been normalized by `base_mva`.
    pub per_unit: bool,
}

impl Network {
    pub fn bus_index(&self, id: usize) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    pub fn slack_index(&self) -> Option<usize> {
        self.buses.iter().position(|b| b.kind == BusKind::Slack)
    }

    /// In-service generators with the index of the bus they sit on.
    pub fn active_generators(&self) -> impl Iterator<Item = (usize, &Generator)> {
        self.generators.iter().filter(|g| g.in_service).filter_map(move |g| {
            self.bus_index(g.bus).map(|bi| (bi, g))
        })
    }

    pub fn in_service_branches(&self) -> impl Iterator<Item = &Branch> {
        self.branches.iter().filter(|b| b.in_service)
    }

    pub fn total_load(&self) -> f64 {
        self.buses.iter().map(|b| b.p_load).sum()
    }
}

/// Divide all power quantities by `base_mva`. Idempotent: a network already
/// flagged per-unit passes through unchanged.
pub fn to_per_unit(mut net: Network) -> Result<Network, ModelError> {
    if net.base_mva <= 0.0 {
        return Err(ModelError::NonPositiveBase(net.base_mva));
    }
    if net.per_unit {
        return Ok(net);
    }
    let s = net.base_mva;
    for b in &mut net.buses {
        b.p_load /= s;
        b.q_load /= s;
        b.shunt_g /= s;
        b.shunt_b /= s;
    }
    for g in &mut net.generators {
        g.p_gen /= s;
        g.p_min /= s;
        g.p_max /= s;
        g.q_min /= s;
        g.q_max /= s;
    }
    net.per_unit = true;
    Ok(net)
}

/// One failed validation rule, naming the entity it concerns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub entity: String,
    pub rule: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.entity, self.rule)
    }
}

fn violation(entity: impl Into<String>, rule: impl Into<String>) -> Violation {
    Violation { entity: entity.into(), rule: rule.into() }
}

/// Check every type invariant plus connectivity; empty list means valid.
pub fn validate_network(net: &Network) -> Vec<Violation> {
    let mut out = Vec::new();
    let slack_count = net.buses.iter().filter(|b| b.kind == BusKind::Slack).count();
    if slack_count == 0 {
        out.push(violation("network", "no slack bus"));
    } else if slack_count > 1 {
        out.push(violation("network", "multiple slack buses"));
    }
    if net.base_mva <= 0.0 {
        out.push(violation("network", "non-positive base MVA"));
    }
    let mut seen = std::collections::HashSet::new();
    for b in &net.buses {
        let name = format!("bus {}", b.id);
        if !seen.insert(b.id) {
            out.push(violation(&name, "duplicate bus id"));
        }
        if b.v_min <= 0.0 || b.v_min.is_nan() {
            out.push(violation(&name, "v_min must be positive"));
        }
        if b.v_min > b.v_max {
            out.push(violation(&name, "v_min exceeds v_max"));
        }
    }
    for br in &net.branches {
        let name = format!("branch {}-{}", br.from_bus, br.to_bus);
        if net.bus_index(br.from_bus).is_none() || net.bus_index(br.to_bus).is_none() {
            out.push(violation(&name, "dangling reference"));
            continue;
        }
        if br.x == 0.0 {
            out.push(violation(&name, "zero reactance"));
        }
        if br.r < 0.0 {
            out.push(violation(&name, "negative resistance"));
        }
        if br.tap <= 0.0 || br.tap.is_nan() {
            out.push(violation(&name, "tap must be positive"));
        }
        if derive_series_admittance(br.r, br.x).is_none() {
            out.push(violation(&name, "zero series impedance"));
        }
    }
    let mut vset_by_bus: std::collections::HashMap<usize, f64> = std::collections::HashMap::new();
    for g in &net.generators {
        let name = format!("generator at bus {}", g.bus);
        if net.bus_index(g.bus).is_none() {
            out.push(violation(&name, "dangling reference"));
            continue;
        }
        if g.p_min > g.p_max {
            out.push(violation(&name, "p_min exceeds p_max"));
        }
        if g.in_service {
            if let Some(&prev) = vset_by_bus.get(&g.bus) {
                if (prev - g.v_set).abs() > 1e-9 {
                    out.push(violation(&name, "conflicting voltage setpoints on one bus"));
                }
            } else {
                vset_by_bus.insert(g.bus, g.v_set);
            }
        }
        if g.cost.degree() > 2 && g.cost.coefficients[3..].iter().any(|&c| c != 0.0) {
            out.push(violation(&name, "cost degree above 2"));
        }
        if g.cost.c2() < 0.0 {
            out.push(violation(&name, "concave quadratic cost"));
        }
    }
    if !out.iter().any(|v| v.rule == "dangling reference") && !net.buses.is_empty() {
        if let Some(unreached) = first_unreachable(net) {
            out.push(violation(format!("bus {unreached}"), "disconnected from network"));
        }
    }
    out
}

/// BFS over in-service branches; returns an unreachable bus id if any.
fn first_unreachable(net: &Network) -> Option<usize> {
    let n = net.buses.len();
    let mut adj = vec![Vec::new(); n];
    for br in net.in_service_branches() {
        let (f, t) = (net.bus_index(br.from_bus)?, net.bus_index(br.to_bus)?);
        adj[f].push(t);
        adj[t].push(f);
    }
    let mut seen = vec![false; n];
    let mut queue = std::collections::VecDeque::from([0usize]);
    seen[0] = true;
    while let Some(i) = queue.pop_front() {
        for &j in &adj[i] {
            if !seen[j] {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    seen.iter().position(|&s| !s).map(|i| net.buses[i].id)
}

/// Minimal lossless two-bus system used across the crate's tests.
#[cfg(test)]
pub(crate) fn two_bus_network() -> Network {
    Network {
        name: "twobus".into(),
        base_mva: 100.0,
        buses: vec![
            Bus {
                id: 1,
                kind: BusKind::Slack,
                p_load: 0.0,
                q_load: 0.0,
                shunt_g: 0.0,
                shunt_b: 0.0,
                v_mag: 1.0,
                v_ang: 0.0,
                v_max: 1.1,
                v_min: 0.9,
                base_kv: 0.0,
            },
            Bus {
                id: 2,
                kind: BusKind::Pq,
                p_load: 0.5,
                q_load: 0.0,
                shunt_g: 0.0,
                shunt_b: 0.0,
                v_mag: 1.0,
                v_ang: 0.0,
                v_max: 1.1,
                v_min: 0.9,
                base_kv: 0.0,
            },
        ],
        branches: vec![Branch {
            from_bus: 1,
            to_bus: 2,
            r: 0.0,
            x: 0.25,
            b_charge: 0.0,
            tap: 1.0,
            shift: 0.0,
            in_service: true,
        }],
        generators: vec![Generator {
            bus: 1,
            p_gen: 0.5,
            p_min: 0.0,
            p_max: 10.0,
            q_min: -10.0,
            q_max: 10.0,
            v_set: 1.0,
            in_service: true,
            cost: CostCurve::new(vec![0.0, 20.0, 0.1]),
        }],
        per_unit: true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn series_admittance_case14_first_branch() {
        let (g, b) = derive_series_admittance(0.01938, 0.05917).unwrap();
        assert_relative_eq!(g, 4.999131600798035, max_relative = 1e-12);
        assert_relative_eq!(b, -15.26308652317955, max_relative = 1e-12);
    }

    #[test]
    fn series_admittance_lossless_line() {
        let (g, b) = derive_series_admittance(0.0, 0.25).unwrap();
        assert_eq!(g, 0.0);
        assert_eq!(b, -4.0);
    }

    #[test]
    fn series_admittance_symmetric_case() {
        let (g, b) = derive_series_admittance(1.0, 1.0).unwrap();
        assert_eq!((g, b), (0.5, -0.5));
    }

    #[test]
    fn series_admittance_rejects_zero_impedance() {
        assert!(derive_series_admittance(0.0, 0.0).is_none());
    }

    #[test]
    fn per_unit_divides_and_is_idempotent() {
        let mut net = two_bus_network();
        net.per_unit = false;
        net.buses[1].p_load = 21.7;
        net.generators[0].p_max = 332.4;
        let pu = to_per_unit(net).unwrap();
        assert_relative_eq!(pu.buses[1].p_load, 0.217, max_relative = 1e-15);
        assert_relative_eq!(pu.generators[0].p_max, 3.324, max_relative = 1e-15);
        let again = to_per_unit(pu.clone()).unwrap();
        assert_eq!(pu, again);
    }

    #[test]
    fn per_unit_zero_load_stays_zero() {
        let mut net = two_bus_network();
        net.per_unit = false;
        net.buses[1].p_load = 0.0;
        let pu = to_per_unit(net).unwrap();
        assert_eq!(pu.buses[1].p_load, 0.0);
    }

    #[test]
    fn per_unit_rejects_bad_base() {
        let mut net = two_bus_network();
        net.per_unit = false;
        net.base_mva = 0.0;
        assert!(matches!(to_per_unit(net), Err(ModelError::NonPositiveBase(_))));
    }

    #[test]
    fn validate_accepts_well_formed_network() {
        assert!(validate_network(&two_bus_network()).is_empty());
    }

    #[test]
    fn validate_flags_multiple_slack() {
        let mut net = two_bus_network();
        net.buses[1].kind = BusKind::Slack;
        let v = validate_network(&net);
        assert!(v.iter().any(|v| v.rule.contains("multiple slack")));
    }

    #[test]
    fn validate_flags_dangling_branch() {
        let mut net = two_bus_network();
        net.branches[0].to_bus = 99;
        let v = validate_network(&net);
        assert!(v.iter().any(|v| v.rule == "dangling reference" && v.entity.contains("99")));
    }

    #[test]
    fn validate_flags_disconnected_island() {
        let mut net = two_bus_network();
        net.branches[0].in_service = false;
        let v = validate_network(&net);
        assert!(v.iter().any(|v| v.rule.contains("disconnected")));
    }

    #[test]
    fn validate_flags_conflicting_setpoints() {
        let mut net = two_bus_network();
        let mut second = net.generators[0].clone();
        second.v_set = 1.05;
        net.generators.push(second);
        let v = validate_network(&net);
        assert!(v.iter().any(|v| v.rule.contains("conflicting voltage setpoints")));
        // same setpoint on both units is fine
        net.generators[1].v_set = net.generators[0].v_set;
        assert!(validate_network(&net).is_empty());
    }

    #[test]
    fn cost_curve_evaluates_quadratic() {
        let c = CostCurve::new(vec![0.0, 20.0, 0.0430293]);
        assert_relative_eq!(c.cost(100.0), 2000.0 + 430.293, max_relative = 1e-12);
        assert_eq!(c.degree(), 2);
    }
}
