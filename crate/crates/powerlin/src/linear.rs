//! The five non-iterative linear approximations of active branch flow,
//! built as sparse affine expressions over a method-specific variable
//! space.
//!
//! Method 1 works in angles alone (flat voltage). Method 2 linearizes about
//! the flat state in (V, θ). Method 3 uses squared voltage W = V² and the
//! modified angle φ = θV² with a 0.95 adjustment factor. Method 4 uses
//! (W, θ). Method 5 uses the log voltage U = ln V and θ, with U known at
//! generator buses; its branch flow carries a 1/(1 − U_i) recovery factor
//! applied after solving.
//!
//! Tap ratios and phase shifts are ignored throughout this module (series
//! g, b only); the AC engine models them fully, and the gap is part of
//! what the benchmark measures.

use crate::model::Network;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LinearError {
    #[error("branch {from}-{to} has zero series impedance")]
    ZeroImpedance { from: usize, to: usize },
    #[error("recovery domain violated: {0}")]
    RecoveryDomain(String),
    #[error("method {0} has no linear flow model (iterative methods build on method 1)")]
    NotALinearMethod(u8),
}

/// The seven benchmarked methods. Only 1–5 define standalone linear flow
/// models; 6 and 7 are method-1 loss-feedback loops.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    DcFlow,
    TaylorVoltage,
    ModifiedAngle,
    SquaredVoltage,
    LogVoltage,
    LossQuadratic,
    LossProportional,
}

impl Method {
    pub fn id(self) -> u8 {
        match self {
            Method::DcFlow => 1,
            Method::TaylorVoltage => 2,
            Method::ModifiedAngle => 3,
            Method::SquaredVoltage => 4,
            Method::LogVoltage => 5,
            Method::LossQuadratic => 6,
            Method::LossProportional => 7,
        }
    }

    pub fn from_id(id: u8) -> Option<Method> {
        Some(match id {
            1 => Method::DcFlow,
            2 => Method::TaylorVoltage,
            3 => Method::ModifiedAngle,
            4 => Method::SquaredVoltage,
            5 => Method::LogVoltage,
            6 => Method::LossQuadratic,
            7 => Method::LossProportional,
            _ => return None,
        })
    }

    pub fn is_iterative(self) -> bool {
        matches!(self, Method::LossQuadratic | Method::LossProportional)
    }

    pub fn all() -> [Method; 7] {
        [
            Method::DcFlow,
            Method::TaylorVoltage,
            Method::ModifiedAngle,
            Method::SquaredVoltage,
            Method::LogVoltage,
            Method::LossQuadratic,
            Method::LossProportional,
        ]
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "M{}", self.id())
    }
}

/// What a model variable stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    /// θ (or φ for method 3) at a bus index.
    Angle(usize),
    Voltage(usize),
    SquaredVoltage(usize),
    ModifiedAngle(usize),
    LogVoltage(usize),
    /// Active output of generator index.
    GeneratorOutput(usize),
}

/// Ordered variable descriptors plus pins and box bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct VariableSpace {
    pub vars: Vec<VarKind>,
    /// Fixed-value assignment where `Some`; pinned variables still occupy
    /// their slot so expressions stay stable.
    pub pinned: Vec<Option<f64>>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl VariableSpace {
    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }
}

/// Sparse affine expression over a variable space.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl LinearExpr {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(i, c)| c * x[i]).sum::<f64>() + self.constant
    }

    fn add(&mut self, var: usize, coef: f64) {
        if coef != 0.0 {
            self.terms.push((var, coef));
        }
    }
}

/// One nodal active-power balance: `lhs == rhs` over the variable space.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalBalance {
    pub bus: usize,
    pub lhs: LinearExpr,
    pub rhs: f64,
    /// Multiplier applied to any extra fictitious load added at this bus
    /// (1 for methods 1–4; (1 − U_i) at method-5 generator buses).
    pub extra_load_scale: f64,
    /// Method-5 PQ buses also scale the U_i coefficient with added load.
    pub extra_load_var: Option<usize>,
}

/// A method-specific linear flow model over `net`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFlowModel {
    pub method: Method,
    pub space: VariableSpace,
    /// Per in-service branch: the affine from-side flow expression.
    /// For method 5 this is the product-side numerator L_ij; recovery
    /// divides by (1 − U_i).
    pub flows: Vec<LinearExpr>,
    /// Branch endpoints as bus indices, aligned with `flows`.
    pub branch_ends: Vec<(usize, usize)>,
    pub balances: Vec<NodalBalance>,
    /// For each bus, index of its angle-like variable.
    pub angle_var: Vec<usize>,
    /// For each bus, index of its voltage-like variable (methods 2–5).
    pub voltage_var: Option<Vec<usize>>,
    /// Index of each generator's output variable.
    pub pg_var: Vec<usize>,
}

// scalar flow formulas, shared by the model builder, evaluation, and tests

pub fn m1_flow(x: f64, th_i: f64, th_j: f64) -> f64 {
    (th_i - th_j) / x
}

pub fn m2_flow(g: f64, b: f64, v_i: f64, v_j: f64, th_i: f64, th_j: f64) -> f64 {
    g * (v_i - v_j) - b * (th_i - th_j)
}

pub fn m3_flow(g: f64, b: f64, w_i: f64, w_j: f64, phi_i: f64, phi_j: f64) -> f64 {
    0.95 * (g * (w_i - w_j) - b * (phi_i - phi_j))
}

pub fn m4_flow(g: f64, b: f64, w_i: f64, w_j: f64, th_i: f64, th_j: f64) -> f64 {
    g * (w_i - w_j) / 2.0 - b * (th_i - th_j)
}

pub fn m5_flow(g: f64, b: f64, u_i: f64, u_j: f64, th_i: f64, th_j: f64) -> f64 {
    (g * (u_i - u_j) - b * (th_i - th_j)) / (1.0 - u_i)
}

pub fn build_method1(net: &Network) -> Result<LinearFlowModel, LinearError> {
    build_model(Method::DcFlow, net)
}

pub fn build_method2(net: &Network) -> Result<LinearFlowModel, LinearError> {
    build_model(Method::TaylorVoltage, net)
}

pub fn build_method3(net: &Network) -> Result<LinearFlowModel, LinearError> {
    build_model(Method::ModifiedAngle, net)
}

pub fn build_method4(net: &Network) -> Result<LinearFlowModel, LinearError> {
    build_model(Method::SquaredVoltage, net)
}

pub fn build_method5(net: &Network) -> Result<LinearFlowModel, LinearError> {
    build_model(Method::LogVoltage, net)
}

/// Voltage setpoint per bus index for buses hosting in-service generators.
fn setpoint_by_bus(net: &Network) -> Vec<Option<f64>> {
    let mut v = vec![None; net.buses.len()];
    for (bi, g) in net.active_generators() {
        if v[bi].is_none() {
            v[bi] = Some(g.v_set);
        }
    }
    v
}

pub fn build_model(method: Method, net: &Network) -> Result<LinearFlowModel, LinearError> {
    if method.is_iterative() {
        return Err(LinearError::NotALinearMethod(method.id()));
    }
    let nb = net.buses.len();
    let slack = net
        .slack_index()
        .ok_or_else(|| LinearError::RecoveryDomain("network has no slack bus".into()))?;
    let has_voltage_block = method != Method::DcFlow;

    let mut vars = Vec::new();
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    let mut pinned: Vec<Option<f64>> = Vec::new();
    let angle_var: Vec<usize> = (0..nb).collect();
    for i in 0..nb {
        vars.push(match method {
            Method::ModifiedAngle => VarKind::ModifiedAngle(i),
            _ => VarKind::Angle(i),
        });
        lower.push(f64::NEG_INFINITY);
        upper.push(f64::INFINITY);
        pinned.push(if i == slack { Some(0.0) } else { None });
    }
    let setpoints = setpoint_by_bus(net);
    let voltage_var = if has_voltage_block {
        let base = vars.len();
        for (i, bus) in net.buses.iter().enumerate() {
            let (kind, lo, hi) = match method {
                Method::TaylorVoltage => (VarKind::Voltage(i), bus.v_min, bus.v_max),
                Method::ModifiedAngle | Method::SquaredVoltage => (
                    VarKind::SquaredVoltage(i),
                    bus.v_min * bus.v_min,
                    bus.v_max * bus.v_max,
                ),
                Method::LogVoltage => {
                    (VarKind::LogVoltage(i), bus.v_min.ln(), bus.v_max.ln())
                }
                _ => unreachable!(),
            };
            vars.push(kind);
            lower.push(lo);
            upper.push(hi);
            let pin = match method {
                // W at the slack pinned to its setpoint squared
                Method::ModifiedAngle if i == slack => {
                    let vs = setpoints[i].unwrap_or(net.buses[i].v_mag);
                    Some(vs * vs)
                }
                // U known at every generator bus
                Method::LogVoltage if setpoints[i].is_some() => {
                    Some(setpoints[i].unwrap().ln())
                }
                _ => None,
            };
            pinned.push(pin);
        }
        Some((base..base + nb).collect::<Vec<usize>>())
    } else {
        None
    };
    let pg_base = vars.len();
    let gens: Vec<(usize, &crate::model::Generator)> = net.active_generators().collect();
    let mut pg_var = Vec::with_capacity(gens.len());
    for (k, (_, g)) in gens.iter().enumerate() {
        vars.push(VarKind::GeneratorOutput(k));
        lower.push(g.p_min);
        upper.push(g.p_max);
        pinned.push(None);
        pg_var.push(pg_base + k);
    }

    // branch flow expressions
    let mut flows = Vec::new();
    let mut branch_ends = Vec::new();
    for br in net.in_service_branches() {
        let (Some(f), Some(t)) = (net.bus_index(br.from_bus), net.bus_index(br.to_bus)) else {
            continue;
        };
        let (g, b) = br.series_admittance().map_err(|_| LinearError::ZeroImpedance {
            from: br.from_bus,
            to: br.to_bus,
        })?;
        if br.x == 0.0 {
            return Err(LinearError::ZeroImpedance { from: br.from_bus, to: br.to_bus });
        }
        let mut e = LinearExpr::default();
        match method {
            Method::DcFlow => {
                e.add(angle_var[f], 1.0 / br.x);
                e.add(angle_var[t], -1.0 / br.x);
            }
            Method::TaylorVoltage => {
                let vv = voltage_var.as_ref().unwrap();
                e.add(vv[f], g);
                e.add(vv[t], -g);
                e.add(angle_var[f], -b);
                e.add(angle_var[t], b);
            }
            Method::ModifiedAngle => {
                let vv = voltage_var.as_ref().unwrap();
                e.add(vv[f], 0.95 * g);
                e.add(vv[t], -0.95 * g);
                e.add(angle_var[f], -0.95 * b);
                e.add(angle_var[t], 0.95 * b);
            }
            Method::SquaredVoltage => {
                let vv = voltage_var.as_ref().unwrap();
                e.add(vv[f], g / 2.0);
                e.add(vv[t], -g / 2.0);
                e.add(angle_var[f], -b);
                e.add(angle_var[t], b);
            }
            Method::LogVoltage => {
                let vv = voltage_var.as_ref().unwrap();
                e.add(vv[f], g);
                e.add(vv[t], -g);
                e.add(angle_var[f], -b);
                e.add(angle_var[t], b);
            }
            _ => unreachable!(),
        }
        flows.push(e);
        branch_ends.push((f, t));
    }

    // nodal balances: sum of incident from-side expressions (to side enters
    // negated) minus generation equals minus load
    let mut balances: Vec<NodalBalance> = Vec::with_capacity(nb);
    for (i, bus) in net.buses.iter().enumerate() {
        let mut lhs = LinearExpr::default();
        for (k, &(f, t)) in branch_ends.iter().enumerate() {
            if f == i {
                for &(v, c) in &flows[k].terms {
                    lhs.add(v, c);
                }
            } else if t == i {
                for &(v, c) in &flows[k].terms {
                    lhs.add(v, -c);
                }
            }
        }
        lhs = compress(lhs);
        let load = bus.p_load + bus.shunt_g;
        let (rhs, extra_load_scale, extra_load_var);
        if method == Method::LogVoltage {
            let u_i = voltage_var.as_ref().unwrap()[i];
            if let Some(vs) = setpoints[i] {
                // generator bus: U known, RHS linear in Pg
                let scale = 1.0 - vs.ln();
                for (k, (bi, _)) in gens.iter().enumerate() {
                    if *bi == i {
                        lhs.add(pg_var[k], -scale);
                    }
                }
                rhs = -load * scale;
                extra_load_scale = scale;
                extra_load_var = None;
            } else {
                // PQ bus: move load·U_i to the left side
                lhs.add(u_i, -load);
                lhs = compress(lhs);
                rhs = -load;
                extra_load_scale = 1.0;
                extra_load_var = Some(u_i);
            }
        } else {
            for (k, (bi, _)) in gens.iter().enumerate() {
                if *bi == i {
                    lhs.add(pg_var[k], -1.0);
                }
            }
            rhs = -load;
            extra_load_scale = 1.0;
            extra_load_var = None;
        }
        balances.push(NodalBalance { bus: i, lhs, rhs, extra_load_scale, extra_load_var });
    }

    Ok(LinearFlowModel {
        method,
        space: VariableSpace { vars, pinned, lower, upper },
        flows,
        branch_ends,
        balances,
        angle_var,
        voltage_var,
        pg_var,
    })
}

fn compress(e: LinearExpr) -> LinearExpr {
    let mut map: std::collections::BTreeMap<usize, f64> = Default::default();
    for (v, c) in e.terms {
        *map.entry(v).or_default() += c;
    }
    LinearExpr {
        terms: map.into_iter().filter(|&(_, c)| c != 0.0).collect(),
        constant: e.constant,
    }
}

/// Map a physical state (V, θ) into the model's variable space.
/// Generator-output slots are filled with zero.
pub fn forward_transform(
    model: &LinearFlowModel,
    v_mag: &[f64],
    v_ang: &[f64],
) -> Result<Vec<f64>, LinearError> {
    let mut x = vec![0.0; model.space.len()];
    for (idx, kind) in model.space.vars.iter().enumerate() {
        x[idx] = match *kind {
            VarKind::Angle(i) => v_ang[i],
            VarKind::Voltage(i) => v_mag[i],
            VarKind::SquaredVoltage(i) => v_mag[i] * v_mag[i],
            VarKind::ModifiedAngle(i) => v_ang[i] * v_mag[i] * v_mag[i],
            VarKind::LogVoltage(i) => {
                if v_mag[i] <= 0.0 {
                    return Err(LinearError::RecoveryDomain(format!(
                        "log voltage needs V > 0, bus index {i} has {}",
                        v_mag[i]
                    )));
                }
                v_mag[i].ln()
            }
            VarKind::GeneratorOutput(_) => 0.0,
        };
    }
    Ok(x)
}

/// Recover (V, θ) from a variable assignment.
pub fn recover_state(
    model: &LinearFlowModel,
    x: &[f64],
) -> Result<(Vec<f64>, Vec<f64>), LinearError> {
    let nb = model.angle_var.len();
    let mut v = vec![1.0; nb];
    let mut th = vec![0.0; nb];
    for i in 0..nb {
        let a = x[model.angle_var[i]];
        match model.method {
            Method::DcFlow => th[i] = a,
            Method::TaylorVoltage => {
                th[i] = a;
                v[i] = x[model.voltage_var.as_ref().unwrap()[i]];
            }
            Method::ModifiedAngle => {
                let w = x[model.voltage_var.as_ref().unwrap()[i]];
                if w <= 0.0 {
                    return Err(LinearError::RecoveryDomain(format!(
                        "W must be positive to recover V, bus index {i} has {w}"
                    )));
                }
                v[i] = w.sqrt();
                th[i] = a / w;
            }
            Method::SquaredVoltage => {
                let w = x[model.voltage_var.as_ref().unwrap()[i]];
                if w <= 0.0 {
                    return Err(LinearError::RecoveryDomain(format!(
                        "W must be positive to recover V, bus index {i} has {w}"
                    )));
                }
                v[i] = w.sqrt();
                th[i] = a;
            }
            Method::LogVoltage => {
                th[i] = a;
                v[i] = x[model.voltage_var.as_ref().unwrap()[i]].exp();
            }
            _ => unreachable!(),
        }
    }
    Ok((v, th))
}

/// Per-branch flows implied by a variable assignment (method 5 applies the
/// 1/(1 − U_i) recovery).
pub fn branch_flows_at(model: &LinearFlowModel, x: &[f64]) -> Result<Vec<f64>, LinearError> {
    let mut out = Vec::with_capacity(model.flows.len());
    for (k, e) in model.flows.iter().enumerate() {
        let mut p = e.eval(x);
        if model.method == Method::LogVoltage {
            let (f, _) = model.branch_ends[k];
            let u = x[model.voltage_var.as_ref().unwrap()[f]];
            if u >= 1.0 {
                return Err(LinearError::RecoveryDomain(format!(
                    "U at bus index {f} is {u} >= 1 (V >= e)"
                )));
            }
            p /= 1.0 - u;
        }
        out.push(p);
    }
    Ok(out)
}

/// Evaluate the model's flow predictions at an arbitrary physical state.
pub fn evaluate_flow(
    model: &LinearFlowModel,
    v_mag: &[f64],
    v_ang: &[f64],
) -> Result<Vec<f64>, LinearError> {
    let x = forward_transform(model, v_mag, v_ang)?;
    branch_flows_at(model, &x)
}
