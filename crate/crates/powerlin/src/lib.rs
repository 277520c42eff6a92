//! Linear approximations of AC active power flow, the linearized OPF
//! problems they induce, and the machinery to validate their solutions
//! with a full AC power flow and score the results.
//!
//! The crate is organized around the benchmark pipeline:
//!
//! * [`matpower`] parses MATPOWER case text into a per-unit [`model::Network`];
//! * [`linear`] builds the five linear flow models;
//! * [`opf`] assembles and solves the linearized OPF, including the
//!   loss-feedback loop behind methods 6 and 7;
//! * [`ac`] provides the exact flow formulas and the Newton-Raphson
//!   validation power flow;
//! * [`baseline`] loads the reference optimum every metric compares against;
//! * [`evaluation`] computes the approximation/optimality/feasibility
//!   metrics, timing, and 1–100 radar scores.

pub mod ac;
pub mod baseline;
pub mod evaluation;
pub mod linalg;
pub mod linear;
pub mod matpower;
pub mod model;
pub mod opf;
pub mod qp;

pub use linear::Method;
pub use model::Network;
