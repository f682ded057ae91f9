//! Euclidean projection onto the simplex intersected with one halfspace,
//! `C = {x >= 0, sum x = 1, a'x <= b}`.
//!
//! Two solvers work on the scalar dual `psi(sigma) = a' proj_simplex(y - sigma a) - b`:
//! a bracketing plus safeguarded secant root finder ([`lrsa_project`]) and a regularized
//! semismooth Newton method ([`ssn_project`]). [`jacobian`] exposes a generalized Jacobian
//! of the projection as a linear operator, and [`oracle`] is a brute-force solver for
//! small instances used to check the others.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the oracle is `f64` only.

pub mod bench;
pub mod dual;
pub mod error;
pub mod instances;
pub mod jacobian;
pub mod lrsa;
pub mod oracle;
pub mod problem;
pub mod scalar;
pub mod simplex;
pub mod ssn;

pub use dual::{h, psi, psi_left_derivative, psi_right_derivative, DualWorkspace};
pub use error::{CsvIssue, Error, Result};
pub use jacobian::{compute_jacobian, JacobianCase, JacobianOperator};
pub use lrsa::{bracket_root, lrsa_project, secant_solve, Bracket, BracketOutcome, SecantOutcome};
pub use oracle::{kkt_check, oracle_project, KktCertificate};
pub use problem::{
    feasibility_check, Feasibility, Instance, SolveReport, SolveStatus, SolverConfig,
};
pub use scalar::Scalar;
pub use simplex::{moreau_envelope, project_simplex, project_simplex_reference, SimplexProjection};
pub use ssn::{line_search, newton_direction, ssn_project, NewtonTrace};

pub type Instance64 = Instance<f64>;
pub type Instance32 = Instance<f32>;
pub type SolveReport64 = SolveReport<f64>;
pub type SolveReport32 = SolveReport<f32>;
pub type NewtonTrace64 = NewtonTrace<f64>;
pub type JacobianOperator64 = JacobianOperator<f64>;
pub type JacobianOperator32 = JacobianOperator<f32>;
