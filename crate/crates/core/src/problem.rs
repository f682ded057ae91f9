//! Problem data, solver configuration, solve reports and feasibility screening.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// One projection problem: project `y` onto `{x in simplex : a'x <= b}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InstanceFile<T>", into = "InstanceFile<T>")]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct Instance<T> {
    y: Vec<T>,
    a: Vec<T>,
    b: T,
}

#[derive(Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
struct InstanceFile<T> {
    n: usize,
    y: Vec<T>,
    a: Vec<T>,
    b: T,
}

impl<T: Scalar> TryFrom<InstanceFile<T>> for Instance<T> {
    type Error = Error;

    fn try_from(f: InstanceFile<T>) -> Result<Self> {
        if f.y.len() != f.n {
            return Err(Error::DimensionMismatch {
                what: "y",
                expected: f.n,
                found: f.y.len(),
            });
        }
        Instance::new(f.y, f.a, f.b)
    }
}

impl<T: Scalar> From<Instance<T>> for InstanceFile<T> {
    fn from(inst: Instance<T>) -> Self {
        InstanceFile {
            n: inst.y.len(),
            y: inst.y,
            a: inst.a,
            b: inst.b,
        }
    }
}

impl<T: Scalar> Instance<T> {
    /// Validates and builds an instance. Requires `n >= 1`, equal lengths and finite data.
    pub fn new(y: Vec<T>, a: Vec<T>, b: T) -> Result<Self> {
        if y.is_empty() {
            return Err(Error::Empty("y"));
        }
        if a.len() != y.len() {
            return Err(Error::DimensionMismatch {
                what: "a",
                expected: y.len(),
                found: a.len(),
            });
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("y"));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("a"));
        }
        if !b.is_finite() {
            return Err(Error::NonFinite("b"));
        }
        Ok(Self { y, a, b })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn y(&self) -> &[T] {
        &self.y
    }

    pub fn a(&self) -> &[T] {
        &self.a
    }

    pub fn b(&self) -> T {
        self.b
    }

    /// Same constraint, different point.
    pub fn with_y(&self, y: Vec<T>) -> Result<Self> {
        Self::new(y, self.a.clone(), self.b)
    }

    pub fn min_a(&self) -> T {
        self.a.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&s)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n").map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Outcome of the feasibility screen that runs ahead of every solve.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Feasibility {
    Feasible,
    Infeasible,
    /// `a = 0` and `b >= 0`: the halfspace is all of space.
    ReducesToSimplex,
}

/// The simplex vertex minimizing `a'x` attains `min_i a_i`, so `C` is nonempty iff
/// `min_i a_i <= b`.
pub fn feasibility_check<T: Scalar>(inst: &Instance<T>) -> Feasibility {
    if inst.a.iter().all(|v| v.is_zero()) {
        if inst.b >= T::zero() {
            Feasibility::ReducesToSimplex
        } else {
            Feasibility::Infeasible
        }
    } else if inst.min_a() > inst.b {
        Feasibility::Infeasible
    } else {
        Feasibility::Feasible
    }
}

/// Parameters of the bracketing/secant and semismooth Newton solvers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Residual tolerance on `|psi(sigma)|`.
    pub epsilon: f64,
    /// Bracket growth factor (`> 1`).
    pub rho: f64,
    /// Initial bracket step.
    pub delta_sigma: f64,
    /// Armijo constant, in `(0, 1/2)`.
    pub mu_hat: f64,
    /// Backtracking factor, in `(0, 1)`.
    pub delta_hat: f64,
    /// Regularization cap, in `(0, 1]`.
    pub tau1_hat: f64,
    /// Regularization scale, in `(0, 1]`.
    pub tau2_hat: f64,
    /// Newton starting point.
    pub sigma0: f64,
    pub max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-7,
            rho: 2.0,
            delta_sigma: 1.0,
            mu_hat: 0.25,
            delta_hat: 0.5,
            tau1_hat: 1.0,
            tau2_hat: 1e-3,
            sigma0: 0.0,
            max_iter: 500,
        }
    }
}

impl SolverConfig {
    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.to_string()));
        let open01 = |v: f64| v > 0.0 && v < 1.0;
        let half_open01 = |v: f64| v > 0.0 && v <= 1.0;
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad("epsilon must be positive");
        }
        if !(self.rho > 1.0 && self.rho.is_finite()) {
            return bad("rho must exceed 1");
        }
        if !(self.delta_sigma > 0.0 && self.delta_sigma.is_finite()) {
            return bad("delta_sigma must be positive");
        }
        if !(self.mu_hat > 0.0 && self.mu_hat < 0.5) {
            return bad("mu_hat must lie in (0, 1/2)");
        }
        if !open01(self.delta_hat) {
            return bad("delta_hat must lie in (0, 1)");
        }
        if !half_open01(self.tau1_hat) {
            return bad("tau1_hat must lie in (0, 1]");
        }
        if !half_open01(self.tau2_hat) {
            return bad("tau2_hat must lie in (0, 1]");
        }
        if !(self.sigma0 >= 0.0 && self.sigma0.is_finite()) {
            return bad("sigma0 must be non-negative");
        }
        if self.max_iter == 0 {
            return bad("max_iter must be positive");
        }
        Ok(())
    }
}

/// How a solve ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    /// `psi(0) <= 0`: the projection onto the simplex already satisfies `a'x <= b`.
    ConstraintInactive,
    Converged,
    MaxIterExceeded,
    Infeasible,
}

/// Result of projecting one instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct SolveReport<T> {
    pub x: Vec<T>,
    #[serde(rename = "sigma")]
    pub sigma_star: T,
    /// `|psi(sigma_star)|`; zero on the inactive branch.
    pub residual: T,
    pub psi_evals: usize,
    pub bracket_iters: usize,
    pub inner_iters: usize,
    pub status: SolveStatus,
}

impl<T: Scalar> SolveReport<T> {
    /// Report for an instance rejected by [`feasibility_check`]; `residual` carries the
    /// violation `min(a) - b` of the best simplex vertex.
    pub fn infeasible(inst: &Instance<T>) -> Self {
        Self {
            x: Vec::new(),
            sigma_star: T::zero(),
            residual: (inst.min_a() - inst.b()).max(T::zero()),
            psi_evals: 0,
            bracket_iters: 0,
            inner_iters: 0,
            status: SolveStatus::Infeasible,
        }
    }

    pub fn is_success(&self) -> bool {
        matches!(
            self.status,
            SolveStatus::Converged | SolveStatus::ConstraintInactive
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}
