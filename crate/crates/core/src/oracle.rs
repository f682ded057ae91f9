//! Brute-force projection by active-set enumeration, plus a KKT checker.
//!
//! Multiplier convention: with `B = [-I; a']` and `c = [0; b]`, optimality of `x` reads
//! `x - y - lambda e + B' mu = 0`, `e'x = 1`, `Bx <= c`, `mu >= 0`, `mu_i (Bx - c)_i = 0`.
//! On the support this gives `x_i = y_i + lambda - nu a_i` with `nu = mu[n]`, so `lambda`
//! is minus the simplex threshold of `y - nu a`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::problem::{feasibility_check, Feasibility, Instance};
use crate::scalar::Scalar;

/// Largest `n` accepted by [`oracle_project`]; the enumeration visits `2^(n+1)` candidates.
pub const ORACLE_MAX_N: usize = 12;

/// Relative spread of `a` over a support below which `a` counts as constant there.
const DEGENERATE_SPREAD: f64 = 1e-12;

const PRIMAL_TOL: f64 = 1e-10;
const DUAL_TOL: f64 = 1e-9;

/// Lagrange multipliers certifying a projection.
#[derive(Clone, Debug, PartialEq)]
pub struct KktCertificate {
    /// Multiplier of `e'x = 1`.
    pub lambda: f64,
    /// Multipliers of `-x <= 0` (first `n`) followed by that of `a'x <= b`.
    pub mu: Vec<f64>,
    /// Coordinates fixed at zero by the candidate active set.
    pub active_zero: Vec<usize>,
    pub linear_active: bool,
}

impl KktCertificate {
    /// Multiplier of the linear constraint; the dual root `sigma`.
    pub fn nu(&self) -> f64 {
        *self.mu.last().expect("certificate has n + 1 multipliers")
    }
}

/// Projection of `inst.y()` onto `C` by exhaustive enumeration of active sets.
pub fn oracle_project(inst: &Instance<f64>) -> Result<(Vec<f64>, KktCertificate)> {
    let mut first = None;
    enumerate(inst, |x, cert| {
        first = Some((x, cert));
        false
    })?;
    first.ok_or_else(|| infeasible(inst))
}

/// Every active-set candidate that passes the primal and dual feasibility screens.
/// By uniqueness of the projection they all carry the same `x`.
pub fn oracle_candidates(inst: &Instance<f64>) -> Result<Vec<(Vec<f64>, KktCertificate)>> {
    let mut all = Vec::new();
    enumerate(inst, |x, cert| {
        all.push((x, cert));
        true
    })?;
    if all.is_empty() {
        return Err(infeasible(inst));
    }
    Ok(all)
}

fn infeasible(inst: &Instance<f64>) -> Error {
    Error::Infeasible {
        min_a: inst.min_a(),
        b: inst.b(),
    }
}

/// Calls `visit` on each accepted candidate until it returns `false`. Supports are
/// visited by increasing size, so sparse projections are found early.
fn enumerate(
    inst: &Instance<f64>,
    mut visit: impl FnMut(Vec<f64>, KktCertificate) -> bool,
) -> Result<()> {
    let n = inst.n();
    if n > ORACLE_MAX_N {
        return Err(Error::TooLarge {
            n,
            limit: ORACLE_MAX_N,
        });
    }
    if feasibility_check(inst) == Feasibility::Infeasible {
        return Err(infeasible(inst));
    }
    let mut supports: Vec<u32> = (1..(1u32 << n)).collect();
    supports.sort_by_key(|m| m.count_ones());
    for mask in supports {
        let free: Vec<usize> = (0..n).filter(|&i| mask & (1 << i) != 0).collect();
        for linear_active in [false, true] {
            if let Some((x, cert)) = candidate(inst, &free, linear_active) {
                if !visit(x, cert) {
                    return Ok(());
                }
            }
        }
    }
    Ok(())
}

/// Minimizes `0.5 ||x - y||^2` subject to `e'x = 1`, `x_i = 0` off `free`, and `a'x = b`
/// when `linear_active`; returns the point with its multipliers if both are feasible.
fn candidate(
    inst: &Instance<f64>,
    free: &[usize],
    linear_active: bool,
) -> Option<(Vec<f64>, KktCertificate)> {
    let (y, a, b) = (inst.y(), inst.a(), inst.b());
    let n = y.len();
    let rows = if linear_active { 2 } else { 1 };
    let m = DMatrix::from_fn(
        rows,
        free.len(),
        |r, c| if r == 0 { 1.0 } else { a[free[c]] },
    );
    let rhs = if linear_active {
        DVector::from_vec(vec![1.0, b])
    } else {
        DVector::from_vec(vec![1.0])
    };
    let y_f = DVector::from_iterator(free.len(), free.iter().map(|&i| y[i]));
    let scale = m.iter().fold(1.0f64, |s, v| s.max(v.abs()));
    let pinv = m.clone().pseudo_inverse(1e-12 * scale).ok()?;
    let x_f = &y_f - &pinv * (&m * &y_f - &rhs);

    // An inconsistent system (a_F parallel to e_F with the wrong level) has no solution.
    let consistency = (&m * &x_f - &rhs).amax();
    if consistency > PRIMAL_TOL * (1.0 + b.abs()) {
        return None;
    }
    let mut x = vec![0.0; n];
    for (k, &i) in free.iter().enumerate() {
        x[i] = x_f[k];
    }
    if x.iter().any(|&v| v < -PRIMAL_TOL) {
        return None;
    }
    let ax: f64 = x.iter().zip(a).map(|(p, q)| p * q).sum();
    if ax > b + PRIMAL_TOL {
        return None;
    }

    let zeros: Vec<usize> = (0..n).filter(|i| !free.contains(i)).collect();
    let (lambda, nu) = multipliers(y, a, &x, free, &zeros, linear_active)?;
    let mut mu = vec![0.0; n + 1];
    for &i in &zeros {
        mu[i] = -y[i] - lambda + nu * a[i];
    }
    mu[n] = nu;
    if mu.iter().any(|&v| v < -DUAL_TOL) {
        return None;
    }
    Some((
        x,
        KktCertificate {
            lambda,
            mu,
            active_zero: zeros,
            linear_active,
        },
    ))
}

/// Solves `lambda - nu a_i = x_i - y_i` on the support. When `a` is constant there the
/// pair is a one-parameter family; the smallest `nu >= 0` keeping `mu >= 0` is chosen.
fn multipliers(
    y: &[f64],
    a: &[f64],
    x: &[f64],
    free: &[usize],
    zeros: &[usize],
    linear_active: bool,
) -> Option<(f64, f64)> {
    let g: Vec<f64> = free.iter().map(|&i| x[i] - y[i]).collect();
    let mean_g = g.iter().sum::<f64>() / g.len() as f64;
    if !linear_active {
        return Some((mean_g, 0.0));
    }
    let a_max = free.iter().map(|&i| a[i]).fold(f64::NEG_INFINITY, f64::max);
    let a_min = free.iter().map(|&i| a[i]).fold(f64::INFINITY, f64::min);
    if a_max - a_min > 1e-12 * (1.0 + a_max.abs().max(a_min.abs())) {
        let m = DMatrix::from_fn(free.len(), 2, |r, c| if c == 0 { 1.0 } else { -a[free[r]] });
        let sol = m.svd(true, true).solve(&DVector::from_vec(g), 1e-14).ok()?;
        return Some((sol[0], sol[1]));
    }
    // lambda = kappa + c nu; mu_i = -y_i - kappa + nu (a_i - c) on the zeros.
    let c = free.iter().map(|&i| a[i]).sum::<f64>() / free.len() as f64;
    let kappa = mean_g;
    let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
    for &i in zeros {
        let (alpha, beta) = (-y[i] - kappa, a[i] - c);
        if beta > 0.0 {
            lo = lo.max(-alpha / beta);
        } else if beta < 0.0 {
            hi = hi.min(-alpha / beta);
        } else if alpha < -DUAL_TOL {
            return None;
        }
    }
    if lo > hi + DUAL_TOL {
        return None;
    }
    Some((kappa + c * lo, lo))
}

/// Checks stationarity, primal and dual feasibility and complementarity to
/// `1e-8 (1 + ||y||_inf)`.
pub fn kkt_check(inst: &Instance<f64>, x: &[f64], cert: &KktCertificate) -> bool {
    let (y, a, b) = (inst.y(), inst.a(), inst.b());
    let n = y.len();
    if x.len() != n || cert.mu.len() != n + 1 {
        return false;
    }
    let tol = 1e-8 * (1.0 + y.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    let nu = cert.mu[n];
    let stationary = (0..n).all(|i| {
        let r = x[i] - y[i] - cert.lambda - cert.mu[i] + nu * a[i];
        r.abs() <= tol
    });
    let sum: f64 = x.iter().sum();
    let slack: f64 = x.iter().zip(a).map(|(p, q)| p * q).sum::<f64>() - b;
    let primal = x.iter().all(|&v| v >= -tol) && (sum - 1.0).abs() <= tol && slack <= tol;
    let dual = cert.mu.iter().all(|&v| v >= -tol);
    let complementary =
        (0..n).all(|i| (cert.mu[i] * x[i]).abs() <= tol) && (nu * slack).abs() <= tol;
    stationary && primal && dual && complementary
}

/// Multipliers implied by a dual solution: `x = proj_simplex(y - sigma a)` with threshold
/// `tau` gives `lambda = -tau`, `mu_i = tau - (y - sigma a)_i` on the zeros, `nu = sigma`.
///
/// When `a` is constant on the support of `x`, every multiplier in an interval reproduces
/// `x` and solvers may stop anywhere in it (possibly far out); the smallest admissible value
/// is used instead of `sigma`, which keeps the certificate on the scale of the data.
pub fn certificate_from_dual<T: Scalar>(inst: &Instance<T>, x: &[T], sigma: T) -> KktCertificate {
    let n = inst.n();
    let y: Vec<f64> = inst.y().iter().map(|v| v.as_f64()).collect();
    let a: Vec<f64> = inst.a().iter().map(|v| v.as_f64()).collect();
    let x: Vec<f64> = x.iter().map(|v| v.as_f64()).collect();
    let support: Vec<usize> = (0..n).filter(|&i| x[i] > 0.0).collect();
    let nu = smallest_admissible_nu(&y, &a, &x, &support, sigma.as_f64());
    let z: Vec<f64> = y.iter().zip(&a).map(|(&yi, &ai)| yi - nu * ai).collect();
    let tau = if support.is_empty() {
        z.iter().copied().fold(f64::NEG_INFINITY, f64::max) - 1.0
    } else {
        support.iter().map(|&i| z[i] - x[i]).sum::<f64>() / support.len() as f64
    };
    let mut mu = vec![0.0; n + 1];
    let mut active_zero = Vec::new();
    for i in 0..n {
        if x[i] <= 0.0 {
            mu[i] = (tau - z[i]).max(0.0);
            active_zero.push(i);
        }
    }
    mu[n] = nu;
    KktCertificate {
        lambda: -tau,
        mu,
        active_zero,
        linear_active: nu > 0.0,
    }
}

/// `sigma` unless `a` is constant (`= c`) on the support. Then `tau(nu) = t0 - nu c` with
/// `t0 = mean(y_k - x_k)` over the support, and `mu_i(nu) = t0 - y_i + nu (a_i - c)` must stay
/// non-negative on the zeros; coordinates with `a_i > c` give lower bounds on `nu`.
fn smallest_admissible_nu(y: &[f64], a: &[f64], x: &[f64], support: &[usize], sigma: f64) -> f64 {
    if sigma <= 0.0 || support.is_empty() {
        return sigma;
    }
    let (lo, hi) = support
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &i| {
            (l.min(a[i]), h.max(a[i]))
        });
    let scale = a.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    if hi - lo > DEGENERATE_SPREAD * scale {
        return sigma;
    }
    let c = support.iter().map(|&i| a[i]).sum::<f64>() / support.len() as f64;
    let t0 = support.iter().map(|&i| y[i] - x[i]).sum::<f64>() / support.len() as f64;
    let lower = (0..y.len())
        .filter(|&i| x[i] <= 0.0 && a[i] > c)
        .map(|i| (y[i] - t0) / (a[i] - c))
        .fold(0.0f64, f64::max);
    lower.min(sigma)
}
