//! Semismooth Newton iteration on `psi(sigma) = 0`, globalized by an Armijo search on `h`.

use serde::{Deserialize, Serialize};

use crate::dual::{h_increment, psi_right_derivative, shifted_point, DualWorkspace};
use crate::error::{Error, Result};
use crate::lrsa::inactive_report;
use crate::problem::{
    feasibility_check, Feasibility, Instance, SolveReport, SolveStatus, SolverConfig,
};
use crate::scalar::Scalar;
use crate::simplex::project_simplex;

/// Largest backtracking exponent tried by [`line_search`].
pub const MAX_BACKTRACKS: usize = 60;

/// Consecutive flat-derivative steps without residual decrease or movement of `sigma`
/// that count as stagnation.
const STALL_STEPS: usize = 3;

/// Relative change of `sigma` below which a step counts as no movement.
const STALL_MOVE: f64 = 1e-12;

/// Iterates of one Newton solve, for convergence-rate inspection.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct NewtonTrace<T> {
    #[serde(rename = "sigma")]
    pub sigma_seq: Vec<T>,
    #[serde(rename = "residual")]
    pub residual_seq: Vec<T>,
    /// Accepted step fractions `delta_hat^m`.
    #[serde(rename = "step")]
    pub step_sizes: Vec<T>,
    /// Set when the solve stopped because the chosen derivative element stayed zero
    /// without progress (the `a = b e` degeneracy and its near neighbours), or the line
    /// search exhausted its backtracking budget.
    #[serde(skip)]
    pub stalled: bool,
}

impl<T: Scalar> NewtonTrace<T> {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// Regularized Newton step `-psi / (upsilon - eps_bar)` with
/// `eps_bar = tau2 * min(tau1, |psi|)`. Returns zero when `psi` is already zero.
pub fn newton_direction<T: Scalar>(psi_val: T, upsilon: T, tau1: T, tau2: T) -> T {
    if psi_val == T::zero() {
        return T::zero();
    }
    let eps_bar = tau2 * tau1.min(psi_val.abs());
    -psi_val / (upsilon - eps_bar)
}

/// Smallest `m >= 0` with
/// `h(sigma + delta^m dsigma) >= h(sigma) + mu delta^m psi(sigma) dsigma`, the trial point
/// clamped to `sigma >= 0`. Returns `(m, sigma_next)`.
pub fn line_search<T: Scalar>(
    inst: &Instance<T>,
    sigma: T,
    dsigma: T,
    psi_val: T,
    cfg: &SolverConfig,
) -> Result<(usize, T)> {
    let ws = DualWorkspace::new(inst, sigma)?;
    let (m, next, _) = search_from(inst, &ws, psi_val, dsigma, cfg)?;
    Ok((m, next.sigma))
}

/// `h(trial) - h(current)`. When both minimizers share a support, `psi` is affine on the
/// whole segment between them and the trapezoid rule is exact; it also stays accurate
/// when the increment is far below the rounding level of `h` itself, where the
/// direct difference turns to noise.
fn ascent<T: Scalar>(
    inst: &Instance<T>,
    from: &DualWorkspace<T>,
    r_from: T,
    to: &DualWorkspace<T>,
    r_to: T,
) -> T {
    let same_support = from
        .proj
        .x
        .iter()
        .zip(&to.proj.x)
        .all(|(&p, &q)| (p > T::zero()) == (q > T::zero()));
    if same_support {
        (to.sigma - from.sigma) * (r_from + r_to) * T::lit(0.5)
    } else {
        h_increment(inst, from.sigma, &from.proj.x, to.sigma, &to.proj.x)
    }
}

/// Returns `(m, workspace at the accepted point, trial projections performed)`.
fn search_from<T: Scalar>(
    inst: &Instance<T>,
    ws: &DualWorkspace<T>,
    psi_val: T,
    dsigma: T,
    cfg: &SolverConfig,
) -> Result<(usize, DualWorkspace<T>, usize)> {
    if dsigma == T::zero() || !dsigma.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "line search needs a finite nonzero direction, got {dsigma}"
        )));
    }
    let mu = T::lit(cfg.mu_hat);
    let delta = T::lit(cfg.delta_hat);
    let mut frac = T::one();
    for m in 0..=MAX_BACKTRACKS {
        let trial = (ws.sigma + frac * dsigma).max(T::zero());
        let shifted = shifted_point(inst, trial);
        let proj = project_simplex(&shifted)?;
        let next = DualWorkspace::from_projection(trial, shifted, proj);
        let r_next = next.psi(inst);
        if ascent(inst, ws, psi_val, &next, r_next) >= mu * frac * psi_val * dsigma {
            return Ok((m, next, m + 1));
        }
        frac = frac * delta;
    }
    Err(Error::MaxIterExceeded(MAX_BACKTRACKS))
}

/// Projection onto `C` by semismooth Newton on the dual, with `upsilon = psi'_+(sigma)`.
pub fn ssn_project<T: Scalar>(
    inst: &Instance<T>,
    cfg: &SolverConfig,
) -> Result<(SolveReport<T>, NewtonTrace<T>)> {
    cfg.validate()?;
    let mut trace = NewtonTrace::default();
    match feasibility_check(inst) {
        Feasibility::Infeasible => return Ok((SolveReport::infeasible(inst), trace)),
        Feasibility::ReducesToSimplex => return Ok((inactive_report(inst, 0)?, trace)),
        Feasibility::Feasible => {}
    }
    let origin = DualWorkspace::new(inst, T::zero())?;
    let r0 = origin.psi(inst);
    if r0 <= T::zero() {
        return Ok((inactive_report(inst, 1)?, trace));
    }

    let eps = T::lit(cfg.epsilon);
    let (tau1, tau2) = (T::lit(cfg.tau1_hat), T::lit(cfg.tau2_hat));
    let a_scale = inst.a().iter().fold(T::zero(), |m, &v| m.max(v * v));
    let flat_tol = T::lit(T::DEGENERACY_TOL) * (T::one() + a_scale);

    let mut evals = 1;
    let mut ws = if cfg.sigma0 == 0.0 {
        origin
    } else {
        evals += 1;
        DualWorkspace::new(inst, T::lit(cfg.sigma0))?
    };
    let mut r = ws.psi(inst);
    trace.sigma_seq.push(ws.sigma);
    trace.residual_seq.push(r.abs());

    let mut iters = 0;
    let mut flat_run = 0;
    let mut status = SolveStatus::Converged;
    while r.abs() > eps {
        if iters >= cfg.max_iter {
            status = SolveStatus::MaxIterExceeded;
            break;
        }
        let upsilon = psi_right_derivative(inst, &ws);
        let dsigma = newton_direction(r, upsilon, tau1, tau2);
        let (m, next_ws, trials) = match search_from(inst, &ws, r, dsigma, cfg) {
            Ok(v) => v,
            Err(Error::MaxIterExceeded(_)) => {
                evals += MAX_BACKTRACKS + 1;
                trace.stalled = true;
                status = SolveStatus::MaxIterExceeded;
                break;
            }
            Err(e) => return Err(e),
        };
        evals += trials;
        iters += 1;
        let r_next = next_ws.psi(inst);

        // On a flat piece next to the root the residual stays put while the Armijo steps
        // still walk `sigma` towards the kink; only a standstill in both counts.
        let moved = (next_ws.sigma - ws.sigma).abs() > T::lit(STALL_MOVE) * (T::one() + ws.sigma);
        if upsilon.abs() <= flat_tol && r_next.abs() >= r.abs() && !moved {
            flat_run += 1;
        } else {
            flat_run = 0;
        }
        ws = next_ws;
        r = r_next;
        trace.sigma_seq.push(ws.sigma);
        trace.residual_seq.push(r.abs());
        trace.step_sizes.push(T::lit(cfg.delta_hat).powi(m as i32));
        if flat_run >= STALL_STEPS && r.abs() > eps {
            trace.stalled = true;
            status = SolveStatus::MaxIterExceeded;
            break;
        }
    }

    let report = SolveReport {
        x: ws.proj.x.clone(),
        sigma_star: ws.sigma,
        residual: r.abs(),
        psi_evals: evals,
        bracket_iters: 0,
        inner_iters: iters,
        status,
    };
    Ok((report, trace))
}
