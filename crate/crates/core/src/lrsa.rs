//! Dual root bracketing followed by the Dai–Fletcher modified secant method.

use crate::dual::{psi_unchecked, shifted_point};
use crate::error::{Error, Result};
use crate::problem::{
    feasibility_check, Feasibility, Instance, SolveReport, SolveStatus, SolverConfig,
};
use crate::scalar::Scalar;
use crate::simplex::project_simplex;

/// An interval `[sigma_l, sigma_u]` with `psi(sigma_l) = r_l > 0 > r_u = psi(sigma_u)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bracket<T> {
    pub sigma_l: T,
    pub sigma_u: T,
    pub r_l: T,
    pub r_u: T,
}

/// Result of the bracketing phase.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BracketOutcome<T> {
    Bracket(Bracket<T>),
    /// A probe landed on `psi(sigma) = 0` exactly.
    ExactRoot(T),
}

/// Iterate of the secant phase, recorded after each update.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SecantState<T> {
    pub sigma: T,
    pub r: T,
    pub s: T,
    pub sigma_l: T,
    pub sigma_u: T,
    /// Whether this step took one of the two modified (non-secant) branches.
    pub safeguard_branch: bool,
    /// Whether the 0.6/0.4 interpolation bound was binding, i.e. the trial point was
    /// moved to `0.6 sigma_l + 0.4 sigma_u` or `0.6 sigma_u + 0.4 sigma_l`. The next
    /// update then shrinks the bracket to at most 0.6 of its width.
    pub clamped: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SecantOutcome<T> {
    pub sigma_hat: T,
    pub residual: T,
    /// `psi` evaluations performed by the secant phase (the initial secant point included).
    pub iters: usize,
    pub converged: bool,
    pub trace: Vec<SecantState<T>>,
}

/// Probes `sigma = rho^j * delta_sigma`, `j = 0, 1, ...` until `psi` changes sign.
///
/// Requires `psi(0) > 0`. Returns the outcome and the number of probes.
pub fn bracket_root<T: Scalar>(
    inst: &Instance<T>,
    cfg: &SolverConfig,
) -> Result<(BracketOutcome<T>, usize)> {
    cfg.validate()?;
    let r0 = psi_unchecked(inst, T::zero());
    if r0 <= T::zero() {
        return Err(Error::InvalidParameter(
            "bracketing requires psi(0) > 0".to_string(),
        ));
    }
    bracket_from_origin(inst, cfg, r0)
}

fn bracket_from_origin<T: Scalar>(
    inst: &Instance<T>,
    cfg: &SolverConfig,
    r0: T,
) -> Result<(BracketOutcome<T>, usize)> {
    let rho = T::lit(cfg.rho);
    let step = T::lit(cfg.delta_sigma);
    let (mut sigma_l, mut r_l) = (T::zero(), r0);
    let mut sigma = step;
    for j in 0..cfg.max_iter {
        if j > 0 {
            sigma = sigma * rho;
        }
        if !sigma.is_finite() {
            break;
        }
        let r = psi_unchecked(inst, sigma);
        if r == T::zero() {
            return Ok((BracketOutcome::ExactRoot(sigma), j + 1));
        }
        if r < T::zero() {
            return Ok((
                BracketOutcome::Bracket(Bracket {
                    sigma_l,
                    sigma_u: sigma,
                    r_l,
                    r_u: r,
                }),
                j + 1,
            ));
        }
        sigma_l = sigma;
        r_l = r;
    }
    Err(Error::MaxIterExceeded(cfg.max_iter))
}

/// Modified secant iteration on a valid bracket, following the four-branch update with
/// the interpolation factor `s` carried from one step to the next.
pub fn secant_solve<T: Scalar>(
    inst: &Instance<T>,
    br: Bracket<T>,
    epsilon: T,
    max_iter: usize,
) -> Result<SecantOutcome<T>> {
    if !(br.sigma_l >= T::zero()
        && br.sigma_u > br.sigma_l
        && br.r_l > T::zero()
        && br.r_u < T::zero())
    {
        return Err(Error::InvalidParameter(format!(
            "not a bracket: [{}, {}] with psi values {}, {}",
            br.sigma_l, br.sigma_u, br.r_l, br.r_u
        )));
    }
    let (one, two) = (T::one(), T::lit(2.0));
    let (tenth, six, four) = (T::lit(0.1), T::lit(0.6), T::lit(0.4));
    let Bracket {
        mut sigma_l,
        mut sigma_u,
        mut r_l,
        mut r_u,
    } = br;

    let mut s = one - r_l / r_u;
    let mut sigma = sigma_u - (sigma_u - sigma_l) / s;
    let mut r = psi_unchecked(inst, sigma);
    let mut iters = 1;
    let mut trace = vec![SecantState {
        sigma,
        r,
        s,
        sigma_l,
        sigma_u,
        safeguard_branch: false,
        clamped: false,
    }];

    while r.abs() > epsilon {
        if iters >= max_iter {
            return Ok(SecantOutcome {
                sigma_hat: sigma,
                residual: r.abs(),
                iters,
                converged: false,
                trace,
            });
        }
        let (safeguard_branch, clamped);
        if r < T::zero() {
            if s <= two {
                sigma_u = sigma;
                r_u = r;
                s = one - r_l / r_u;
                sigma = sigma_u - (sigma_u - sigma_l) / s;
                (safeguard_branch, clamped) = (false, false);
            } else {
                s = (r_u / r - one).max(tenth);
                let step = (sigma_u - sigma) / s;
                sigma_u = sigma;
                r_u = r;
                let bound = six * sigma_l + four * sigma_u;
                clamped = bound > sigma_u - step;
                sigma = (sigma_u - step).max(bound);
                s = (sigma_u - sigma_l) / (sigma_u - sigma);
                safeguard_branch = true;
            }
        } else if s >= two {
            sigma_l = sigma;
            r_l = r;
            s = one - r_l / r_u;
            sigma = sigma_u - (sigma_u - sigma_l) / s;
            (safeguard_branch, clamped) = (false, false);
        } else {
            s = (r_l / r - one).max(tenth);
            let step = (sigma - sigma_l) / s;
            sigma_l = sigma;
            r_l = r;
            let bound = six * sigma_u + four * sigma_l;
            clamped = bound < sigma_l + step;
            sigma = (sigma_l + step).min(bound);
            s = (sigma_u - sigma_l) / (sigma_u - sigma);
            safeguard_branch = true;
        }
        r = psi_unchecked(inst, sigma);
        iters += 1;
        trace.push(SecantState {
            sigma,
            r,
            s,
            sigma_l,
            sigma_u,
            safeguard_branch,
            clamped,
        });
    }
    Ok(SecantOutcome {
        sigma_hat: sigma,
        residual: r.abs(),
        iters,
        converged: true,
        trace,
    })
}

/// Projection onto `C` by bracketing plus modified secant.
pub fn lrsa_project<T: Scalar>(inst: &Instance<T>, cfg: &SolverConfig) -> Result<SolveReport<T>> {
    cfg.validate()?;
    match feasibility_check(inst) {
        Feasibility::Infeasible => return Ok(SolveReport::infeasible(inst)),
        Feasibility::ReducesToSimplex => return inactive_report(inst, 0),
        Feasibility::Feasible => {}
    }
    let r0 = psi_unchecked(inst, T::zero());
    if r0 <= T::zero() {
        return inactive_report(inst, 1);
    }
    let (outcome, probes) = match bracket_from_origin(inst, cfg, r0) {
        Ok(v) => v,
        Err(Error::MaxIterExceeded(_)) => {
            return Ok(SolveReport {
                x: project_simplex(inst.y())?.x,
                sigma_star: T::zero(),
                residual: r0.abs(),
                psi_evals: 1 + cfg.max_iter,
                bracket_iters: cfg.max_iter,
                inner_iters: 0,
                status: SolveStatus::MaxIterExceeded,
            })
        }
        Err(e) => return Err(e),
    };
    let br = match outcome {
        BracketOutcome::ExactRoot(sigma) => {
            return Ok(SolveReport {
                x: project_simplex(&shifted_point(inst, sigma))?.x,
                sigma_star: sigma,
                residual: T::zero(),
                psi_evals: 1 + probes,
                bracket_iters: probes,
                inner_iters: 0,
                status: SolveStatus::Converged,
            });
        }
        BracketOutcome::Bracket(br) => br,
    };
    let budget = cfg.max_iter.saturating_sub(probes).max(1);
    let sec = secant_solve(inst, br, T::lit(cfg.epsilon), budget)?;
    Ok(SolveReport {
        x: project_simplex(&shifted_point(inst, sec.sigma_hat))?.x,
        sigma_star: sec.sigma_hat,
        residual: sec.residual,
        psi_evals: 1 + probes + sec.iters,
        bracket_iters: probes,
        inner_iters: sec.iters,
        status: if sec.converged {
            SolveStatus::Converged
        } else {
            SolveStatus::MaxIterExceeded
        },
    })
}

pub(crate) fn inactive_report<T: Scalar>(
    inst: &Instance<T>,
    psi_evals: usize,
) -> Result<SolveReport<T>> {
    Ok(SolveReport {
        x: project_simplex(inst.y())?.x,
        sigma_star: T::zero(),
        residual: T::zero(),
        psi_evals,
        bracket_iters: 0,
        inner_iters: 0,
        status: SolveStatus::ConstraintInactive,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(b: f64) -> Instance<f64> {
        Instance::new(vec![2.0, 0.0], vec![1.0, 0.0], b).unwrap()
    }

    fn degenerate() -> Instance<f64> {
        Instance::new(vec![3.0, 0.0, 0.0], vec![51.0, 50.0, 50.0], 50.0).unwrap()
    }

    #[test]
    fn bracketing_hits_exact_root() {
        let (out, probes) = bracket_root(&toy(0.5), &SolverConfig::default()).unwrap();
        assert_eq!(out, BracketOutcome::ExactRoot(2.0));
        assert_eq!(probes, 2);
    }

    #[test]
    fn bracketing_straddles_root() {
        let (out, _) = bracket_root(&toy(0.75), &SolverConfig::default()).unwrap();
        assert_eq!(
            out,
            BracketOutcome::Bracket(Bracket {
                sigma_l: 1.0,
                sigma_u: 2.0,
                r_l: 0.25,
                r_u: -0.25
            })
        );
    }

    #[test]
    fn constant_psi_never_brackets() {
        let inst = Instance::new(vec![0.2, 0.1, -0.4], vec![1.0; 3], 0.5).unwrap();
        let cfg = SolverConfig::default().with_max_iter(40);
        assert!(matches!(
            bracket_root(&inst, &cfg),
            Err(Error::MaxIterExceeded(40))
        ));
    }

    #[test]
    fn secant_is_exact_on_affine_piece() {
        let br = Bracket {
            sigma_l: 1.0,
            sigma_u: 2.0,
            r_l: 0.25,
            r_u: -0.25,
        };
        let out = secant_solve(&toy(0.75), br, 1e-7, 500).unwrap();
        assert_eq!(out.sigma_hat, 1.5);
        assert_eq!(out.iters, 1);
        assert_eq!(out.residual, 0.0);
    }

    #[test]
    fn secant_across_breakpoint() {
        let br = Bracket {
            sigma_l: 2.0,
            sigma_u: 4.0,
            r_l: 1.0,
            r_u: -1.0 / 3.0,
        };
        let out = secant_solve(&degenerate(), br, 1e-7, 500).unwrap();
        assert!(out.converged);
        assert!(out.iters <= 5);
        assert!((out.sigma_hat - 3.5).abs() < 1e-6);
        assert!(out.residual <= 1e-7);
    }

    #[test]
    fn rejects_invalid_bracket() {
        let br = Bracket {
            sigma_l: 2.0,
            sigma_u: 1.0,
            r_l: 0.25,
            r_u: -0.25,
        };
        assert!(secant_solve(&toy(0.75), br, 1e-7, 500).is_err());
    }

    #[test]
    fn project_examples() {
        let cfg = SolverConfig::default();
        let r = lrsa_project(&toy(2.0), &cfg).unwrap();
        assert_eq!(r.status, SolveStatus::ConstraintInactive);
        assert_eq!(r.x, vec![1.0, 0.0]);
        assert_eq!(r.sigma_star, 0.0);
        assert_eq!(r.residual, 0.0);

        let r = lrsa_project(&toy(0.5), &cfg).unwrap();
        assert_eq!(r.status, SolveStatus::Converged);
        assert_eq!(r.sigma_star, 2.0);
        assert_eq!(r.x, vec![0.5, 0.5]);

        // psi vanishes on all of [3.5, inf); the probe at sigma = 4 lands on it exactly.
        let r = lrsa_project(&degenerate(), &cfg).unwrap();
        assert_eq!(r.status, SolveStatus::Converged);
        assert_eq!(r.sigma_star, 4.0);
        assert!(
            (r.x[0]).abs() < 1e-7 && (r.x[1] - 0.5).abs() < 1e-7 && (r.x[2] - 0.5).abs() < 1e-7
        );
    }

    #[test]
    fn infeasible_and_trivial_routing() {
        let cfg = SolverConfig::default();
        let bad = Instance::new(vec![0.0, 0.0], vec![2.0, 3.0], 1.0).unwrap();
        assert_eq!(
            lrsa_project(&bad, &cfg).unwrap().status,
            SolveStatus::Infeasible
        );
        let zero = Instance::new(vec![0.5f64, 0.2], vec![0.0, 0.0], 0.0).unwrap();
        let r = lrsa_project(&zero, &cfg).unwrap();
        assert_eq!(r.status, SolveStatus::ConstraintInactive);
        assert!((r.x[0] - 0.65).abs() < 1e-15);
    }
}
