//! Benchmark sweeps and the oracle-equivalence check, shared by the CLI and the test suite.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::instances::{gen_example1, gen_example2, Seed};
use crate::lrsa::lrsa_project;
use crate::oracle::{oracle_project, ORACLE_MAX_N};
use crate::problem::{Instance, SolveReport, SolverConfig};
use crate::scalar::Scalar;
use crate::ssn::ssn_project;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Algorithm {
    #[serde(rename = "LRSA")]
    Lrsa,
    #[serde(rename = "SSN")]
    Ssn,
}

impl Algorithm {
    pub const ALL: [Algorithm; 2] = [Algorithm::Lrsa, Algorithm::Ssn];

    pub fn solve<T: Scalar>(
        self,
        inst: &Instance<T>,
        cfg: &SolverConfig,
    ) -> Result<SolveReport<T>> {
        match self {
            Algorithm::Lrsa => lrsa_project(inst, cfg),
            Algorithm::Ssn => ssn_project(inst, cfg).map(|(r, _)| r),
        }
    }

    /// Iteration count as tabulated: bracketing plus secant steps, or Newton steps.
    pub fn iterations<T>(self, rep: &SolveReport<T>) -> usize {
        match self {
            Algorithm::Lrsa => rep.bracket_iters + rep.inner_iters,
            Algorithm::Ssn => rep.inner_iters,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Lrsa => "LRSA",
            Algorithm::Ssn => "SSN",
        })
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lrsa" => Ok(Algorithm::Lrsa),
            "ssn" => Ok(Algorithm::Ssn),
            _ => Err(Error::InvalidParameter(format!("unknown algorithm `{s}`"))),
        }
    }
}

/// Randomly generated benchmark families.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    /// Uniform data with `b = 0.45 max(a)`.
    Ex1,
    /// The degenerate family `a = (51, 50, ..., 50)`, `b = 50`.
    Ex2,
}

impl Family {
    pub fn generate<T: Scalar>(self, n: usize, seed: Seed) -> Result<Instance<T>> {
        match self {
            Family::Ex1 => gen_example1(n, seed),
            Family::Ex2 => gen_example2(n, seed),
        }
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ex1" => Ok(Family::Ex1),
            "ex2" => Ok(Family::Ex2),
            _ => Err(Error::InvalidParameter(format!("unknown family `{s}`"))),
        }
    }
}

/// One line of a benchmark table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRow {
    pub n: usize,
    pub algorithm: Algorithm,
    /// Mean wall time of the solve call alone.
    pub avgtime_s: f64,
    /// Largest iteration count over the repetitions.
    pub iter: usize,
    /// `|psi(sigma)|` of the last repetition; NaN if any repetition failed.
    pub residual: f64,
    #[serde(skip)]
    pub failures: usize,
    #[serde(skip)]
    pub max_psi_evals: usize,
}

/// Solves `reps` generated instances per `(n, algorithm)`. Rows come out in `(n, algorithm)`
/// order; repetition `r` at size `n` uses the instance seeded by `seed.derive(r)` for
/// every algorithm, so algorithms see identical data.
pub fn run_bench(
    family: Family,
    sizes: &[usize],
    reps: usize,
    algorithms: &[Algorithm],
    seed: Seed,
    cfg: &SolverConfig,
) -> Result<Vec<BenchRow>> {
    if reps == 0 {
        return Err(Error::InvalidParameter("reps must be positive".into()));
    }
    let mut rows = Vec::with_capacity(sizes.len() * algorithms.len());
    for &n in sizes {
        let instances: Vec<Instance<f64>> = (0..reps as u64)
            .map(|r| family.generate(n, seed.derive(r)))
            .collect::<Result<_>>()?;
        for &alg in algorithms {
            let mut total = 0.0;
            let mut row = BenchRow {
                n,
                algorithm: alg,
                avgtime_s: 0.0,
                iter: 0,
                residual: f64::NAN,
                failures: 0,
                max_psi_evals: 0,
            };
            for inst in &instances {
                let start = Instant::now();
                let outcome = alg.solve(inst, cfg);
                total += start.elapsed().as_secs_f64();
                match outcome {
                    Ok(rep) if rep.is_success() => {
                        row.iter = row.iter.max(alg.iterations(&rep));
                        row.max_psi_evals = row.max_psi_evals.max(rep.psi_evals);
                        row.residual = rep.residual;
                    }
                    Ok(rep) => {
                        row.iter = row.iter.max(alg.iterations(&rep));
                        row.failures += 1;
                    }
                    Err(_) => row.failures += 1,
                }
            }
            if row.failures > 0 {
                row.residual = f64::NAN;
            }
            row.avgtime_s = total / reps as f64;
            rows.push(row);
        }
    }
    Ok(rows)
}

/// Writes rows as CSV with columns `n, algorithm, avgtime_s, iter, residual`.
pub fn write_bench_csv<W: std::io::Write>(rows: &[BenchRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    }
    w.flush()
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    Ok(())
}

/// Outcome of an oracle-equivalence sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckReport {
    pub trials: usize,
    /// Largest `||x - x_oracle||_inf` per algorithm.
    pub max_deviation: Vec<(Algorithm, f64)>,
    /// Solves that errored or did not converge.
    pub failures: usize,
}

impl CheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.failures == 0 && self.max_deviation.iter().all(|&(_, d)| d <= tol)
    }
}

/// Compares both solvers with the oracle on `trials` random instances of size
/// `2..=n_max`, alternating between the two families.
pub fn run_check(
    n_max: usize,
    trials: usize,
    seed: Seed,
    cfg: &SolverConfig,
) -> Result<CheckReport> {
    if !(2..=ORACLE_MAX_N).contains(&n_max) {
        return Err(Error::InvalidParameter(format!(
            "n_max must lie in 2..={ORACLE_MAX_N}, got {n_max}"
        )));
    }
    let mut max_deviation: Vec<(Algorithm, f64)> =
        Algorithm::ALL.iter().map(|&a| (a, 0.0)).collect();
    let mut failures = 0;
    for t in 0..trials {
        let s = seed.derive(t as u64);
        let n = s.stream("n").random_range(2..=n_max);
        let family = if t % 2 == 0 { Family::Ex1 } else { Family::Ex2 };
        let inst: Instance<f64> = family.generate(n, s)?;
        let (x_ref, _) = oracle_project(&inst)?;
        for (alg, worst) in max_deviation.iter_mut() {
            match alg.solve(&inst, cfg) {
                Ok(rep) if rep.is_success() => {
                    let d = rep
                        .x
                        .iter()
                        .zip(&x_ref)
                        .fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
                    *worst = worst.max(d);
                }
                _ => failures += 1,
            }
        }
    }
    Ok(CheckReport {
        trials,
        max_deviation,
        failures,
    })
}
