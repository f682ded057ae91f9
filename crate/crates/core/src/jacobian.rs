//! The canonical generalized Jacobian element `N0` of the projection onto `C`.
//!
//! `N0` is the orthogonal projector onto the null space of the constraints active at
//! `x = proj_C(y)`: every coordinate in the zero set `K1` is pinned, the simplex row `e`
//! always binds, and `a` binds when `a'x = b`. Restricted to the support `K2` this is
//! `I` minus a projector of rank one or two, so it is stored as a handful of scalars.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::problem::Instance;
use crate::scalar::{compensated_sum, Scalar};

/// Largest `n` for which [`JacobianOperator::to_dense`] will allocate.
pub const DENSE_LIMIT: usize = 5000;

/// Default tolerance for classifying `a'x = b` and `x_i = 0`.
pub const DEFAULT_ACTIVE_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum JacobianCase {
    /// `a'x < b`: only the simplex row binds on the support.
    Inactive,
    /// `a'x = b` with `a_K2` not parallel to `e_K2`.
    ActiveEtaNonzero,
    /// `a'x = b` with `a_K2` parallel to `e_K2` (or zero); the two rows coincide.
    ActiveEtaZero,
}

/// `N0` in factored form. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct JacobianOperator<T> {
    pub case_tag: JacobianCase,
    /// Zero coordinates of `x`, ascending.
    pub k1: Vec<usize>,
    /// Support of `x`, ascending; never empty.
    pub k2: Vec<usize>,
    /// `||a_K2||`.
    pub a_k2_norm: T,
    /// `a_K2' e_K2`.
    pub a_dot_e: T,
    /// `||a_K2||^2 |K2| - (a_K2' e_K2)^2`.
    pub eta: T,
    /// `(||a_K2||^2 + |K2|)^2`.
    pub eta1: T,
    /// Mean of `a` over the support.
    pub a_mean: T,
    pub a_vec: Vec<T>,
}

/// Builds `N0` at `x`, which must be the projection of `inst.y()` onto `C`.
pub fn compute_jacobian<T: Scalar>(
    inst: &Instance<T>,
    x: &[T],
    active_tol: T,
) -> Result<JacobianOperator<T>> {
    let n = inst.n();
    if x.len() != n {
        return Err(Error::DimensionMismatch {
            what: "x",
            expected: n,
            found: x.len(),
        });
    }
    if active_tol.is_nan() || active_tol <= T::zero() {
        return Err(Error::InvalidParameter(format!(
            "active_tol must be positive, got {active_tol}"
        )));
    }
    let (k2, k1): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| x[i] > active_tol);
    if k2.is_empty() {
        return Err(Error::InvalidParameter(
            "x has empty support; it is not a point of the simplex".into(),
        ));
    }
    let a = inst.a();
    let k = T::from_usize_lossy(k2.len());
    let a_sq = compensated_sum(k2.iter().map(|&i| a[i] * a[i]));
    let a_dot_e = compensated_sum(k2.iter().map(|&i| a[i]));
    // k * sum (a_i - mean)^2 equals k ||a||^2 - (a'e)^2 without the cancellation.
    let mean = a_dot_e / k;
    let eta = k * compensated_sum(k2.iter().map(|&i| (a[i] - mean) * (a[i] - mean)));
    let eta1 = (a_sq + k) * (a_sq + k);

    let slack = compensated_sum(x.iter().zip(a).map(|(&xi, &ai)| xi * ai)) - inst.b();
    let active = slack.abs() <= active_tol * (T::one() + inst.b().abs());
    let case_tag = if !active {
        JacobianCase::Inactive
    } else if eta <= T::lit(T::DEGENERACY_TOL) * a_sq * k {
        JacobianCase::ActiveEtaZero
    } else {
        JacobianCase::ActiveEtaNonzero
    };
    Ok(JacobianOperator {
        case_tag,
        k1,
        k2,
        a_k2_norm: a_sq.sqrt(),
        a_dot_e,
        eta,
        eta1,
        a_mean: mean,
        a_vec: a.to_vec(),
    })
}

impl<T: Scalar> JacobianOperator<T> {
    pub fn n(&self) -> usize {
        self.a_vec.len()
    }

    /// `sgn(a'e) ||a_K2||`, the weight of `a` in the rank-one vector of the parallel case.
    fn parallel_weight(&self) -> T {
        if self.a_dot_e < T::zero() {
            -self.a_k2_norm
        } else {
            self.a_k2_norm
        }
    }

    /// The correction subtracted from `d_i` on the support, given `se = e_K2'd`,
    /// `sa = a_K2'd` and `sc = (a_K2 - mean e)'d`.
    fn correction(&self, ai: T, se: T, sa: T, sc: T) -> T {
        let k = T::from_usize_lossy(self.k2.len());
        match self.case_tag {
            JacobianCase::Inactive => se / k,
            // Projector onto span{e, a} in the orthogonal basis {e, a - mean e}; the
            // centred form avoids dividing a cancelling numerator by a small eta.
            JacobianCase::ActiveEtaNonzero => se / k + (ai - self.a_mean) * sc * k / self.eta,
            JacobianCase::ActiveEtaZero => {
                let wa = self.parallel_weight();
                let rk = k.sqrt();
                let vd = wa * sa + rk * se;
                (wa * ai + rk) * vd / self.eta1
            }
        }
    }

    /// `N0 d` in `O(n)`.
    pub fn apply(&self, d: &[T]) -> Result<Vec<T>> {
        if d.len() != self.n() {
            return Err(Error::DimensionMismatch {
                what: "d",
                expected: self.n(),
                found: d.len(),
            });
        }
        let se = compensated_sum(self.k2.iter().map(|&i| d[i]));
        let sa = compensated_sum(self.k2.iter().map(|&i| self.a_vec[i] * d[i]));
        let sc = compensated_sum(
            self.k2
                .iter()
                .map(|&i| (self.a_vec[i] - self.a_mean) * d[i]),
        );
        let mut out = vec![T::zero(); d.len()];
        for &i in &self.k2 {
            out[i] = d[i] - self.correction(self.a_vec[i], se, sa, sc);
        }
        Ok(out)
    }

    /// Entry `(i, j)` of `N0` for `i, j` in the support.
    fn support_entry(&self, i: usize, j: usize) -> T {
        let k = T::from_usize_lossy(self.k2.len());
        let (ai, aj) = (self.a_vec[i], self.a_vec[j]);
        let low_rank = match self.case_tag {
            JacobianCase::Inactive => T::one() / k,
            JacobianCase::ActiveEtaNonzero => {
                T::one() / k + (ai - self.a_mean) * (aj - self.a_mean) * k / self.eta
            }
            JacobianCase::ActiveEtaZero => {
                let wa = self.parallel_weight();
                let rk = k.sqrt();
                (wa * ai + rk) * (wa * aj + rk) / self.eta1
            }
        };
        if i == j {
            T::one() - low_rank
        } else {
            -low_rank
        }
    }

    /// Materializes `N0` row by row. Refused above [`DENSE_LIMIT`].
    pub fn to_dense(&self) -> Result<Vec<Vec<T>>> {
        let n = self.n();
        if n > DENSE_LIMIT {
            return Err(Error::TooLarge {
                n,
                limit: DENSE_LIMIT,
            });
        }
        let mut m = vec![vec![T::zero(); n]; n];
        for &i in &self.k2 {
            for &j in &self.k2 {
                m[i][j] = self.support_entry(i, j);
            }
        }
        Ok(m)
    }

    /// Dense matrix as text: one row per line, entries separated by single spaces.
    pub fn to_dense_text(&self) -> Result<String> {
        let m = self.to_dense()?;
        let mut s = String::new();
        for row in &m {
            for (j, v) in row.iter().enumerate() {
                if j > 0 {
                    s.push(' ');
                }
                // `+ 0` folds negative zero so exported zeros read as `0`.
                write!(s, "{}", *v + T::zero()).expect("writing to a String cannot fail");
            }
            s.push('\n');
        }
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_close(m: &[Vec<f64>], want: &[&[f64]], tol: f64) -> bool {
        m.len() == want.len()
            && m.iter()
                .zip(want)
                .all(|(r, w)| r.iter().zip(w.iter()).all(|(p, q)| (p - q).abs() <= tol))
    }

    #[test]
    fn inactive_symmetric() {
        let inst = Instance::new(vec![0.5; 3], vec![0.0, 0.0, 1.0], 10.0).unwrap();
        let j = compute_jacobian(&inst, &[1.0 / 3.0; 3], 1e-8).unwrap();
        assert_eq!(j.case_tag, JacobianCase::Inactive);
        let t = 1.0 / 3.0;
        let want: [&[f64]; 3] = [&[1.0 - t, -t, -t], &[-t, 1.0 - t, -t], &[-t, -t, 1.0 - t]];
        assert!(dense_close(&j.to_dense().unwrap(), &want, 1e-15));
        let v = j.apply(&[1.0, 0.0, 0.0]).unwrap();
        assert!(dense_close(
            &[v],
            &[&[2.0 / 3.0, -1.0 / 3.0, -1.0 / 3.0]],
            1e-15
        ));
    }

    #[test]
    fn active_full_rank_collapses() {
        let inst = Instance::new(vec![2.0, 0.0], vec![1.0, 0.0], 0.5).unwrap();
        let j = compute_jacobian(&inst, &[0.5, 0.5], 1e-8).unwrap();
        assert_eq!(j.case_tag, JacobianCase::ActiveEtaNonzero);
        assert_eq!(j.eta, 1.0);
        assert!(dense_close(
            &j.to_dense().unwrap(),
            &[&[0.0, 0.0], &[0.0, 0.0]],
            1e-15
        ));
    }

    #[test]
    fn active_parallel_rows() {
        let inst = Instance::new(vec![3.0, 0.0, 0.0], vec![51.0, 50.0, 50.0], 50.0).unwrap();
        let j = compute_jacobian(&inst, &[0.0, 0.5, 0.5], 1e-8).unwrap();
        assert_eq!(j.case_tag, JacobianCase::ActiveEtaZero);
        assert_eq!(j.k1, vec![0]);
        assert_eq!(j.k2, vec![1, 2]);
        assert_eq!(j.eta, 0.0);
        assert_eq!(j.eta1, 5002.0 * 5002.0);
        let want: [&[f64]; 3] = [&[0.0, 0.0, 0.0], &[0.0, 0.5, -0.5], &[0.0, -0.5, 0.5]];
        assert!(dense_close(&j.to_dense().unwrap(), &want, 1e-12));
        let v = j.apply(&[0.0, 1.0, 0.0]).unwrap();
        assert!(dense_close(&[v], &[&[0.0, 0.5, -0.5]], 1e-12));
    }

    #[test]
    fn zero_normal_on_support_matches_inactive_form() {
        let inst = Instance::new(vec![0.0; 3], vec![0.0, 0.0, 5.0], 0.0).unwrap();
        let j = compute_jacobian(&inst, &[0.5, 0.5, 0.0], 1e-8).unwrap();
        assert_eq!(j.case_tag, JacobianCase::ActiveEtaZero);
        let want: [&[f64]; 3] = [&[0.5, -0.5, 0.0], &[-0.5, 0.5, 0.0], &[0.0, 0.0, 0.0]];
        assert!(dense_close(&j.to_dense().unwrap(), &want, 1e-15));
    }

    #[test]
    fn single_support_and_n1() {
        let inst = Instance::new(vec![2.0, 0.0], vec![0.0, 0.0], 1.0).unwrap();
        let j = compute_jacobian(&inst, &[1.0, 0.0], 1e-8).unwrap();
        assert!(dense_close(
            &j.to_dense().unwrap(),
            &[&[0.0, 0.0], &[0.0, 0.0]],
            0.0
        ));
        let one = Instance::new(vec![4.0], vec![1.0], 1.0).unwrap();
        let j = compute_jacobian(&one, &[1.0], 1e-8).unwrap();
        assert_eq!(j.to_dense().unwrap(), vec![vec![0.0]]);
    }

    #[test]
    fn kernel_contains_support_ones() {
        let inst =
            Instance::new(vec![0.4f64, 0.1, 0.5, -1.0], vec![1.0, 2.0, 3.0, 4.0], 2.0).unwrap();
        let j = compute_jacobian(&inst, &[0.4, 0.1, 0.5, 0.0], 1e-8).unwrap();
        let v = j.apply(&[1.0, 1.0, 1.0, 0.0]).unwrap();
        assert!(v.iter().all(|c| c.abs() < 1e-15));
    }

    #[test]
    fn errors() {
        let inst = Instance::new(vec![0.5; 2], vec![1.0, 0.0], 1.0).unwrap();
        assert!(matches!(
            compute_jacobian(&inst, &[1.0], 1e-8),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(compute_jacobian(&inst, &[0.0, 0.0], 1e-8).is_err());
        let j = compute_jacobian(&inst, &[0.5, 0.5], 1e-8).unwrap();
        assert!(matches!(
            j.apply(&[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        let big =
            Instance::new(vec![0.0; DENSE_LIMIT + 1], vec![0.0; DENSE_LIMIT + 1], 1.0).unwrap();
        let x = vec![1.0 / (DENSE_LIMIT + 1) as f64; DENSE_LIMIT + 1];
        let j = compute_jacobian(&big, &x, 1e-12).unwrap();
        assert!(matches!(j.to_dense(), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn dense_text_layout() {
        let inst = Instance::new(vec![2.0, 0.0], vec![1.0, 0.0], 0.5).unwrap();
        let j = compute_jacobian(&inst, &[0.5, 0.5], 1e-8).unwrap();
        assert_eq!(j.to_dense_text().unwrap(), "0 0\n0 0\n");
    }
}
