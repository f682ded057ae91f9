//! Euclidean projection onto the unit simplex `{x >= 0, sum x = 1}` and its Moreau envelope.
//!
//! [`project_simplex`] is the production kernel: Condat's linear-time scan locates the
//! threshold, after which the threshold is recomputed from its support with compensated
//! summation. [`project_simplex_reference`] sorts and applies the closed-form support rule;
//! it exists to cross-check the fast kernel.

use crate::error::{Error, Result};
use crate::scalar::{compensated_sum, CompensatedSum, Scalar};

/// A projection onto the simplex with its threshold `tau`: `x_i = max(z_i - tau, 0)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SimplexProjection<T> {
    pub x: Vec<T>,
    pub tau: T,
    /// Number of strictly positive coordinates.
    pub support_size: usize,
}

impl<T: Scalar> SimplexProjection<T> {
    fn from_threshold(z: &[T], tau: T) -> Self {
        let mut support_size = 0;
        let x = z
            .iter()
            .map(|&v| {
                if v > tau {
                    support_size += 1;
                    v - tau
                } else {
                    T::zero()
                }
            })
            .collect();
        Self {
            x,
            tau,
            support_size,
        }
    }
}

fn validate<T: Scalar>(z: &[T]) -> Result<()> {
    if z.is_empty() {
        return Err(Error::Empty("z"));
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("z"));
    }
    Ok(())
}

/// Projects `z` onto the simplex in expected linear time.
pub fn project_simplex<T: Scalar>(z: &[T]) -> Result<SimplexProjection<T>> {
    validate(z)?;
    let tau = refine_threshold(z, condat_threshold(z));
    Ok(SimplexProjection::from_threshold(z, tau))
}

/// Threshold only, without allocating the projected vector.
pub(crate) fn simplex_threshold<T: Scalar>(z: &[T]) -> T {
    refine_threshold(z, condat_threshold(z))
}

/// Condat's scan: a running estimate `tau` over an active list, a waiting list for values
/// discarded when `tau` restarts, then repeated cleanup until the active list is stable.
fn condat_threshold<T: Scalar>(z: &[T]) -> T {
    let one = T::one();
    let mut active: Vec<T> = Vec::with_capacity(z.len().min(1024));
    let mut waiting: Vec<T> = Vec::new();
    active.push(z[0]);
    let mut tau = z[0] - one;
    for &v in &z[1..] {
        if v > tau {
            tau = tau + (v - tau) / T::from_usize_lossy(active.len() + 1);
            if tau > v - one {
                active.push(v);
            } else {
                waiting.append(&mut active);
                active.push(v);
                tau = v - one;
            }
        }
    }
    for v in waiting {
        if v > tau {
            active.push(v);
            tau = tau + (v - tau) / T::from_usize_lossy(active.len());
        }
    }
    loop {
        let before = active.len();
        let mut i = 0;
        while i < active.len() {
            let v = active[i];
            if v <= tau {
                active.swap_remove(i);
                if !active.is_empty() {
                    tau = tau + (tau - v) / T::from_usize_lossy(active.len());
                }
            } else {
                i += 1;
            }
        }
        if active.len() == before || active.is_empty() {
            break;
        }
    }
    tau
}

/// Recomputes `tau = (sum_{z_i > tau} z_i - 1) / |{z_i > tau}|` with compensated
/// summation until the support stops changing. Starting at or below the exact threshold
/// the support only shrinks, so this terminates after a handful of passes.
fn refine_threshold<T: Scalar>(z: &[T], mut tau: T) -> T {
    let one = T::one();
    let mut last_count = usize::MAX;
    for _ in 0..64 {
        let mut acc = CompensatedSum::new();
        let mut count = 0usize;
        for &v in z {
            if v > tau {
                acc.add(v);
                count += 1;
            }
        }
        if count == 0 {
            // tau overshot every coordinate; the largest entry alone bounds it from below.
            let zmax = z.iter().copied().fold(T::neg_infinity(), T::max);
            tau = zmax - one;
            continue;
        }
        let next = (acc.value() - one) / T::from_usize_lossy(count);
        if count == last_count {
            return next;
        }
        last_count = count;
        tau = next;
    }
    tau
}

/// Sort-based projection: `K = max{ j : u_j + (1 - sum_{i<=j} u_i)/j > 0 }` over the
/// descending sort `u` of `z` (ties broken by index), `tau = (sum_{i<=K} u_i - 1)/K`.
pub fn project_simplex_reference<T: Scalar>(z: &[T]) -> Result<SimplexProjection<T>> {
    validate(z)?;
    let mut order: Vec<usize> = (0..z.len()).collect();
    order.sort_by(|&i, &j| z[j].partial_cmp(&z[i]).expect("finite").then(i.cmp(&j)));
    let mut acc = CompensatedSum::new();
    let mut kbar = 1;
    for (j, &idx) in order.iter().enumerate() {
        acc.add(z[idx]);
        let jj = T::from_usize_lossy(j + 1);
        if z[idx] + (T::one() - acc.value()) / jj > T::zero() {
            kbar = j + 1;
        }
    }
    let top = compensated_sum(order[..kbar].iter().map(|&i| z[i]));
    let tau = (top - T::one()) / T::from_usize_lossy(kbar);
    Ok(SimplexProjection::from_threshold(z, tau))
}

/// Moreau envelope of the simplex indicator: `0.5 * ||proj(z) - z||^2`.
pub fn moreau_envelope<T: Scalar>(z: &[T]) -> Result<T> {
    let p = project_simplex(z)?;
    Ok(half_sq_dist(&p.x, z))
}

pub(crate) fn half_sq_dist<T: Scalar>(u: &[T], v: &[T]) -> T {
    let d = compensated_sum(u.iter().zip(v).map(|(&p, &q)| (p - q) * (p - q)));
    d * T::lit(0.5)
}
