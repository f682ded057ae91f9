//! The dual function `h`, its derivative `psi`, and the one-sided derivatives of `psi`.
//!
//! For a multiplier `sigma >= 0` on `a'x <= b`, the Lagrangian minimizer over the simplex is
//! `x(sigma) = proj(y - sigma a)`. Then `psi(sigma) = a'x(sigma) - b` is continuous,
//! piecewise affine and nonincreasing; the projection onto `C` is `x(sigma*)` at its root
//! (or at `sigma = 0` when `psi(0) <= 0`).

use crate::error::{Error, Result};
use crate::problem::Instance;
use crate::scalar::{compensated_sum, dot, inf_norm, CompensatedSum, Scalar};
use crate::simplex::{project_simplex, simplex_threshold, SimplexProjection};

/// `y - sigma a`.
pub fn shifted_point<T: Scalar>(inst: &Instance<T>, sigma: T) -> Vec<T> {
    inst.y()
        .iter()
        .zip(inst.a())
        .map(|(&y, &a)| y - sigma * a)
        .collect()
}

fn check_sigma<T: Scalar>(sigma: T) -> Result<()> {
    if sigma.is_finite() && sigma >= T::zero() {
        Ok(())
    } else {
        Err(Error::NegativeSigma(sigma.as_f64()))
    }
}

/// `psi(sigma) = a' proj(y - sigma a) - b`. One simplex projection.
pub fn psi<T: Scalar>(inst: &Instance<T>, sigma: T) -> Result<T> {
    check_sigma(sigma)?;
    Ok(psi_unchecked(inst, sigma))
}

pub(crate) fn psi_unchecked<T: Scalar>(inst: &Instance<T>, sigma: T) -> T {
    let z = shifted_point(inst, sigma);
    let tau = simplex_threshold(&z);
    psi_from_threshold(inst, &z, tau)
}

/// `psi` from the shifted point `z` and its simplex threshold.
///
/// On the support `S = {z_i > tau}` the projection sums to one, so
/// `a'x - b = sum_S (a_i - zeta) z_i + zeta - b` with `zeta` the mean of `a` over `S`.
/// This form never touches `tau`, whose rounding error would otherwise be multiplied by
/// `sum_S a_i`.
pub(crate) fn psi_from_threshold<T: Scalar>(inst: &Instance<T>, z: &[T], tau: T) -> T {
    let a = inst.a();
    let mut count = 0usize;
    let mut sum_a = CompensatedSum::new();
    for (&zi, &ai) in z.iter().zip(a) {
        if zi > tau {
            count += 1;
            sum_a.add(ai);
        }
    }
    debug_assert!(
        count > 0,
        "a simplex threshold always leaves a nonempty support"
    );
    let zeta = sum_a.value() / T::from_usize_lossy(count.max(1));
    let mut acc = CompensatedSum::new();
    for (&zi, &ai) in z.iter().zip(a) {
        if zi > tau {
            acc.add((ai - zeta) * zi);
        }
    }
    acc.add(zeta);
    acc.add(-inst.b());
    acc.value()
}

/// Dual objective `h(sigma) = M(y - sigma a) - 0.5||y - sigma a||^2 + 0.5||y||^2 - sigma b`,
/// evaluated in the equivalent form `0.5||x - y||^2 + sigma (a'x - b)` with
/// `x = proj(y - sigma a)`, which avoids cancelling two `O(||y||^2)` terms.
pub fn h<T: Scalar>(inst: &Instance<T>, sigma: T) -> Result<T> {
    check_sigma(sigma)?;
    let x = project_simplex(&shifted_point(inst, sigma))?.x;
    Ok(h_at(inst, sigma, &x))
}

fn h_at<T: Scalar>(inst: &Instance<T>, sigma: T, x: &[T]) -> T {
    let half_dist = crate::simplex::half_sq_dist(x, inst.y());
    half_dist + sigma * (dot(inst.a(), x) - inst.b())
}

/// `h(to) - h(from)`, computed from the two minimizers so that the difference of nearby
/// points does not drown in the magnitude of `h` itself.
pub(crate) fn h_increment<T: Scalar>(
    inst: &Instance<T>,
    from: T,
    x_from: &[T],
    to: T,
    x_to: &[T],
) -> T {
    let two = T::lit(2.0);
    let y = inst.y();
    // 0.5(||x'-y||^2 - ||x-y||^2) = 0.5 (x'-x)'(x'+x-2y)
    let quad = compensated_sum(
        x_to.iter()
            .zip(x_from)
            .zip(y)
            .map(|((&p, &q), &yi)| (p - q) * (p + q - two * yi)),
    ) * T::lit(0.5);
    let lin_to = dot(inst.a(), x_to) - inst.b();
    let lin_from = dot(inst.a(), x_from) - inst.b();
    quad + to * lin_to - from * lin_from
}

/// State of the dual at one multiplier: the shifted point, its simplex projection, and the
/// classification of coordinates by the sign of their closed-form value `z_i - tau`.
#[derive(Clone, Debug)]
pub struct DualWorkspace<T> {
    pub sigma: T,
    pub shifted: Vec<T>,
    pub proj: SimplexProjection<T>,
    /// Coordinates with `z_i - tau` above the breakpoint band.
    pub gamma1: Vec<usize>,
    /// Coordinates with `|z_i - tau|` inside the band (ties at the threshold).
    pub gamma2: Vec<usize>,
    /// `|gamma1|`.
    pub kbar: usize,
}

impl<T: Scalar> DualWorkspace<T> {
    /// Builds the workspace. A coordinate belongs to `gamma2` when
    /// `|z_i - tau| <= BREAKPOINT_TOL * (1 + ||z||_inf)`.
    pub fn new(inst: &Instance<T>, sigma: T) -> Result<Self> {
        check_sigma(sigma)?;
        let shifted = shifted_point(inst, sigma);
        let proj = project_simplex(&shifted)?;
        Ok(Self::from_projection(sigma, shifted, proj))
    }

    /// Workspace from an already computed projection of `shifted = y - sigma a`.
    pub(crate) fn from_projection(sigma: T, shifted: Vec<T>, proj: SimplexProjection<T>) -> Self {
        let band = T::lit(T::BREAKPOINT_TOL) * (T::one() + inf_norm(&shifted));
        let mut gamma1 = Vec::with_capacity(proj.support_size);
        let mut gamma2 = Vec::new();
        for (i, &z) in shifted.iter().enumerate() {
            let v = z - proj.tau;
            if v.abs() <= band {
                gamma2.push(i);
            } else if v > T::zero() {
                gamma1.push(i);
            }
        }
        if gamma1.is_empty() {
            // Every support coordinate sits inside the band (e.g. all entries tied); keep
            // the positive ones in gamma1 so the support is never empty.
            let (pos, rest): (Vec<usize>, Vec<usize>) =
                gamma2.iter().partition(|&&i| proj.x[i] > T::zero());
            gamma1 = pos;
            gamma2 = rest;
        }
        let kbar = gamma1.len();
        Self {
            sigma,
            shifted,
            proj,
            gamma1,
            gamma2,
            kbar,
        }
    }

    /// `psi` at this workspace's multiplier.
    pub fn psi(&self, inst: &Instance<T>) -> T {
        psi_from_threshold(inst, &self.shifted, self.proj.tau)
    }

    /// `gamma2` ordered by `-a` descending (ties by index).
    fn gamma2_by_neg_a(&self, a: &[T]) -> Vec<usize> {
        let mut g = self.gamma2.clone();
        g.sort_by(|&i, &j| a[i].partial_cmp(&a[j]).expect("finite").then(i.cmp(&j)));
        g
    }
}

/// `-sum_{i in S} (a_i - mean_S a)^2`: the slope of `psi` on a piece whose support is `S`.
fn support_slope<T: Scalar>(a: &[T], support: impl Iterator<Item = usize> + Clone) -> (T, T) {
    let count = support.clone().count();
    let zeta = compensated_sum(support.clone().map(|i| a[i])) / T::from_usize_lossy(count);
    let slope = -compensated_sum(support.map(|i| (a[i] - zeta) * (a[i] - zeta)));
    (slope, zeta)
}

/// Right derivative of `psi`.
///
/// Without ties (`gamma2` empty) the support is locally constant and the slope is
/// `sum_{gamma1} a_i (mean_{gamma1}(a) - a_i)`. With ties, the tied coordinates are scanned
/// in `-a` descending order and the largest prefix `lambda+` with
/// `-a_k + (sum_{gamma1} a + sum_{prefix} a)/(kbar + i) > 0` joins the support for
/// `sigma' > sigma`; `zeta+` is the mean of `a` over the enlarged support.
///
/// Evaluated as `-sum_S (a_i - zeta)^2`, which equals the mixed `max(.,0)` expression term
/// by term and is never positive.
pub fn psi_right_derivative<T: Scalar>(inst: &Instance<T>, ws: &DualWorkspace<T>) -> T {
    let a = inst.a();
    if ws.gamma2.is_empty() {
        return support_slope(a, ws.gamma1.iter().copied()).0;
    }
    let kbar = ws.kbar;
    let sum_g1 = compensated_sum(ws.gamma1.iter().map(|&i| a[i]));
    let order = ws.gamma2_by_neg_a(a);
    let mut acc = CompensatedSum::new();
    acc.add(sum_g1);
    let mut lambda_plus = 0;
    for (pos, &k) in order.iter().enumerate() {
        acc.add(a[k]);
        let i = pos + 1;
        if -a[k] + acc.value() / T::from_usize_lossy(kbar + i) > T::zero() {
            lambda_plus = i;
        }
    }
    let support = ws.gamma1.iter().chain(order[..lambda_plus].iter()).copied();
    support_slope(a, support).0
}

/// Left derivative of `psi`; requires `sigma > 0`.
///
/// Tied coordinates are scanned from the largest `a` downward; the smallest index
/// `lambda-` (counting from the end of the `-a`-descending order) satisfying
/// `-a_k + (sum_{gamma1} a + sum_{suffix} a)/(kbar + |gamma2| + 1 - i) < 0` marks the suffix
/// of tied coordinates that belong to the support for `sigma' < sigma`.
pub fn psi_left_derivative<T: Scalar>(inst: &Instance<T>, ws: &DualWorkspace<T>) -> Result<T> {
    if ws.sigma <= T::zero() {
        return Err(Error::LeftDerivativeAtZero);
    }
    let a = inst.a();
    if ws.gamma2.is_empty() {
        return Ok(support_slope(a, ws.gamma1.iter().copied()).0);
    }
    let kbar = ws.kbar;
    let m = ws.gamma2.len();
    let sum_g1 = compensated_sum(ws.gamma1.iter().map(|&i| a[i]));
    let order = ws.gamma2_by_neg_a(a);
    let mut acc = CompensatedSum::new();
    acc.add(sum_g1);
    // 1-based index into `order`; m + 1 means "no tied coordinate joins".
    let mut lambda_minus = m + 1;
    for i in (1..=m).rev() {
        let k = order[i - 1];
        acc.add(a[k]);
        if -a[k] + acc.value() / T::from_usize_lossy(kbar + m + 1 - i) < T::zero() {
            lambda_minus = i;
        }
    }
    let support = ws
        .gamma1
        .iter()
        .chain(order[lambda_minus - 1..].iter())
        .copied();
    Ok(support_slope(a, support).0)
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
    fn psi_examples() {
        assert!((psi(&toy(0.5), 0.0).unwrap() - 0.5).abs() < 1e-15);
        assert!(psi(&toy(0.5), 2.0).unwrap().abs() < 1e-15);
        let ones = Instance::new(vec![0.3f64, -1.0, 2.0], vec![1.0; 3], 0.25).unwrap();
        for s in [0.0, 0.7, 13.0] {
            assert!((psi(&ones, s).unwrap() - 0.75).abs() < 1e-15);
        }
        assert!(matches!(psi(&toy(0.5), -1.0), Err(Error::NegativeSigma(_))));
    }

    #[test]
    fn h_examples() {
        assert!((h(&toy(0.5), 0.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((h(&toy(0.5), 2.0).unwrap() - 1.25).abs() < 1e-15);
        let ones = Instance::new(vec![0.3f64, -1.0, 2.0], vec![1.0; 3], 1.0).unwrap();
        let h0 = h(&ones, 0.0).unwrap();
        for s in [0.5, 3.0, 40.0] {
            assert!((h(&ones, s).unwrap() - h0).abs() < 1e-12);
        }
    }

    #[test]
    fn h_increment_matches_difference() {
        let inst = toy(0.75);
        let x1 = project_simplex(&shifted_point(&inst, 0.4)).unwrap().x;
        let x2 = project_simplex(&shifted_point(&inst, 1.3)).unwrap().x;
        let direct = h(&inst, 1.3).unwrap() - h(&inst, 0.4).unwrap();
        assert!((h_increment(&inst, 0.4, &x1, 1.3, &x2) - direct).abs() < 1e-14);
    }

    #[test]
    fn derivative_without_ties() {
        let inst = toy(0.5);
        let ws = DualWorkspace::new(&inst, 1.5).unwrap();
        assert_eq!(ws.gamma1, vec![0, 1]);
        assert!(ws.gamma2.is_empty());
        assert!((psi_right_derivative(&inst, &ws) + 0.5).abs() < 1e-15);
        assert!((psi_left_derivative(&inst, &ws).unwrap() + 0.5).abs() < 1e-15);
    }

    #[test]
    fn derivative_with_ties() {
        let inst = degenerate();
        let ws = DualWorkspace::new(&inst, 2.0).unwrap();
        assert_eq!(ws.gamma1, vec![0]);
        assert_eq!(ws.gamma2, vec![1, 2]);
        assert_eq!(ws.kbar, 1);
        assert!((psi_right_derivative(&inst, &ws) + 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(psi_left_derivative(&inst, &ws).unwrap(), 0.0);
    }

    #[test]
    fn constant_normal_has_flat_psi() {
        let inst = Instance::new(vec![0.1, 0.2, 0.3], vec![2.5; 3], 1.0).unwrap();
        let ws = DualWorkspace::new(&inst, 0.8).unwrap();
        assert_eq!(psi_right_derivative(&inst, &ws), 0.0);
        assert_eq!(psi_left_derivative(&inst, &ws).unwrap(), 0.0);
    }

    #[test]
    fn left_derivative_needs_positive_sigma() {
        let inst = toy(0.5);
        let ws = DualWorkspace::new(&inst, 0.0).unwrap();
        assert!(matches!(
            psi_left_derivative(&inst, &ws),
            Err(Error::LeftDerivativeAtZero)
        ));
    }
}
