//! Core domain types: the relative window, the estimator family
//! `g(n) = omega / (n + d)`, and the closed-form asymptotic confidence
//! quantities attached to them.

use crate::error::{Error, Result};
use crate::scalar::{cast, clamp01, Real};
use crate::specfun::{reg_gamma_raw, Shape};

/// Target relative window around the unknown probability: an estimate covers
/// p whenever `p / mu2 <= estimate <= p * mu1`, equivalently p lies in
/// `[estimate / mu1, estimate * mu2]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativeInterval<T> {
    mu1: T,
    mu2: T,
}

impl<T: Real> RelativeInterval<T> {
    pub fn new(mu1: T, mu2: T) -> Result<Self> {
        if !(mu1 > T::one()) || !mu1.is_finite() {
            return Err(Error::Domain("mu1 must be a finite value above 1"));
        }
        if !(mu2 > T::one()) || !mu2.is_finite() {
            return Err(Error::Domain("mu2 must be a finite value above 1"));
        }
        Ok(RelativeInterval { mu1, mu2 })
    }

    /// Symmetric window from a relative error margin m > 0: mu1 = mu2 = 1 + m.
    pub fn symmetric(margin: T) -> Result<Self> {
        Self::new(T::one() + margin, T::one() + margin)
    }

    /// Window for a bound on the absolute error `|estimate - p| <= m p`:
    /// mu1 = 1 + m, mu2 = 1 / (1 - m), with 0 < m < 1.
    pub fn absolute_error(margin: T) -> Result<Self> {
        if !(margin > T::zero() && margin < T::one()) {
            return Err(Error::Domain("absolute-error margin must lie in (0, 1)"));
        }
        Self::new(T::one() + margin, (T::one() - margin).recip())
    }

    /// Symmetric window with a prescribed end-point ratio M > 1:
    /// mu1 = mu2 = sqrt(M).
    pub fn from_ratio(ratio: T) -> Result<Self> {
        if !(ratio > T::one()) || !ratio.is_finite() {
            return Err(Error::Domain("ratio M must be a finite value above 1"));
        }
        let s = ratio.sqrt();
        Self::new(s, s)
    }

    #[inline]
    pub fn mu1(&self) -> T {
        self.mu1
    }

    #[inline]
    pub fn mu2(&self) -> T {
        self.mu2
    }

    /// End-point ratio M = mu1 * mu2 of the produced interval estimates; the
    /// only interval parameter the optimum confidence depends on.
    #[inline]
    pub fn ratio(&self) -> T {
        self.mu1 * self.mu2
    }
}

/// An estimator `g(N) = omega / (N + d)` of the stopping-time family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorSpec<T> {
    r: Shape,
    omega: T,
    d: T,
}

impl<T: Real> EstimatorSpec<T> {
    pub fn new(r: Shape, omega: T, d: T) -> Result<Self> {
        if !(omega > T::zero()) || !omega.is_finite() {
            return Err(Error::Domain("omega must be a finite positive value"));
        }
        if !d.is_finite() || !(cast::<T, _>(r.get()) + d > T::zero()) {
            return Err(Error::Domain("r + d must be positive"));
        }
        Ok(EstimatorSpec { r, omega, d })
    }

    /// Minimum-variance unbiased estimator `(r-1)/(N-1)`.
    pub fn umvu(r: Shape) -> Self {
        Self::new(r, cast(r.get() - 1), -T::one()).expect("valid for r >= 3")
    }

    /// The estimator `(r-1)/N`.
    pub fn classical(r: Shape) -> Self {
        Self::new(r, cast(r.get() - 1), T::zero()).expect("valid for r >= 3")
    }

    /// Maximum-likelihood estimator `r/N`.
    pub fn maximum_likelihood(r: Shape) -> Self {
        Self::new(r, cast(r.get()), T::zero()).expect("valid for r >= 3")
    }

    #[inline]
    pub fn r(&self) -> Shape {
        self.r
    }

    #[inline]
    pub fn omega(&self) -> T {
        self.omega
    }

    #[inline]
    pub fn shift(&self) -> T {
        self.d
    }

    /// Point estimate `omega / (n + d)` at stopping time n >= r.
    pub fn point_estimate(&self, n: u64) -> Result<T> {
        if n < self.r.get() as u64 {
            return Err(Error::Domain("stopping time n must be at least r"));
        }
        Ok(self.omega / (cast::<T, _>(n) + self.d))
    }

    /// Interval estimate `[estimate / mu1, estimate * mu2]`; the ratio of its
    /// end points is exactly `iv.ratio()`.
    pub fn interval_estimate(&self, iv: &RelativeInterval<T>, n: u64) -> Result<(T, T)> {
        let est = self.point_estimate(n)?;
        Ok((est / iv.mu1(), est * iv.mu2()))
    }
}

/// The numerator maximizing the asymptotic confidence for the given window:
/// `omega* = r (ln mu2 + ln mu1) / (mu2 - 1/mu1)`.
pub fn optimal_omega<T: Real>(r: Shape, iv: &RelativeInterval<T>) -> T {
    let rr = cast::<T, _>(r.get());
    rr * (iv.mu2().ln() + iv.mu1().ln()) / (iv.mu2() - iv.mu1().recip())
}

/// Limit of the coverage probability as p -> 0 for any estimator of the
/// family: `gamma(r, omega mu2) - gamma(r, omega / mu1)`. Independent of d.
pub fn asymptotic_confidence<T: Real>(spec: &EstimatorSpec<T>, iv: &RelativeInterval<T>) -> T {
    let r = spec.r().get();
    clamp01(reg_gamma_raw(r, spec.omega() * iv.mu2()) - reg_gamma_raw(r, spec.omega() / iv.mu1()))
}

/// Best asymptotic confidence achievable by any estimator at end-point ratio
/// M: `c* = gamma(r, r M ln M / (M-1)) - gamma(r, r ln M / (M-1))`.
pub fn optimal_confidence<T: Real>(r: Shape, ratio: T) -> Result<T> {
    if !(ratio > T::one()) || !ratio.is_finite() {
        return Err(Error::Domain("ratio M must be a finite value above 1"));
    }
    let lo = cast::<T, _>(r.get()) * ratio.ln() / (ratio - T::one());
    Ok(clamp01(
        reg_gamma_raw(r.get(), ratio * lo) - reg_gamma_raw(r.get(), lo),
    ))
}
