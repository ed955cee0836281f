//! Exact finite-p confidence of an estimator over a relative window, curve
//! evaluation with window breakpoints, infimum scans, and the first-order
//! asymptotic margin.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{EstimatorSpec, RelativeInterval};
use crate::scalar::{cast, clamp01, Real};
use crate::specfun::{binom_lower_tail, check_probability, ln_gamma, Shape};

/// The integer range [n1, n2] of stopping times whose point estimate lands in
/// the relative window at a given p. Empty when `n2 < max(n1, r)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoverageWindow {
    pub n1: i64,
    pub n2: i64,
}

impl CoverageWindow {
    pub fn is_empty(&self, r: Shape) -> bool {
        self.n2 < self.n1.max(r.get() as i64)
    }
}

fn to_i64_saturating<T: Real>(x: T) -> i64 {
    x.to_i64()
        .unwrap_or(if x > T::zero() { i64::MAX } else { i64::MIN })
}

/// Stopping times covering p: `n1 = ceil(omega/(p mu1) - d)`,
/// `n2 = floor(omega mu2 / p - d)`.
pub fn coverage_window<T: Real>(
    spec: &EstimatorSpec<T>,
    iv: &RelativeInterval<T>,
    p: T,
) -> Result<CoverageWindow> {
    check_probability(p)?;
    let x1 = spec.omega() / (p * iv.mu1()) - spec.shift();
    let x2 = spec.omega() * iv.mu2() / p - spec.shift();
    Ok(CoverageWindow {
        n1: to_i64_saturating(x1.ceil()),
        n2: to_i64_saturating(x2.floor()),
    })
}

/// Rounding candidates for a window edge. An edge value within 4 ulps of an
/// integer (but not exactly on it) may have landed on either side of the true
/// boundary, so both neighbors are tried; exact integer landings come from
/// exact inputs and keep their closed-boundary meaning.
fn edge_candidates<T: Real>(x: T, toward_ceil: bool) -> (i64, Option<i64>) {
    let primary = to_i64_saturating(if toward_ceil { x.ceil() } else { x.floor() });
    let nearest = x.round();
    let diff = x - nearest;
    let tol = cast::<T, _>(4.0) * T::epsilon() * nearest.abs().max(T::one());
    if diff != T::zero() && diff.abs() <= tol {
        let k = to_i64_saturating(nearest);
        let alternate = if toward_ceil {
            if primary == k {
                k.saturating_add(1)
            } else {
                k
            }
        } else if primary == k {
            k.saturating_sub(1)
        } else {
            k
        };
        (primary, Some(alternate))
    } else {
        (primary, None)
    }
}

fn window_confidence<T: Real>(r: Shape, p: T, n1: i64, n2: i64) -> T {
    let lo = n1.max(r.get() as i64);
    if n2 < lo {
        return T::zero();
    }
    // P[lo <= N <= n2] = tail(lo-1) - tail(n2) with tail(n) = sum_{i<r} b(n,p,i)
    let below = binom_lower_tail((lo - 1) as u64, p, r.get());
    let above = binom_lower_tail(n2 as u64, p, r.get());
    clamp01(below - above)
}

/// Exact confidence `c(p) = P[p/mu2 <= g(N) <= p mu1]` at a fixed p.
///
/// Window edges that sit within rounding noise of an integer are resolved
/// conservatively: every candidate window is evaluated and the smallest
/// confidence is reported.
pub fn exact_confidence<T: Real>(
    spec: &EstimatorSpec<T>,
    iv: &RelativeInterval<T>,
    p: T,
) -> Result<T> {
    check_probability(p)?;
    let x1 = spec.omega() / (p * iv.mu1()) - spec.shift();
    let x2 = spec.omega() * iv.mu2() / p - spec.shift();
    let (n1, n1_alt) = edge_candidates(x1, true);
    let (n2, n2_alt) = edge_candidates(x2, false);
    let mut c = window_confidence(spec.r(), p, n1, n2);
    for lo in [Some(n1), n1_alt].into_iter().flatten() {
        for hi in [Some(n2), n2_alt].into_iter().flatten() {
            c = c.min(window_confidence(spec.r(), p, lo, hi));
        }
    }
    Ok(c)
}

/// Evaluated confidence curve: (p, c) points with strictly increasing p, plus
/// the window breakpoints that were folded into the evaluation set.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceCurve<T> {
    points: Vec<(T, T)>,
    breakpoints: Vec<T>,
}

impl<T: Real> ConfidenceCurve<T> {
    pub fn points(&self) -> &[(T, T)] {
        &self.points
    }

    pub fn breakpoints(&self) -> &[T] {
        &self.breakpoints
    }
}

/// Relative offset used to probe both one-sided limits at a breakpoint.
const BREAKPOINT_EPS: f64 = 9.094947017729282e-13; // 2^-40

/// Hard cap on curve evaluations; guards against p ranges so wide that the
/// breakpoint set would not fit in memory.
const MAX_CURVE_POINTS: usize = 20_000_000;

fn breakpoint_family<T: Real>(
    numerator: T,
    d: T,
    p_min: T,
    p_max: T,
    out: &mut Vec<T>,
) -> Result<()> {
    // p = numerator / (k + d) lands in [p_min, p_max] for integers k in
    // [numerator/p_max - d, numerator/p_min - d]
    let lo = (numerator / p_max - d).floor();
    let hi = (numerator / p_min - d).ceil();
    let count = (hi - lo).to_f64().unwrap_or(f64::INFINITY);
    if !(count < MAX_CURVE_POINTS as f64) {
        return Err(Error::InvalidRange(
            "breakpoint count exceeds the evaluation cap; raise p_min or narrow the range",
        ));
    }
    let k_lo = to_i64_saturating(lo).saturating_sub(1);
    let k_hi = to_i64_saturating(hi).saturating_add(1);
    for k in k_lo..=k_hi {
        let s = cast::<T, _>(k) + d;
        if s > T::zero() {
            let p = numerator / s;
            if p >= p_min && p <= p_max {
                out.push(p);
            }
        }
    }
    Ok(())
}

/// Evaluate the exact confidence on a log-spaced grid of `grid_size` points
/// over [p_min, p_max], plus both one-sided limits of every window breakpoint
/// in range.
pub fn confidence_curve<T: Real>(
    spec: &EstimatorSpec<T>,
    iv: &RelativeInterval<T>,
    p_min: T,
    p_max: T,
    grid_size: usize,
) -> Result<ConfidenceCurve<T>> {
    if !(p_min > T::zero() && p_min < p_max && p_max < T::one()) {
        return Err(Error::InvalidRange("require 0 < p_min < p_max < 1"));
    }
    if grid_size < 2 {
        return Err(Error::InvalidRange("grid_size must be at least 2"));
    }

    let mut breakpoints = Vec::new();
    breakpoint_family(
        spec.omega() / iv.mu1(),
        spec.shift(),
        p_min,
        p_max,
        &mut breakpoints,
    )?;
    breakpoint_family(
        spec.omega() * iv.mu2(),
        spec.shift(),
        p_min,
        p_max,
        &mut breakpoints,
    )?;
    breakpoints.sort_by(|a, b| a.partial_cmp(b).expect("breakpoints are finite"));
    breakpoints.dedup();

    let mut ps = Vec::with_capacity(grid_size + 2 * breakpoints.len());
    let (ln_lo, ln_hi) = (p_min.ln(), p_max.ln());
    for k in 0..grid_size {
        let f = cast::<T, _>(k) / cast::<T, _>(grid_size - 1);
        ps.push((ln_lo + (ln_hi - ln_lo) * f).exp());
    }
    ps[0] = p_min;
    ps[grid_size - 1] = p_max;
    let eps = cast::<T, _>(BREAKPOINT_EPS);
    for &b in &breakpoints {
        ps.push(b * (T::one() - eps));
        ps.push(b * (T::one() + eps));
    }
    ps.retain(|&p| p > T::zero() && p < T::one());
    ps.sort_by(|a, b| a.partial_cmp(b).expect("grid points are finite"));
    ps.dedup();
    if ps.len() > MAX_CURVE_POINTS {
        return Err(Error::InvalidRange(
            "breakpoint count exceeds the evaluation cap; raise p_min or narrow the range",
        ));
    }

    let points = ps
        .par_iter()
        .map(|&p| {
            let c = exact_confidence(spec, iv, p).expect("p validated in (0,1)");
            (p, c)
        })
        .collect();
    Ok(ConfidenceCurve {
        points,
        breakpoints,
    })
}

/// Minimum evaluated point of a curve, ties broken toward the smallest p.
///
/// This is a witness for guarantee violations, not a certificate of the true
/// infimum over continuous p.
pub fn scan_infimum<T: Real>(curve: &ConfidenceCurve<T>) -> Result<(T, T)> {
    let mut best: Option<(T, T)> = None;
    for &(p, c) in &curve.points {
        match best {
            Some((_, bc)) if c >= bc => {}
            _ => best = Some((p, c)),
        }
    }
    best.ok_or(Error::EmptyCurve)
}

/// First-order coefficient of the confidence margin over its asymptote:
/// `w1 = (r lnM/(M-1))^{r-1} M^{-r/(M-1)} [ -(r+1+2d)/M + r-1+2d ] / (2 (r-1)!)`.
///
/// Positive exactly when d clears the asymptotic-guarantee threshold.
pub fn first_order_margin<T: Real>(r: Shape, ratio: T, d: T) -> Result<T> {
    if !(ratio > T::one()) || !ratio.is_finite() {
        return Err(Error::Domain("ratio M must be a finite value above 1"));
    }
    let rr = cast::<T, _>(r.get());
    let two = cast::<T, _>(2.0);
    let bracket = rr - T::one() + two * d - (rr + T::one() + two * d) / ratio;
    if bracket == T::zero() {
        return Ok(T::zero());
    }
    let base = rr * ratio.ln() / (ratio - T::one());
    let ln_prefactor = (rr - T::one()) * base.ln()
        - rr / (ratio - T::one()) * ratio.ln()
        - two.ln()
        - ln_gamma(rr);
    Ok(bracket * ln_prefactor.exp())
}

/// Whether `d > (1/2)(-r + (M+1)/(M-1))`, the condition under which the
/// optimal-numerator estimator asymptotically guarantees the optimum
/// confidence.
pub fn asymptotic_guarantee_condition<T: Real>(r: Shape, ratio: T, d: T) -> Result<bool> {
    if !(ratio > T::one()) || !ratio.is_finite() {
        return Err(Error::Domain("ratio M must be a finite value above 1"));
    }
    let rr = cast::<T, _>(r.get());
    let threshold = ((ratio + T::one()) / (ratio - T::one()) - rr) / cast::<T, _>(2.0);
    Ok(d > threshold)
}
