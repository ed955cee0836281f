//! Design-time solvers: sufficient-condition checks for the globally
//! guaranteed optimum, the threshold ratio h(r), the condition crossover
//! root, and the minimum-r / interval-ratio searches.

use crate::error::{Error, Result};
use crate::model::{optimal_confidence, optimal_omega, EstimatorSpec, RelativeInterval};
use crate::scalar::{cast, Real};
use crate::specfun::Shape;

/// Which sufficient inequality binds for a given r: the small-r form applies
/// to r in {3, 4}, the large-r form to r >= 5.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BindingCondition {
    SmallR,
    LargeR,
}

impl BindingCondition {
    pub fn for_shape(r: Shape) -> Self {
        if r.get() <= 4 {
            BindingCondition::SmallR
        } else {
            BindingCondition::LargeR
        }
    }
}

impl std::fmt::Display for BindingCondition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BindingCondition::SmallR => write!(f, "smallR"),
            BindingCondition::LargeR => write!(f, "largeR"),
        }
    }
}

/// Outcome of a minimum-r design search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignResult<T> {
    pub r: Shape,
    /// End-point ratio M the design was solved for.
    pub ratio: T,
    /// Optimum guaranteed confidence at (r, M).
    pub c_star: T,
    /// Whether the global-guarantee sufficient condition holds at (r, M).
    pub global_condition_met: bool,
    pub binding_condition: BindingCondition,
    /// Optimal numerator for the symmetric split mu1 = mu2 = sqrt(M).
    pub omega_star: T,
}

/// Sufficient condition for the optimal estimator (d = 1) to globally
/// guarantee the optimum confidence: for r in {3,4} it is
/// `(M-1)/ln M >= (r + sqrt r)/(r-1)`, for r >= 5 it is
/// `M ln M/(M-1) >= (r + sqrt r + 1)/r`.
pub fn global_guarantee_condition<T: Real>(r: Shape, ratio: T) -> Result<bool> {
    if !(ratio > T::one()) || !ratio.is_finite() {
        return Err(Error::Domain("ratio M must be a finite value above 1"));
    }
    Ok(condition_margin(r, ratio) >= T::zero())
}

/// LHS - RHS of the binding inequality, increasing in M.
fn condition_margin<T: Real>(r: Shape, ratio: T) -> T {
    let rr = cast::<T, _>(r.get());
    match BindingCondition::for_shape(r) {
        BindingCondition::SmallR => {
            (ratio - T::one()) / ratio.ln() - (rr + rr.sqrt()) / (rr - T::one())
        }
        BindingCondition::LargeR => {
            ratio * ratio.ln() / (ratio - T::one()) - (rr + rr.sqrt() + T::one()) / rr
        }
    }
}

/// Sufficient condition on the window for an arbitrary-numerator estimator
/// with d = 1 to hold its asymptotic confidence for every p:
/// `mu1 >= omega/(r - sqrt r)` and `mu2 >= (r + sqrt r + 1)/omega`.
pub fn general_sufficient_condition<T: Real>(
    spec: &EstimatorSpec<T>,
    iv: &RelativeInterval<T>,
) -> Result<bool> {
    if spec.shift() != T::one() {
        return Err(Error::Domain(
            "the general sufficient condition applies only to d = 1",
        ));
    }
    let rr = cast::<T, _>(spec.r().get());
    let first = iv.mu1() >= spec.omega() / (rr - rr.sqrt());
    let second = iv.mu2() >= (rr + rr.sqrt() + T::one()) / spec.omega();
    Ok(first && second)
}

/// Plain bisection; assumes f(lo) <= 0 <= f(hi) and f monotone nondecreasing.
/// Stops once the bracket is below `tol` relative to its location or no
/// representable point remains between the ends.
fn bisect<T: Real>(mut lo: T, mut hi: T, f: impl Fn(T) -> T, tol: T) -> T {
    let half = cast::<T, _>(0.5);
    loop {
        let mid = (lo + hi) * half;
        if mid <= lo || mid >= hi || hi - lo <= tol * lo.abs().max(T::one()) {
            return mid;
        }
        if f(mid) < T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}

fn solver_tol<T: Real>() -> T {
    cast::<T, _>(1e-13).max(T::epsilon() * cast::<T, _>(4.0))
}

/// The r value at which the two sufficient inequalities exchange the binding
/// role: the root of `ln((t + sqrt t + 1)/(t - sqrt t)) - (2 sqrt t + 1)/t`
/// in (4, 5), bisected to a residual below 1e-12.
pub fn crossover_root<T: Real>() -> T {
    let f = |t: T| {
        let s = t.sqrt();
        ((t + s + T::one()) / (t - s)).ln() - (s + s + T::one()) / t
    };
    let four = cast::<T, _>(4.0);
    let five = cast::<T, _>(5.0);
    assert!(
        f(four) > T::zero() && f(five) < T::zero(),
        "bracket (4,5) lost its sign change"
    );
    // f decreases across the bracket
    let root = bisect(four, five, |t| -f(t), solver_tol());
    debug_assert!(f(root).abs() < solver_tol::<T>() * cast::<T, _>(10.0));
    root
}

/// Threshold ratio: the unique M > 1 at which the binding condition for r
/// holds with equality, so `global_guarantee_condition(r, M)` is true exactly
/// for M >= h(r). Decreasing in r.
pub fn threshold_h<T: Real>(r: Shape) -> T {
    let f = |m: T| condition_margin(r, m);
    let lo = T::one() + cast::<T, _>(1e-9);
    let mut hi = cast::<T, _>(2.0);
    while f(hi) < T::zero() {
        hi = hi + hi;
    }
    bisect(lo, hi, f, solver_tol())
}

/// Cap for the linear minimum-r scan.
pub const MIN_R_CAP: u32 = 100_000;

/// Smallest r >= 3 whose optimum confidence at ratio M reaches c0, optionally
/// also requiring the global-guarantee condition. Linear scan up to `cap`.
pub fn min_r_for_confidence_capped<T: Real>(
    ratio: T,
    c0: T,
    require_global: bool,
    cap: u32,
) -> Result<DesignResult<T>> {
    if !(ratio > T::one()) || !ratio.is_finite() {
        return Err(Error::Domain("ratio M must be a finite value above 1"));
    }
    if !(c0 > T::zero() && c0 < T::one()) {
        return Err(Error::Domain("confidence target must lie in (0, 1)"));
    }
    let mut best_r = Shape::MIN;
    let mut best_c = T::neg_infinity();
    for r in Shape::MIN..=cap {
        let r = Shape::new(r).expect("r >= 3 by construction");
        let c = optimal_confidence(r, ratio)?;
        if c > best_c {
            best_c = c;
            best_r = r.get();
        }
        let global = global_guarantee_condition(r, ratio)?;
        if c >= c0 && (!require_global || global) {
            let sqrt_m = ratio.sqrt();
            return Ok(DesignResult {
                r,
                ratio,
                c_star: c,
                global_condition_met: global,
                binding_condition: BindingCondition::for_shape(r),
                omega_star: sqrt_m * cast::<T, _>(r.get()) * ratio.ln() / (ratio - T::one()),
            });
        }
    }
    Err(Error::TargetUnreachable {
        cap,
        best_r,
        best_confidence: best_c.to_f64().unwrap_or(f64::NAN),
    })
}

/// `min_r_for_confidence_capped` with the default cap.
pub fn min_r_for_confidence<T: Real>(
    ratio: T,
    c0: T,
    require_global: bool,
) -> Result<DesignResult<T>> {
    min_r_for_confidence_capped(ratio, c0, require_global, MIN_R_CAP)
}

/// End-point ratio M at which the optimum confidence for r equals c0, found
/// by bisection to 1e-10 in confidence. Always bracketable: the optimum
/// confidence climbs from 0 to 1 as M grows.
pub fn ratio_for_confidence<T: Real>(r: Shape, c0: T) -> Result<T> {
    if !(c0 > T::zero() && c0 < T::one()) {
        return Err(Error::Domain("confidence target must lie in (0, 1)"));
    }
    let f = |m: T| optimal_confidence(r, m).expect("m > 1 inside bracket") - c0;
    let lo = T::one() + cast::<T, _>(1e-12);
    let mut hi = cast::<T, _>(2.0);
    while f(hi) < T::zero() {
        hi = hi + hi;
    }
    let ctol = cast::<T, _>(1e-10).max(T::epsilon() * cast::<T, _>(16.0));
    let half = cast::<T, _>(0.5);
    let (mut lo, mut hi) = (lo, hi);
    loop {
        let mid = (lo + hi) * half;
        if mid <= lo || mid >= hi {
            return Ok(mid);
        }
        let v = f(mid);
        if v.abs() <= ctol {
            return Ok(mid);
        }
        if v < T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}

/// The estimator achieving the optimum guaranteed confidence for the window:
/// numerator `optimal_omega`, shift d = 1.
pub fn make_optimal_estimator<T: Real>(r: Shape, iv: &RelativeInterval<T>) -> EstimatorSpec<T> {
    EstimatorSpec::new(r, optimal_omega(r, iv), T::one()).expect("omega* > 0 and d = 1")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::asymptotic_confidence;

    fn shape(r: u32) -> Shape {
        Shape::new(r).unwrap()
    }

    #[test]
    fn condition_examples() {
        // r=17, M=2.25: LHS 1.4597 vs RHS 1.3013
        assert!(global_guarantee_condition(shape(17), 2.25).unwrap());
        // r=3, M=1.01: LHS 1.005 vs RHS 2.366
        assert!(!global_guarantee_condition(shape(3), 1.01).unwrap());
        assert!(global_guarantee_condition(shape(3), 0.9).is_err());
        // once true, stays true as M grows
        for r in [3u32, 4, 5, 12] {
            let mut was_true = false;
            for k in 1..=80 {
                let m = 1.0 + 0.1 * k as f64;
                let now = global_guarantee_condition(shape(r), m).unwrap();
                assert!(!was_true || now, "condition flipped back at r={r}, M={m}");
                was_true = now;
            }
            assert!(was_true);
        }
    }

    #[test]
    fn general_condition_examples() {
        let iv = RelativeInterval::new(1.5, 1.5).unwrap();
        let spec = make_optimal_estimator::<f64>(shape(17), &iv);
        assert!((spec.omega() - 16.542976410813107).abs() < 1e-12);
        assert!(general_sufficient_condition(&spec, &iv).unwrap());

        // oversized numerator fails the first inequality
        let iv = RelativeInterval::new(1.1, 9.0).unwrap();
        let spec = EstimatorSpec::new(shape(16), 32.0, 1.0).unwrap();
        assert!(!general_sufficient_condition(&spec, &iv).unwrap());

        // equality counts as satisfied
        let r = 9.0f64;
        let omega = 1.25 * (r - r.sqrt());
        let iv = RelativeInterval::new(1.25, (r + r.sqrt() + 1.0) / omega).unwrap();
        let spec = EstimatorSpec::new(shape(9), omega, 1.0).unwrap();
        assert!(general_sufficient_condition(&spec, &iv).unwrap());

        // only proved for d = 1
        let spec = EstimatorSpec::new(shape(9), omega, 0.0).unwrap();
        assert!(general_sufficient_condition(&spec, &iv).is_err());
    }

    #[test]
    fn crossover_root_in_bracket() {
        let t: f64 = crossover_root();
        assert!(t > 4.0 && t < 5.0);
        assert!((t - 4.3834081967015008).abs() < 1e-9);
        let s = t.sqrt();
        let residual = ((t + s + 1.0) / (t - s)).ln() - (2.0 * s + 1.0) / t;
        assert!(residual.abs() < 1e-12, "residual {residual}");
    }

    #[test]
    fn threshold_regression_values() {
        let cases = [
            (3u32, 4.62195243082599),
            (4, 3.5128624172523394),
            (5, 2.9968734850706673),
            (10, 2.0993307290075578),
            (17, 1.737002661309794),
        ];
        for (r, want) in cases {
            let h: f64 = threshold_h(shape(r));
            assert!((h - want).abs() < 1e-9, "h({r}) = {h}, want {want}");
        }
    }

    #[test]
    fn threshold_separates_condition() {
        for r in [3u32, 4, 5, 10, 17] {
            let h: f64 = threshold_h(shape(r));
            assert!(global_guarantee_condition(shape(r), h * (1.0 + 1e-9)).unwrap());
            assert!(!global_guarantee_condition(shape(r), h * (1.0 - 1e-9)).unwrap());
        }
    }

    #[test]
    fn threshold_decreases_with_r() {
        let mut prev = f64::INFINITY;
        for r in 3..=100 {
            let h: f64 = threshold_h(shape(r));
            assert!(h < prev, "h({r}) = {h} did not drop below {prev}");
            assert!(h > 1.0);
            prev = h;
        }
    }

    #[test]
    fn binding_condition_switches_at_crossover() {
        // test-side bisection of each inequality form separately
        fn thr(lhs: impl Fn(f64) -> f64, rhs: f64) -> f64 {
            let (mut lo, mut hi) = (1.0 + 1e-9, 2.0);
            while lhs(hi) < rhs {
                hi *= 2.0;
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if lhs(mid) < rhs {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        }
        for r in 3..=20u32 {
            let rf = r as f64;
            let h1 = thr(|m| (m - 1.0) / m.ln(), (rf + rf.sqrt()) / (rf - 1.0));
            let h2 = thr(|m| m * m.ln() / (m - 1.0), (rf + rf.sqrt() + 1.0) / rf);
            if (r as f64) < crossover_root::<f64>() {
                assert!(h1 > h2, "r={r}: h1={h1} h2={h2}");
                assert_eq!(
                    BindingCondition::for_shape(shape(r)),
                    BindingCondition::SmallR
                );
            } else {
                assert!(h2 > h1, "r={r}: h1={h1} h2={h2}");
                assert_eq!(
                    BindingCondition::for_shape(shape(r)),
                    BindingCondition::LargeR
                );
            }
            // the implemented threshold is the binding (larger) one
            let h: f64 = threshold_h(shape(r));
            assert!((h - h1.max(h2)).abs() < 1e-8);
        }
    }

    #[test]
    fn min_r_reference_targets() {
        let d = min_r_for_confidence(2.25f64, 0.90, true).unwrap();
        assert_eq!(d.r.get(), 17);
        assert!(d.global_condition_met);
        assert_eq!(d.binding_condition, BindingCondition::LargeR);
        assert!((d.c_star - 0.90230537913403114).abs() < 1e-12);

        let d = min_r_for_confidence(1.4f64 / 0.6, 0.90, true).unwrap();
        assert_eq!(d.r.get(), 16);

        // boundary: at M = 1.8808^2 the confidence 0.95 is met exactly at
        // r = 10, so any higher target pushes past it
        let m = 1.8808f64 * 1.8808;
        let c10 = optimal_confidence(shape(10), m).unwrap();
        let d = min_r_for_confidence(m, c10 + 1e-6, true).unwrap();
        assert!(d.r.get() > 10);
        assert_eq!(d.r.get(), 11);
    }

    #[test]
    fn min_r_monotone_in_target_and_ratio() {
        let mut prev = u32::MAX;
        for m in [1.8f64, 2.25, 3.0, 4.5] {
            let d = min_r_for_confidence(m, 0.9, true).unwrap();
            assert!(d.r.get() <= prev);
            prev = d.r.get();
        }
        let mut prev = 0;
        for c0 in [0.5f64, 0.8, 0.9, 0.97] {
            let d = min_r_for_confidence(2.25f64, c0, true).unwrap();
            assert!(d.r.get() >= prev);
            prev = d.r.get();
        }
    }

    #[test]
    fn min_r_region_claim() {
        // confidence 0.851 is reachable with the condition met at M = 4.443
        let d = min_r_for_confidence(4.443f64, 0.851, true).unwrap();
        assert!(d.c_star >= 0.851 && d.global_condition_met);
        assert_eq!(d.r.get(), 5);
        // and r = 4 sits just under that confidence there
        let c4: f64 = optimal_confidence(shape(4), 4.443).unwrap();
        assert!((c4 - 0.84998391959).abs() < 1e-9);
    }

    #[test]
    fn min_r_unreachable_reports_best() {
        let err = min_r_for_confidence_capped(1.01f64, 0.999_999, true, 400).unwrap_err();
        match err {
            Error::TargetUnreachable {
                cap,
                best_r,
                best_confidence,
            } => {
                assert_eq!(cap, 400);
                assert_eq!(best_r, 400);
                assert!(best_confidence < 0.999_999);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn ratio_solver_round_trip() {
        let m: f64 = ratio_for_confidence(shape(10), 0.95).unwrap();
        assert!((m.sqrt() - 1.0 - 0.8808).abs() < 5e-4);
        assert!((m.sqrt() - 1.0 - 0.88084463518592234).abs() < 1e-6);
        let c = optimal_confidence(shape(10), m).unwrap();
        assert!((c - 0.95).abs() < 1e-9);
        for (r, c0) in [(3u32, 0.5f64), (17, 0.9), (40, 0.999)] {
            let m: f64 = ratio_for_confidence(shape(r), c0).unwrap();
            let c = optimal_confidence(shape(r), m).unwrap();
            assert!((c - c0).abs() < 1e-9, "round trip r={r} c0={c0}: {c}");
        }
        assert!(ratio_for_confidence(shape(3), 0.0f64).is_err());
        assert!(ratio_for_confidence(shape(3), 1.0f64).is_err());
    }

    #[test]
    fn optimal_estimator_construction() {
        let iv = RelativeInterval::new(1.5f64, 1.5).unwrap();
        let spec = make_optimal_estimator(shape(17), &iv);
        assert_eq!(spec.shift(), 1.0);
        assert!((spec.omega() - 16.542976410813107).abs() < 1e-3);
        let via_ratio = optimal_confidence(shape(17), iv.ratio()).unwrap();
        let direct = asymptotic_confidence(&spec, &iv);
        assert!((via_ratio - direct).abs() < 1e-13);
    }

    #[test]
    fn single_precision_instantiation() {
        let c: f32 = optimal_confidence(shape(17), 2.25f32).unwrap();
        assert!((c - 0.902305).abs() < 2e-4);
        let h: f32 = threshold_h(shape(3));
        assert!((h - 4.62195).abs() < 1e-3);
        let t: f32 = crossover_root();
        assert!((t - 4.38341).abs() < 1e-3);
        let d = min_r_for_confidence(2.25f32, 0.90, true).unwrap();
        assert_eq!(d.r.get(), 17);
    }

    #[test]
    fn condition_equivalent_to_threshold_on_grid() {
        for r in 3..=52 {
            let h: f64 = threshold_h(shape(r));
            for k in 0..50 {
                let m = 1.05 + 0.25 * k as f64;
                if (m - h).abs() < 1e-9 {
                    continue;
                }
                let byh = m >= h;
                let cond = global_guarantee_condition(shape(r), m).unwrap();
                assert_eq!(cond, byh, "r={r} M={m} h={h}");
            }
        }
    }
}
