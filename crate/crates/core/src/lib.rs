//! Estimation of a Bernoulli probability by inverse binomial sampling with a
//! guaranteed relative-interval confidence.
//!
//! Sampling observes Bernoulli trials until a fixed number `r` of successes
//! arrives; the trial count `N` then carries all the information about the
//! unknown probability `p`. For a relative window `[p/mu2, p*mu1]` this crate
//! computes, for estimators of the family `omega/(N + d)`:
//!
//! - the exact confidence `c(p) = P[p/mu2 <= estimate <= p*mu1]` at any p,
//!   its asymptotic value as `p -> 0`, and the optimum asymptotic confidence
//!   `c*` no estimator can beat ([`model`], [`confidence`]);
//! - design solvers: the numerator that attains `c*`, sufficient conditions
//!   under which the guarantee holds for every `p` in (0,1), the threshold
//!   ratio `h(r)`, minimum-`r` and interval-ratio searches ([`design`]);
//! - seeded, reproducible Monte Carlo coverage verification
//!   ([`montecarlo`]).
//!
//! The numeric kernels are generic over a floating scalar ([`Real`]); the
//! crate-root aliases pin the `f64` instances that every documented tolerance
//! refers to.
//!
//! ```
//! use invbinom::{design, RelativeInterval64, Shape};
//!
//! // smallest r guaranteeing 90% confidence for a symmetric 50% margin
//! let iv = RelativeInterval64::symmetric(0.5).unwrap();
//! let plan = design::min_r_for_confidence(iv.ratio(), 0.90, true).unwrap();
//! assert_eq!(plan.r.get(), 17);
//!
//! let spec = design::make_optimal_estimator(plan.r, &iv);
//! let (lo, hi) = spec.interval_estimate(&iv, 40).unwrap();
//! assert!(lo < hi);
//! ```

// Reference constants keep their full published digits; probability checks
// are written in negated form so NaN is rejected too.
#![allow(clippy::excessive_precision)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod confidence;
pub mod design;
mod error;
pub mod model;
pub mod montecarlo;
mod scalar;
pub mod specfun;

pub use error::{Error, Result};
pub use scalar::Real;
pub use specfun::Shape;

pub use confidence::{ConfidenceCurve, CoverageWindow};
pub use design::{BindingCondition, DesignResult};
pub use model::{EstimatorSpec, RelativeInterval};
pub use montecarlo::SimulationReport;

/// `f64` instances of the core types; the documented accuracy targets hold
/// for these.
pub type RelativeInterval64 = RelativeInterval<f64>;
pub type EstimatorSpec64 = EstimatorSpec<f64>;
pub type ConfidenceCurve64 = ConfidenceCurve<f64>;
pub type DesignResult64 = DesignResult<f64>;
pub type SimulationReport64 = SimulationReport<f64>;
