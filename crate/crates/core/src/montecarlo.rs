//! Seeded simulation of inverse binomial sampling and empirical coverage
//! verification against the analytic confidence.
//!
//! Replicates are split into fixed-size batches, each drawing from its own
//! ChaCha stream derived from (seed, batch index), so results are bit
//! identical no matter how many worker threads run the batches.

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{EstimatorSpec, RelativeInterval};
use crate::scalar::{cast, clamp01, Real};
use crate::specfun::{check_probability, Shape};

/// Two-sided 95% normal quantile used for the reported Wilson bounds.
pub const WILSON_Z95: f64 = 1.9599639845400542;

const BATCH: u64 = 8192;

/// Outcome of a seeded coverage experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationReport<T> {
    pub reps: u64,
    /// Replicates whose estimate landed in the closed window `[p/mu2, p mu1]`.
    pub hits: u64,
    pub coverage: T,
    pub wilson_low: T,
    pub wilson_high: T,
    pub mean_stopping_time: T,
    pub seed: u64,
}

/// One stopping time of inverse binomial sampling: the sum of r geometric
/// trial counts, each drawn by inverse transform `ceil(ln U / ln(1-p))` with
/// U uniform on (0, 1).
pub fn sample_stopping_time<T: Real, R: Rng + ?Sized>(r: Shape, p: T, rng: &mut R) -> Result<u64> {
    check_probability(p)?;
    let ln_q = (-p).ln_1p(); // ln(1 - p) < 0
    let mut total = 0u64;
    for _ in 0..r.get() {
        let u: f64 = rng.sample(Open01);
        let trials = (cast::<T, _>(u).ln() / ln_q).ceil();
        total = total.saturating_add(trials.to_u64().unwrap_or(u64::MAX).max(1));
    }
    Ok(total)
}

/// Wilson score interval for a binomial proportion of `hits` in `reps` at
/// normal quantile `z`; stays inside [0, 1] even for proportions at the ends.
pub fn wilson_interval<T: Real>(hits: u64, reps: u64, z: T) -> (T, T) {
    let n = cast::<T, _>(reps);
    let p_hat = cast::<T, _>(hits) / n;
    let z2 = z * z;
    let denom = T::one() + z2 / n;
    let center = (p_hat + z2 / (n + n)) / denom;
    let half =
        z * (p_hat * (T::one() - p_hat) / n + z2 / (cast::<T, _>(4.0) * n * n)).sqrt() / denom;
    (clamp01(center - half), clamp01(center + half))
}

/// Run `reps` independent stopping-time draws for the estimator and count how
/// often the point estimate lands in the closed relative window around p.
/// Deterministic for a given seed, independent of thread count.
pub fn coverage_experiment<T: Real>(
    spec: &EstimatorSpec<T>,
    iv: &RelativeInterval<T>,
    p: T,
    reps: u64,
    seed: u64,
) -> Result<SimulationReport<T>> {
    check_probability(p)?;
    if reps == 0 {
        return Err(Error::Domain("reps must be at least 1"));
    }
    let lower = p / iv.mu2();
    let upper = p * iv.mu1();
    let n_batches = reps.div_ceil(BATCH);
    let (hits, time_sum) = (0..n_batches)
        .into_par_iter()
        .map(|batch| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(batch);
            let count = BATCH.min(reps - batch * BATCH);
            let mut hits = 0u64;
            let mut time_sum = 0u128;
            for _ in 0..count {
                let n = sample_stopping_time(spec.r(), p, &mut rng).expect("p validated");
                time_sum += n as u128;
                let est = spec.point_estimate(n).expect("sampled n >= r");
                if lower <= est && est <= upper {
                    hits += 1;
                }
            }
            (hits, time_sum)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));

    let (wilson_low, wilson_high) = wilson_interval(hits, reps, cast::<T, _>(WILSON_Z95));
    Ok(SimulationReport {
        reps,
        hits,
        coverage: cast::<T, _>(hits) / cast::<T, _>(reps),
        wilson_low,
        wilson_high,
        mean_stopping_time: cast::<T, _>(time_sum) / cast::<T, _>(reps),
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::confidence::exact_confidence;
    use crate::design::make_optimal_estimator;
    use crate::specfun::stopping_time_pmf;

    fn shape(r: u32) -> Shape {
        Shape::new(r).unwrap()
    }

    #[test]
    fn stopping_time_never_below_r() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5000 {
            let n = sample_stopping_time(shape(7), 0.35f64, &mut rng).unwrap();
            assert!(n >= 7);
        }
        assert!(sample_stopping_time(shape(7), 0.0f64, &mut rng).is_err());
        assert!(sample_stopping_time(shape(7), 1.0f64, &mut rng).is_err());
    }

    #[test]
    fn near_certain_success_stops_immediately() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut at_minimum = 0u32;
        for _ in 0..10_000 {
            if sample_stopping_time(shape(17), 0.999f64, &mut rng).unwrap() == 17 {
                at_minimum += 1;
            }
        }
        // P[N = r] = p^r = 0.999^17, about 0.983
        assert!(at_minimum > 9_500, "only {at_minimum} draws at the minimum");
    }

    #[test]
    fn empirical_pmf_matches_analytic() {
        let reps = 1_000_000u64;
        let mut counts = [0u64; 16];
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        for _ in 0..reps {
            let n = sample_stopping_time(shape(3), 0.5f64, &mut rng).unwrap();
            if n <= 15 {
                counts[n as usize] += 1;
            }
        }
        for n in 3..=15u64 {
            let expect = stopping_time_pmf(shape(3), 0.5, n).unwrap();
            let freq = counts[n as usize] as f64 / reps as f64;
            let se = (expect * (1.0 - expect) / reps as f64).sqrt();
            assert!(
                (freq - expect).abs() <= 3.0 * se,
                "bin {n}: freq {freq} vs pmf {expect} (3se = {:.2e})",
                3.0 * se
            );
        }
    }

    #[test]
    fn experiment_is_reproducible() {
        let iv = RelativeInterval::new(1.5, 1.5).unwrap();
        let spec = make_optimal_estimator(shape(17), &iv);
        let a = coverage_experiment(&spec, &iv, 0.1, 20_000, 42).unwrap();
        let b = coverage_experiment(&spec, &iv, 0.1, 20_000, 42).unwrap();
        assert_eq!(a, b);
        let c = coverage_experiment(&spec, &iv, 0.1, 20_000, 43).unwrap();
        assert_ne!(a.hits, c.hits);
    }

    #[test]
    fn single_rep_coverage_is_binary() {
        let iv = RelativeInterval::new(1.5, 1.5).unwrap();
        let spec = make_optimal_estimator(shape(3), &iv);
        let rep = coverage_experiment(&spec, &iv, 0.3, 1, 0).unwrap();
        assert!(rep.coverage == 0.0 || rep.coverage == 1.0);
        assert!(coverage_experiment(&spec, &iv, 0.3, 0, 0).is_err());
    }

    #[test]
    fn wilson_interval_reference_and_invariants() {
        let (lo, hi) = wilson_interval(80, 100, WILSON_Z95);
        assert!((lo - 0.7111708344068411).abs() < 1e-12);
        assert!((hi - 0.8666330666689675).abs() < 1e-12);
        for &(h, n) in &[(0u64, 50u64), (50, 50), (1, 3), (9999, 10000)] {
            let (lo, hi) = wilson_interval(h, n, WILSON_Z95);
            let cov = h as f64 / n as f64;
            assert!(0.0 <= lo && lo <= cov && cov <= hi && hi <= 1.0);
        }
    }

    #[test]
    fn coverage_tracks_analytic_confidence() {
        // 3 x 3 grid, 99.9% Wilson gate, one deterministic retry per cell
        let z999 = 3.2905267314918948;
        for &r in &[3u32, 10, 17] {
            let iv = RelativeInterval::new(1.5f64, 1.5).unwrap();
            let spec = make_optimal_estimator(shape(r), &iv);
            for &p in &[0.5, 0.1, 0.01] {
                let analytic = exact_confidence(&spec, &iv, p).unwrap();
                let mut ok = false;
                for seed in [90, 91] {
                    let rep = coverage_experiment(&spec, &iv, p, 100_000, seed).unwrap();
                    let (lo, hi) = wilson_interval(rep.hits, rep.reps, z999);
                    if lo <= analytic && analytic <= hi {
                        ok = true;
                        break;
                    }
                }
                assert!(ok, "analytic c(p) outside 99.9% Wilson at r={r}, p={p}");
            }
        }
    }

    #[test]
    fn guarantee_designs_hold_in_simulation() {
        // designs whose global condition holds: empirical coverage must not
        // fall materially below the optimum confidence
        for &r in &[10u32, 17] {
            let iv = RelativeInterval::new(1.5f64, 1.5).unwrap();
            let spec = make_optimal_estimator(shape(r), &iv);
            assert!(crate::design::global_guarantee_condition(shape(r), iv.ratio()).unwrap());
            let c_star = crate::model::optimal_confidence(shape(r), iv.ratio()).unwrap();
            for &p in &[0.5, 0.1, 0.01] {
                let rep = coverage_experiment(&spec, &iv, p, 100_000, 7).unwrap();
                let slack = 4.0 * (c_star * (1.0 - c_star) / 100_000.0).sqrt();
                assert!(
                    rep.coverage >= c_star - slack,
                    "r={r} p={p}: coverage {} below c* - slack {}",
                    rep.coverage,
                    c_star - slack
                );
            }
        }
    }

    #[test]
    fn mean_stopping_time_matches_expectation() {
        let iv = RelativeInterval::new(1.5f64, 1.5).unwrap();
        let spec = make_optimal_estimator(shape(10), &iv);
        let rep = coverage_experiment(&spec, &iv, 0.2, 100_000, 0).unwrap();
        let expect = 10.0 / 0.2;
        let sigma_mean = (10.0 * 0.8f64).sqrt() / 0.2 / (100_000.0f64).sqrt();
        assert!(
            (rep.mean_stopping_time - expect).abs() <= 3.0 * sigma_mean,
            "mean {} vs {expect} (3 sigma = {})",
            rep.mean_stopping_time,
            3.0 * sigma_mean
        );
    }
}
