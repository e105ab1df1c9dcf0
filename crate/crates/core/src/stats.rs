//! Summary statistics over overhead samples and interval-overlap comparison.
//!
//! Generic over the floating-point type; the crate root exposes `f64`
//! aliases. Quartiles use linear interpolation between order statistics at
//! index `h = (n - 1) * p`. The 95 % interval uses the normal quantile 1.96.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub trait Scalar: Float + FromPrimitive + Debug + Display + Send + Sync + 'static {}

impl<T> Scalar for T where T: Float + FromPrimitive + Debug + Display + Send + Sync + 'static {}

pub const Z_95: f64 = 1.96;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StatsError {
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("sample {index} is not finite")]
    NonFinite { index: usize },
    #[error("per-call divisor must be at least 1")]
    ZeroDepth,
}

/// All values in microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary<T> {
    pub n: usize,
    pub mean: T,
    pub stddev: T,
    pub ci95_half: T,
    pub q1: T,
    pub median: T,
    pub q3: T,
    /// `mean / depth`: overhead per monitored call.
    pub per_call_mean: T,
}

impl<T: Scalar> Summary<T> {
    pub fn ci_low(&self) -> T {
        self.mean - self.ci95_half
    }

    pub fn ci_high(&self) -> T {
        self.mean + self.ci95_half
    }
}

fn cast<T: Scalar>(v: f64) -> T {
    T::from_f64(v).expect("representable constant")
}

/// Value at fraction `p` of an ascending slice, interpolating linearly.
pub fn quantile_sorted<T: Scalar>(sorted: &[T], p: T) -> T {
    assert!(!sorted.is_empty());
    let last = sorted.len() - 1;
    let h = T::from_usize(last).expect("length fits") * p;
    let lo = h.floor();
    let lo_idx = lo.to_usize().unwrap_or(0).min(last);
    let hi_idx = (lo_idx + 1).min(last);
    sorted[lo_idx] + (h - lo) * (sorted[hi_idx] - sorted[lo_idx])
}

/// Summarizes samples given in microseconds.
pub fn summarize<T: Scalar>(samples_us: &[T], depth: u32) -> Result<Summary<T>, StatsError> {
    let n = samples_us.len();
    if n < 2 {
        return Err(StatsError::TooFewSamples(n));
    }
    if depth == 0 {
        return Err(StatsError::ZeroDepth);
    }
    if let Some(index) = samples_us.iter().position(|x| !x.is_finite()) {
        return Err(StatsError::NonFinite { index });
    }

    // Welford's running mean and squared-deviation sum.
    let mut mean = T::zero();
    let mut m2 = T::zero();
    for (i, &x) in samples_us.iter().enumerate() {
        let k = T::from_usize(i + 1).expect("count fits");
        let delta = x - mean;
        mean = mean + delta / k;
        m2 = m2 + delta * (x - mean);
    }
    let nf = T::from_usize(n).expect("count fits");
    let stddev = (m2.max(T::zero()) / (nf - T::one())).sqrt();
    let ci95_half = cast::<T>(Z_95) * stddev / nf.sqrt();

    let mut sorted = samples_us.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let quarter = cast::<T>(0.25);
    let half = cast::<T>(0.5);
    let three_quarters = cast::<T>(0.75);

    Ok(Summary {
        n,
        mean,
        stddev,
        ci95_half,
        q1: quantile_sorted(&sorted, quarter),
        median: quantile_sorted(&sorted, half),
        q3: quantile_sorted(&sorted, three_quarters),
        per_call_mean: mean / T::from_u32(depth).expect("depth fits"),
    })
}

/// Converts nanosecond samples to microseconds, clamping negatives to zero,
/// then summarizes.
pub fn summarize_nanos<T: Scalar>(
    samples_ns: &[i64],
    depth: u32,
) -> Result<Summary<T>, StatsError> {
    let thousand = cast::<T>(1000.0);
    let us: Vec<T> = samples_ns
        .iter()
        .map(|&ns| T::from_i64(ns.max(0)).expect("sample fits") / thousand)
        .collect();
    summarize(&us, depth)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    AFaster,
    BFaster,
    Indistinguishable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison<T> {
    pub config_a: String,
    pub config_b: String,
    pub significant: bool,
    pub direction: Direction,
    /// `mean_b / mean_a`.
    pub ratio: T,
}

/// Significant iff the two 95 % intervals do not overlap.
pub fn compare<T: Scalar>(
    config_a: &str,
    a: &Summary<T>,
    config_b: &str,
    b: &Summary<T>,
) -> Comparison<T> {
    let significant = a.ci_high() < b.ci_low() || b.ci_high() < a.ci_low();
    let direction = if !significant {
        Direction::Indistinguishable
    } else if a.mean < b.mean {
        Direction::AFaster
    } else {
        Direction::BFaster
    };
    Comparison {
        config_a: config_a.to_owned(),
        config_b: config_b.to_owned(),
        significant,
        direction,
        ratio: b.mean / a.mean,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn approx(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
    }

    fn given(mean: f64, ci: f64) -> Summary<f64> {
        Summary {
            n: 100,
            mean,
            stddev: 0.0,
            ci95_half: ci,
            q1: mean,
            median: mean,
            q3: mean,
            per_call_mean: mean,
        }
    }

    #[test]
    fn small_sample() {
        let s = summarize(&[1.0, 2.0, 3.0], 1).unwrap();
        assert!(approx(s.mean, 2.0));
        assert!(approx(s.median, 2.0));
        assert!(approx(s.stddev, 1.0));
    }

    #[test]
    fn constant_sample_has_zero_spread() {
        let s = summarize(&[5.0, 5.0, 5.0, 5.0], 1).unwrap();
        assert_eq!(s.stddev, 0.0);
        assert_eq!(s.ci95_half, 0.0);
    }

    #[test]
    fn quartiles_of_one_to_eight() {
        let xs: Vec<f64> = (1..=8).map(f64::from).collect();
        let s = summarize(&xs, 1).unwrap();
        assert!(approx(s.q1, 2.75));
        assert!(approx(s.median, 4.5));
        assert!(approx(s.q3, 6.25));
    }

    #[test]
    fn works_for_f32() {
        let xs: Vec<f32> = (1..=8).map(|i| i as f32).collect();
        let s = summarize(&xs, 2).unwrap();
        assert!((s.q1 - 2.75).abs() < 1e-6);
        assert!((s.per_call_mean - 2.25).abs() < 1e-6);
    }

    #[test]
    fn per_call_mean_divides_by_depth() {
        let s = summarize(&[10.0, 20.0], 10).unwrap();
        assert!(approx(s.per_call_mean, 1.5));
    }

    #[test]
    fn error_cases() {
        assert_eq!(
            summarize::<f64>(&[1.0], 1),
            Err(StatsError::TooFewSamples(1))
        );
        assert_eq!(summarize::<f64>(&[], 1), Err(StatsError::TooFewSamples(0)));
        assert_eq!(
            summarize(&[1.0, f64::NAN], 1),
            Err(StatsError::NonFinite { index: 1 })
        );
        assert_eq!(summarize(&[1.0, 2.0], 0), Err(StatsError::ZeroDepth));
    }

    #[test]
    fn nanos_are_converted_and_clamped() {
        let s = summarize_nanos::<f64>(&[-5, 1000, 2000], 1).unwrap();
        assert!(approx(s.mean, 1.0));
        assert!(approx(s.q1, 0.5));
    }

    #[test]
    fn separated_intervals_are_significant() {
        let c = compare("a", &given(1.0, 0.1), "b", &given(2.0, 0.1));
        assert!(c.significant);
        assert_eq!(c.direction, Direction::AFaster);
        assert!(approx(c.ratio, 2.0));
    }

    #[test]
    fn overlapping_intervals_are_not() {
        let c = compare("a", &given(1.0, 0.6), "b", &given(2.0, 0.6));
        assert!(!c.significant);
        assert_eq!(c.direction, Direction::Indistinguishable);
    }

    #[test]
    fn narrow_intervals_make_a_small_gap_significant() {
        let c = compare("a", &given(0.4014, 0.0003), "b", &given(0.3897, 0.0002));
        assert!(c.significant);
        assert_eq!(c.direction, Direction::BFaster);
    }

    proptest! {
        #[test]
        fn quartiles_are_ordered(xs in proptest::collection::vec(-1e6f64..1e6, 2..300)) {
            let s = summarize(&xs, 1).unwrap();
            prop_assert!(s.q1 <= s.median && s.median <= s.q3);
            prop_assert!(s.stddev >= 0.0 && s.ci95_half >= 0.0);
        }

        #[test]
        fn compare_is_antisymmetric(
            ma in 0.0f64..10.0, ca in 0.0f64..2.0, mb in 0.0f64..10.0, cb in 0.0f64..2.0
        ) {
            let (a, b) = (given(ma, ca), given(mb, cb));
            let ab = compare("a", &a, "b", &b);
            let ba = compare("b", &b, "a", &a);
            prop_assert_eq!(ab.significant, ba.significant);
            let flipped = match ab.direction {
                Direction::AFaster => Direction::BFaster,
                Direction::BFaster => Direction::AFaster,
                Direction::Indistinguishable => Direction::Indistinguishable,
            };
            prop_assert_eq!(ba.direction, flipped);
        }
    }
}
