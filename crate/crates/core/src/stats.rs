//! Empirical CDFs and baseline two-sample statistics.
//!
//! The two-sample Cramér–von Mises statistic here is the classic direct
//! form over the pooled multiset; the indicator uses the weak inequality
//! `x <= t`, so ties are deterministic.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("sample point at index {index} is not finite: {value}")]
    NonFinite { index: usize, value: f64 },
    #[error("empty sample: {context}")]
    Empty { context: &'static str },
}

/// A finite multiset of real observations. Duplicates are allowed and the
/// order of points never affects any statistic computed from the sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    points: Vec<f64>,
}

impl Sample {
    /// Build a sample, rejecting NaN and infinite points.
    pub fn new(points: Vec<f64>) -> Result<Self, StatsError> {
        for (index, &value) in points.iter().enumerate() {
            if !value.is_finite() {
                return Err(StatsError::NonFinite { index, value });
            }
        }
        Ok(Self { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().copied()
    }

    pub fn sum(&self) -> f64 {
        self.points.iter().sum()
    }

    /// Arithmetic mean; errors on the empty sample.
    pub fn mean(&self) -> Result<f64, StatsError> {
        if self.points.is_empty() {
            return Err(StatsError::Empty { context: "mean of empty sample" });
        }
        Ok(self.sum() / self.points.len() as f64)
    }
}

/// An empirical CDF over a nonempty sample:
/// `evaluate(t) = #{x : x <= t} / size`, right-continuous and nondecreasing.
#[derive(Debug, Clone, PartialEq)]
pub struct Ecdf {
    sorted_points: Vec<f64>,
}

impl Ecdf {
    /// Construct from a sample. The empty sample is rejected: an empty
    /// ECDF has no defined value anywhere, so callers must guard.
    pub fn new(sample: &Sample) -> Result<Self, StatsError> {
        Self::from_points(sample.points())
    }

    pub fn from_points(points: &[f64]) -> Result<Self, StatsError> {
        if points.is_empty() {
            return Err(StatsError::Empty { context: "ECDF over empty sample" });
        }
        let mut sorted_points = points.to_vec();
        // All points are finite (Sample invariant), so total order holds.
        sorted_points.sort_by(|a, b| a.partial_cmp(b).expect("finite points"));
        Ok(Self { sorted_points })
    }

    pub fn size(&self) -> usize {
        self.sorted_points.len()
    }

    /// Fraction of points `<= t`.
    pub fn evaluate(&self, t: f64) -> f64 {
        let count = self.sorted_points.partition_point(|&x| x <= t);
        count as f64 / self.sorted_points.len() as f64
    }
}

/// Count-based ECDF evaluation without building an `Ecdf`; O(n) per call.
pub fn ecdf_at(points: &[f64], t: f64) -> Result<f64, StatsError> {
    if points.is_empty() {
        return Err(StatsError::Empty { context: "ECDF over empty sample" });
    }
    let count = points.iter().filter(|&&x| x <= t).count();
    Ok(count as f64 / points.len() as f64)
}

/// Two-sample Cramér–von Mises statistic
/// `(nm/(n+m)^2) * Σ_{t in x ∪ y} (F_x(t) - F_y(t))^2`,
/// summed over the multiset union: a value occurring k times contributes
/// k identical terms.
pub fn cvm_two_sample(x: &Sample, y: &Sample) -> Result<f64, StatsError> {
    let fx = Ecdf::new(x)?;
    let fy = Ecdf::new(y)?;
    let n = x.len() as f64;
    let m = y.len() as f64;
    // Summing over the sorted union keeps the statistic bit-identical
    // under argument swaps and input permutations.
    let mut union: Vec<f64> = x.iter().chain(y.iter()).collect();
    union.sort_by(|a, b| a.partial_cmp(b).expect("finite points"));
    let sum: f64 = union
        .iter()
        .map(|&t| {
            let d = fx.evaluate(t) - fy.evaluate(t);
            d * d
        })
        .sum();
    Ok(n * m / ((n + m) * (n + m)) * sum)
}

/// Kolmogorov–Smirnov statistic `sup_t |F_x(t) - F_y(t)|`. The supremum
/// of the step functions is attained at a data point, so the scan over
/// the pooled points is exact.
pub fn ks_statistic(x: &Sample, y: &Sample) -> Result<f64, StatsError> {
    let fx = Ecdf::new(x)?;
    let fy = Ecdf::new(y)?;
    let sup = x
        .iter()
        .chain(y.iter())
        .map(|t| (fx.evaluate(t) - fy.evaluate(t)).abs())
        .fold(0.0, f64::max);
    Ok(sup)
}

/// Absolute difference of sample means.
pub fn mean_diff(x: &Sample, y: &Sample) -> Result<f64, StatsError> {
    Ok((x.mean()? - y.mean()?).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn sample(points: &[f64]) -> Sample {
        Sample::new(points.to_vec()).unwrap()
    }

    #[test]
    fn ecdf_eval_examples() {
        let e = Ecdf::new(&sample(&[0.1, 0.5, 0.9])).unwrap();
        assert_relative_eq!(e.evaluate(0.5), 2.0 / 3.0);
        let e = Ecdf::new(&sample(&[1.0, 2.0, 3.0])).unwrap();
        assert_eq!(e.evaluate(0.0), 0.0);
        let e = Ecdf::new(&sample(&[0.0, 0.0, 1.0])).unwrap();
        assert_relative_eq!(e.evaluate(0.0), 2.0 / 3.0);
    }

    #[test]
    fn ecdf_rejects_empty() {
        let s = sample(&[]);
        assert!(matches!(Ecdf::new(&s), Err(StatsError::Empty { .. })));
        assert!(matches!(ecdf_at(&[], 0.0), Err(StatsError::Empty { .. })));
    }

    #[test]
    fn sample_rejects_non_finite() {
        assert!(matches!(
            Sample::new(vec![0.0, f64::NAN]),
            Err(StatsError::NonFinite { index: 1, .. })
        ));
        assert!(Sample::new(vec![0.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn cvm_examples() {
        assert_relative_eq!(cvm_two_sample(&sample(&[0.0]), &sample(&[1.0])).unwrap(), 0.25);
        assert_relative_eq!(
            cvm_two_sample(&sample(&[0.0, 2.0]), &sample(&[1.0])).unwrap(),
            1.0 / 9.0
        );
        assert_eq!(
            cvm_two_sample(&sample(&[3.0, 7.0]), &sample(&[3.0, 7.0])).unwrap(),
            0.0
        );
    }

    #[test]
    fn ks_examples() {
        assert_relative_eq!(ks_statistic(&sample(&[0.0, 2.0]), &sample(&[1.0])).unwrap(), 0.5);
        assert_eq!(ks_statistic(&sample(&[5.0]), &sample(&[5.0])).unwrap(), 0.0);
        assert_relative_eq!(ks_statistic(&sample(&[0.0]), &sample(&[1.0])).unwrap(), 1.0);
    }

    #[test]
    fn mean_diff_examples() {
        assert_eq!(mean_diff(&sample(&[0.0, 2.0]), &sample(&[1.0])).unwrap(), 0.0);
        assert_eq!(mean_diff(&sample(&[0.0]), &sample(&[1.0])).unwrap(), 1.0);
        assert_eq!(mean_diff(&sample(&[1.0, 2.0, 3.0]), &sample(&[4.0])).unwrap(), 2.0);
    }

    #[test]
    fn statistics_reject_empty_inputs() {
        let empty = sample(&[]);
        let one = sample(&[1.0]);
        assert!(cvm_two_sample(&empty, &one).is_err());
        assert!(ks_statistic(&one, &empty).is_err());
        assert!(mean_diff(&empty, &one).is_err());
    }

    proptest! {
        #[test]
        fn ecdf_is_monotone_and_bounded(
            mut pts in proptest::collection::vec(-100.0f64..100.0, 1..40),
            t1 in -150.0f64..150.0,
            t2 in -150.0f64..150.0,
        ) {
            let e = Ecdf::from_points(&pts).unwrap();
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            prop_assert!(e.evaluate(lo) <= e.evaluate(hi));
            pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
            prop_assert_eq!(e.evaluate(pts[0] - 1.0), 0.0);
            prop_assert_eq!(e.evaluate(*pts.last().unwrap()), 1.0);
        }

        #[test]
        fn statistics_are_symmetric_and_permutation_invariant(
            xs in proptest::collection::vec(-10.0f64..10.0, 1..20),
            ys in proptest::collection::vec(-10.0f64..10.0, 1..20),
        ) {
            let x = Sample::new(xs.clone()).unwrap();
            let y = Sample::new(ys.clone()).unwrap();
            let mut xr = xs.clone();
            xr.reverse();
            let x_rev = Sample::new(xr).unwrap();

            prop_assert_eq!(
                cvm_two_sample(&x, &y).unwrap().to_bits(),
                cvm_two_sample(&y, &x).unwrap().to_bits()
            );
            prop_assert_eq!(
                ks_statistic(&x, &y).unwrap().to_bits(),
                ks_statistic(&y, &x).unwrap().to_bits()
            );
            prop_assert_eq!(
                mean_diff(&x, &y).unwrap().to_bits(),
                mean_diff(&y, &x).unwrap().to_bits()
            );
            prop_assert_eq!(
                cvm_two_sample(&x_rev, &y).unwrap().to_bits(),
                cvm_two_sample(&x, &y).unwrap().to_bits()
            );
        }

        #[test]
        fn identical_samples_score_zero(
            xs in proptest::collection::vec(-10.0f64..10.0, 1..20),
        ) {
            let x = Sample::new(xs).unwrap();
            prop_assert_eq!(cvm_two_sample(&x, &x).unwrap(), 0.0);
            prop_assert_eq!(ks_statistic(&x, &x).unwrap(), 0.0);
        }
    }

    // Monte-Carlo check of the one-sample identity E[(F_X(T) - T)^2] = 1/(6n)
    // for X ~ U(0,1)^n and an independent T ~ U(0,1). The full-budget run
    // lives in the verification suite; this is a coarse guard.
    #[test]
    fn one_sample_uniform_identity_coarse() {
        use rand::Rng;
        let n = 5;
        let trials = 40_000;
        let mut rng = crate::rng::substream(0xABCD, &[9]);
        let mut acc = 0.0;
        for _ in 0..trials {
            let pts: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let t: f64 = rng.random();
            let f = ecdf_at(&pts, t).unwrap();
            acc += (f - t) * (f - t);
        }
        let mean = acc / trials as f64;
        let expect = 1.0 / (6.0 * n as f64);
        assert!(
            (mean - expect).abs() / expect < 0.05,
            "mean {mean} vs {expect}"
        );
    }
}
