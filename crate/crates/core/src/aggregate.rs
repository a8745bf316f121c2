//! Summary statistics for "aggregate then rank" style reporting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean, population standard deviation and quartiles of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub mean: f64,
    pub stddev: f64,
    pub median: f64,
    pub p25: f64,
    pub p75: f64,
    pub count: usize,
}

fn check_finite(values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::EmptyInput("values"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(())
}

fn check_q(q: f64) -> Result<()> {
    if (0.0..=100.0).contains(&q) {
        Ok(())
    } else {
        Err(Error::Domain(format!("percentile {q} outside [0, 100]")))
    }
}

/// Percentile of an ascending slice by linear interpolation at rank `(n - 1) q / 100`.
pub(crate) fn percentile_of_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let pos = (n - 1) as f64 * q / 100.0;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = pos - lo as f64;
    if frac == 0.0 {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

fn sorted_copy(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    v
}

/// The `q`-th percentile (`q` in `[0, 100]`), interpolating linearly between
/// the two closest order statistics.
pub fn percentile(values: &[f64], q: f64) -> Result<f64> {
    check_finite(values)?;
    check_q(q)?;
    Ok(percentile_of_sorted(&sorted_copy(values), q))
}

pub fn mean(values: &[f64]) -> Result<f64> {
    check_finite(values)?;
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

pub fn summarize(values: &[f64]) -> Result<SummaryStats> {
    check_finite(values)?;
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let sorted = sorted_copy(values);
    Ok(SummaryStats {
        mean,
        stddev: var.sqrt(),
        median: percentile_of_sorted(&sorted, 50.0),
        p25: percentile_of_sorted(&sorted, 25.0),
        p75: percentile_of_sorted(&sorted, 75.0),
        count: values.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn percentile_interpolates() {
        assert_eq!(percentile(&[0.0, 10.0], 95.0).unwrap(), 9.5);
        assert_eq!(percentile(&[10.0, 0.0], 50.0).unwrap(), 5.0);
        assert_eq!(percentile(&[5.0], 37.0).unwrap(), 5.0);
    }

    #[test]
    fn percentile_endpoints() {
        let v = [3.0, -1.0, 8.5, 2.0];
        assert_eq!(percentile(&v, 0.0).unwrap(), -1.0);
        assert_eq!(percentile(&v, 100.0).unwrap(), 8.5);
    }

    #[test]
    fn percentile_errors() {
        assert!(matches!(percentile(&[], 50.0), Err(Error::EmptyInput(_))));
        assert!(percentile(&[1.0], 100.5).is_err());
        assert!(percentile(&[1.0], -0.1).is_err());
        assert!(percentile(&[1.0, f64::NAN], 50.0).is_err());
    }

    #[test]
    fn summary_of_one_to_five() {
        let s = summarize(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(s.mean, 3.0);
        assert_eq!(s.median, 3.0);
        assert_eq!(s.p25, 2.0);
        assert_eq!(s.p75, 4.0);
        assert!((s.stddev - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(s.count, 5);
    }

    #[test]
    fn summary_of_singleton() {
        let s = summarize(&[7.25]).unwrap();
        assert_eq!(
            (s.mean, s.median, s.p25, s.p75, s.stddev),
            (7.25, 7.25, 7.25, 7.25, 0.0)
        );
    }

    #[test]
    fn single_outlier_moves_the_mean() {
        let mut v: Vec<f64> = (0..124).map(|i| (i % 17) as f64 * 0.75).collect();
        v.push(373.13);
        let before = summarize(&v).unwrap().mean;
        *v.last_mut().unwrap() = 0.0;
        let after = summarize(&v).unwrap().mean;
        assert!((before - after - 2.98504).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn percentile_is_monotone(v in proptest::collection::vec(-1e3..1e3f64, 1..50), a in 0.0..=100.0f64, b in 0.0..=100.0f64) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(percentile(&v, lo).unwrap() <= percentile(&v, hi).unwrap());
        }

        #[test]
        fn summary_is_permutation_invariant(mut v in proptest::collection::vec(-1e3..1e3f64, 1..50), seed in any::<u64>()) {
            let s1 = summarize(&v).unwrap();
            let n = v.len();
            v.rotate_left((seed as usize) % n);
            let s2 = summarize(&v).unwrap();
            prop_assert_eq!(s1.median, s2.median);
            prop_assert_eq!(s1.p25, s2.p25);
            prop_assert_eq!(s1.p75, s2.p75);
            prop_assert!((s1.mean - s2.mean).abs() <= 1e-9);
            prop_assert!((s1.stddev - s2.stddev).abs() <= 1e-9);
        }

        #[test]
        fn summary_is_affine_equivariant(v in proptest::collection::vec(-1e2..1e2f64, 1..50), a in 0.1..10.0f64, b in -50.0..50.0f64) {
            let s = summarize(&v).unwrap();
            let w: Vec<f64> = v.iter().map(|x| a * x + b).collect();
            let t = summarize(&w).unwrap();
            let close = |x: f64, y: f64| (x - y).abs() <= 1e-9 * (1.0 + x.abs().max(y.abs()));
            prop_assert!(close(t.mean, a * s.mean + b));
            prop_assert!(close(t.stddev, a * s.stddev));
            prop_assert!(close(t.median, a * s.median + b));
            prop_assert!(close(t.p25, a * s.p25 + b));
            prop_assert!(close(t.p75, a * s.p75 + b));
            prop_assert!(s.p25 <= s.median && s.median <= s.p75);
        }
    }
}
