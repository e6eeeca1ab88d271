//! Point estimates with non-overlapping batch-means confidence intervals.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

pub const DEFAULT_BATCHES: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    /// 95% interval from batch means; absent with fewer than two batches.
    pub ci: Option<(f64, f64)>,
    pub batches: usize,
}

impl Estimate {
    pub fn contains(&self, x: f64) -> bool {
        self.ci.is_some_and(|(lo, hi)| lo <= x && x <= hi)
    }
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Unbiased sample variance.
pub fn variance(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return f64::NAN;
    }
    let m = mean(values);
    values.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64
}

fn t_quantile_975(df: usize) -> f64 {
    StudentsT::new(0.0, 1.0, df as f64)
        .map(|t| t.inverse_cdf(0.975))
        .unwrap_or(f64::NAN)
}

/// Mean of per-batch statistics, with a t-interval over the batches.
///
/// `per_sample` maps each observation to the quantity being averaged; the
/// trailing remainder that does not fill a whole batch is dropped from the
/// interval but kept in the point estimate.
fn batch_interval(
    values: &[f64],
    batches: usize,
    per_sample: impl Fn(f64) -> f64,
) -> Option<(f64, f64)> {
    let batches = batches.min(values.len());
    if batches < 2 {
        return None;
    }
    let len = values.len() / batches;
    let batch_means: Vec<f64> = values
        .chunks_exact(len)
        .take(batches)
        .map(|chunk| chunk.iter().map(|&x| per_sample(x)).sum::<f64>() / len as f64)
        .collect();
    let centre = mean(&batch_means);
    let half = t_quantile_975(batches - 1) * (variance(&batch_means) / batches as f64).sqrt();
    Some((centre - half, centre + half))
}

pub fn mean_estimate(values: &[f64], batches: usize) -> Estimate {
    Estimate {
        value: mean(values),
        ci: batch_interval(values, batches, |x| x),
        batches: batches.min(values.len()),
    }
}

/// Variance of an autocorrelated series.
///
/// Each batch averages the squared deviations from the overall mean, so short
/// batches are not biased low by re-centring on their own mean.
pub fn variance_estimate(values: &[f64], batches: usize) -> Estimate {
    let n = values.len();
    if n < 2 {
        return Estimate {
            value: f64::NAN,
            ci: None,
            batches: 0,
        };
    }
    let m = mean(values);
    let scale = n as f64 / (n - 1) as f64;
    Estimate {
        value: variance(values),
        ci: batch_interval(values, batches, |x| (x - m) * (x - m) * scale),
        batches: batches.min(n),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_moments() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(mean(&v), 2.5);
        assert!((variance(&v) - 5.0 / 3.0).abs() < 1e-15);
        assert!(mean(&[]).is_nan());
        assert!(variance(&[1.0]).is_nan());
    }

    #[test]
    fn t_quantile_matches_table() {
        // two-sided 95%, df = 29
        assert!((t_quantile_975(29) - 2.045).abs() < 1e-3);
    }

    #[test]
    fn interval_brackets_point_for_iid_data() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let values: Vec<f64> = (0..30_000).map(|_| rng.random::<f64>()).collect();
        let m = mean_estimate(&values, 30);
        assert!(m.contains(0.5), "{m:?}");
        let v = variance_estimate(&values, 30);
        assert!(v.contains(1.0 / 12.0), "{v:?}");
        assert!((v.value - 1.0 / 12.0).abs() < 2e-3);
    }

    #[test]
    fn too_few_samples_have_no_interval() {
        assert!(mean_estimate(&[1.0], 30).ci.is_none());
        assert!(variance_estimate(&[1.0], 30).ci.is_none());
    }
}
