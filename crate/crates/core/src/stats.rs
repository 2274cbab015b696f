//! Small statistical helpers: binomial confidence intervals, empirical CDF
//! distances and histograms.

use crate::num::Real;

/// 97.5% standard normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for `successes` out of `n` at 95% confidence.
pub fn wilson_interval(successes: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n_f = n as f64;
    let p = successes as f64 / n_f;
    let z2 = Z_95 * Z_95;
    let denom = 1.0 + z2 / n_f;
    let center = (p + z2 / (2.0 * n_f)) / denom;
    let half = Z_95 * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt() / denom;
    ((center - half).clamp(0.0, p), (center + half).clamp(p, 1.0))
}

/// Kolmogorov–Smirnov distance between the sample and a continuous CDF.
///
/// Sorts `sample` in place.
pub fn ks_distance<T: Real>(sample: &mut [T], cdf: impl Fn(T) -> f64) -> f64 {
    sample.sort_by(|a, b| a.partial_cmp(b).expect("NaN in sample"));
    let n = sample.len() as f64;
    sample
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            let lo = i as f64 / n;
            let hi = (i + 1) as f64 / n;
            (f - lo).abs().max((hi - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic p-value of a one-sample KS statistic (Stephens' correction).
pub fn ks_pvalue(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let t = (sn + 0.12 + 0.11 / sn) * d;
    if t < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let jf = j as f64;
        let term = 2.0 * (-1.0f64).powi(j - 1) * (-2.0 * jf * jf * t * t).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

/// Density histogram over `[lo, hi)` with `bins` equal bins. Values outside
/// the range count towards the normalisation but not towards any bin.
pub fn density_histogram<T: Real>(sample: &[T], lo: T, hi: T, bins: usize) -> (Vec<T>, Vec<T>) {
    let width = (hi - lo) / T::from_usize_lossy(bins);
    let mut counts = vec![0usize; bins];
    for &x in sample {
        if x >= lo && x < hi {
            let b = ((x - lo) / width).floor().to_usize().unwrap_or(bins - 1);
            counts[b.min(bins - 1)] += 1;
        }
    }
    let n = T::from_usize_lossy(sample.len().max(1));
    let centers = (0..bins)
        .map(|i| lo + width * (T::from_usize_lossy(i) + T::lit(0.5)))
        .collect();
    let density = counts
        .into_iter()
        .map(|c| T::from_usize_lossy(c) / (n * width))
        .collect();
    (centers, density)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_brackets_estimate() {
        let (lo, hi) = wilson_interval(700, 1000);
        assert!(lo < 0.7 && hi > 0.7);
        assert!((hi - lo - 0.0567).abs() < 0.001);
        let (lo, hi) = wilson_interval(0, 100);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.05);
        let (lo, hi) = wilson_interval(100, 100);
        assert!(lo > 0.95 && hi == 1.0);
    }

    #[test]
    fn ks_uniform() {
        let mut xs: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        let d = ks_distance(&mut xs, |x| x);
        assert!((d - 0.0005).abs() < 1e-12);
        assert!(ks_pvalue(d, 1000) > 0.99);
        assert!(ks_pvalue(0.1, 1000) < 1e-6);
        // 1% critical value is about 1.628 / sqrt(n)
        let p = ks_pvalue(1.628 / 1000f64.sqrt(), 1000);
        assert!((p - 0.01).abs() < 0.002, "{p}");
    }

    #[test]
    fn histogram_integrates_to_one() {
        let xs: Vec<f64> = (0..10_000).map(|i| i as f64 / 10_000.0).collect();
        let (c, d) = density_histogram(&xs, 0.0, 1.0, 20);
        assert_eq!(c.len(), 20);
        let mass: f64 = d.iter().map(|v| v * 0.05).sum();
        assert!((mass - 1.0).abs() < 1e-12);
    }
}
