/// z for a two-sided 95% interval.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for `successes` out of `trials`.
pub fn wilson_interval(successes: usize, trials: usize, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// True when the observed rate is statistically compatible with being at
/// most `bound`: the Wilson lower limit at `z` standard deviations does not
/// exceed it.
pub fn within_upper_bound(successes: usize, trials: usize, bound: f64, z: f64) -> bool {
    wilson_interval(successes, trials, z).0 <= bound
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Nearest-rank percentile, `q` in `[0, 1]`.
pub fn percentile(xs: &[f64], q: f64) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let rank = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v[rank - 1]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_reference_values() {
        // 10 of 100 at 95%: textbook interval (0.0552, 0.1744)
        let (lo, hi) = wilson_interval(10, 100, Z95);
        assert!((lo - 0.0552).abs() < 1e-4, "{lo}");
        assert!((hi - 0.1744).abs() < 1e-4, "{hi}");
        let (lo, hi) = wilson_interval(0, 50, Z95);
        assert!(lo.abs() < 1e-12);
        assert!(hi > 0.0 && hi < 0.1);
        let (lo, hi) = wilson_interval(50, 50, Z95);
        assert!(lo > 0.9 && (hi - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bound_check() {
        assert!(within_upper_bound(70, 10_000, 0.0625, 3.0));
        assert!(!within_upper_bound(900, 10_000, 0.0625, 3.0));
    }

    #[test]
    fn percentiles() {
        let xs = [5.0, 1.0, 3.0, 2.0, 4.0];
        assert_eq!(percentile(&xs, 0.5), 3.0);
        assert_eq!(percentile(&xs, 1.0), 5.0);
        assert_eq!(percentile(&xs, 0.0), 1.0);
        assert_eq!(mean(&xs), 3.0);
    }
}
