use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Bins with expected count below this are pooled.
pub const MIN_EXPECTED: f64 = 5.0;

/// Pre-registered acceptance level for chi-square comparisons.
pub const P_THRESHOLD: f64 = 0.001;

/// Pre-registered width of binomial agreement checks, in standard errors.
pub const SIGMA_THRESHOLD: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    /// Absent when pooling leaves fewer than two bins.
    pub p_value: Option<f64>,
    pub bins: usize,
    pub pooled_bins: usize,
    pub degenerate: bool,
    pub threshold: f64,
    pub passed: bool,
}

/// Pearson chi-square of `observed` counts against probabilities `probs`
/// (which should sum to one). Bins with expected count below
/// [`MIN_EXPECTED`] are merged into one pooled bin, in input order; if that
/// bin is still too small it is merged into the smallest remaining bin.
pub fn chi_square(observed: &[u64], probs: &[f64]) -> ChiSquare {
    assert_eq!(observed.len(), probs.len(), "one probability per bin");
    let total: u64 = observed.iter().sum();
    let n = total as f64;
    let mut kept: Vec<(f64, f64)> = Vec::new();
    let mut pooled = (0.0, 0.0);
    let mut pooled_bins = 0;
    for (&o, &p) in observed.iter().zip(probs) {
        let e = p * n;
        if e < MIN_EXPECTED {
            pooled.0 += o as f64;
            pooled.1 += e;
            pooled_bins += 1;
        } else {
            kept.push((o as f64, e));
        }
    }
    if pooled_bins > 0 && (pooled.0 > 0.0 || pooled.1 > 0.0) {
        if pooled.1 >= MIN_EXPECTED || kept.is_empty() {
            kept.push(pooled);
        } else {
            let smallest = (0..kept.len())
                .min_by(|&a, &b| kept[a].1.total_cmp(&kept[b].1))
                .expect("non-empty");
            kept[smallest].0 += pooled.0;
            kept[smallest].1 += pooled.1;
        }
    }
    let bins = kept.len();
    let statistic: f64 = kept
        .iter()
        .map(|&(o, e)| {
            if e > 0.0 {
                (o - e) * (o - e) / e
            } else if o > 0.0 {
                f64::INFINITY
            } else {
                0.0
            }
        })
        .sum();
    let degenerate = bins < 2;
    let dof = bins.saturating_sub(1);
    let p_value = (!degenerate).then(|| {
        if statistic.is_finite() {
            ChiSquared::new(dof as f64).expect("positive dof").sf(statistic)
        } else {
            0.0
        }
    });
    ChiSquare {
        statistic,
        dof,
        p_value,
        bins,
        pooled_bins,
        degenerate,
        threshold: P_THRESHOLD,
        passed: p_value.is_some_and(|p| p > P_THRESHOLD),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinomialCheck {
    pub successes: u64,
    pub trials: u64,
    pub empirical: f64,
    pub expected: f64,
    pub std_error: f64,
    pub z: f64,
    pub threshold_sigma: f64,
    pub passed: bool,
}

/// Empirical frequency against an exact probability, `3σ` band.
pub fn binomial_check(successes: u64, trials: u64, expected: f64) -> BinomialCheck {
    let empirical = if trials == 0 {
        0.0
    } else {
        successes as f64 / trials as f64
    };
    let std_error = (expected * (1.0 - expected) / trials.max(1) as f64).sqrt();
    let diff = empirical - expected;
    let z = if std_error > 0.0 {
        diff / std_error
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    BinomialCheck {
        successes,
        trials,
        empirical,
        expected,
        std_error,
        z,
        threshold_sigma: SIGMA_THRESHOLD,
        passed: z.abs() <= SIGMA_THRESHOLD,
    }
}

/// Two independent binomial samples agree within `3σ` of their difference.
pub fn two_sample_check(a: (u64, u64), b: (u64, u64)) -> BinomialCheck {
    let pa = a.0 as f64 / a.1.max(1) as f64;
    let pb = b.0 as f64 / b.1.max(1) as f64;
    let pooled = (a.0 + b.0) as f64 / (a.1 + b.1).max(1) as f64;
    let se = (pooled * (1.0 - pooled) * (1.0 / a.1.max(1) as f64 + 1.0 / b.1.max(1) as f64)).sqrt();
    let diff = pa - pb;
    let z = if se > 0.0 {
        diff / se
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    BinomialCheck {
        successes: a.0,
        trials: a.1,
        empirical: pa,
        expected: pb,
        std_error: se,
        z,
        threshold_sigma: SIGMA_THRESHOLD,
        passed: z.abs() <= SIGMA_THRESHOLD,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_fit_has_p_one() {
        let c = chi_square(&[25, 25, 25, 25], &[0.25; 4]);
        assert_eq!(c.statistic, 0.0);
        assert_eq!(c.dof, 3);
        assert!((c.p_value.unwrap() - 1.0).abs() < 1e-12);
        assert!(c.passed);
    }

    #[test]
    fn known_statistic() {
        // (10-20)^2/20 + (30-20)^2/20 = 10, dof 1, p = 0.001565...
        let c = chi_square(&[10, 30], &[0.5, 0.5]);
        assert!((c.statistic - 10.0).abs() < 1e-12);
        assert!((c.p_value.unwrap() - 0.001_565_402_6).abs() < 1e-8);
    }

    #[test]
    fn small_bins_are_pooled() {
        // Expected counts 48, 48, 2, 2 -> the last two pool to 4 < 5 and go
        // into a main bin.
        let c = chi_square(&[50, 46, 3, 1], &[0.48, 0.48, 0.02, 0.02]);
        assert_eq!(c.bins, 2);
        assert_eq!(c.pooled_bins, 2);
        let c = chi_square(&[40, 40, 10, 10], &[0.4, 0.4, 0.03, 0.17]);
        assert_eq!(c.bins, 3);
        assert_eq!(c.pooled_bins, 1);
    }

    #[test]
    fn single_bin_is_degenerate() {
        let c = chi_square(&[100], &[1.0]);
        assert!(c.degenerate);
        assert_eq!(c.p_value, None);
        assert!(!c.passed);
    }

    #[test]
    fn binomial_band() {
        assert!(binomial_check(500, 1000, 0.5).passed);
        assert!(!binomial_check(600, 1000, 0.5).passed);
        assert!(binomial_check(0, 10, 0.0).passed);
        assert!(two_sample_check((50, 100), (520, 1000)).passed);
    }
}
