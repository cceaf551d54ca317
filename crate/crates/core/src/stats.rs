//! Estimators and goodness-of-fit tests.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Result, UrnError};

pub const Z95: f64 = 1.959_963_984_540_054;

/// Frequency estimate of an event probability with a Wilson 95% interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub estimate: f64,
    pub successes: u64,
    pub replicas: u64,
    pub interval: (f64, f64),
    pub discarded_ties: u64,
    pub seed: u64,
}

impl MonteCarloEstimate {
    pub fn from_counts(successes: u64, replicas: u64, discarded_ties: u64, seed: u64) -> Self {
        let estimate = if replicas == 0 {
            0.0
        } else {
            successes as f64 / replicas as f64
        };
        MonteCarloEstimate {
            estimate,
            successes,
            replicas,
            interval: wilson_interval(successes, replicas, Z95),
            discarded_ties,
            seed,
        }
    }

    /// A probability known exactly.
    pub fn exact(p: f64, seed: u64) -> Self {
        MonteCarloEstimate {
            estimate: p,
            successes: 0,
            replicas: 0,
            interval: (p, p),
            discarded_ties: 0,
            seed,
        }
    }

    pub fn contains(&self, p: f64) -> bool {
        self.interval.0 <= p && p <= self.interval.1
    }
}

pub fn wilson_interval(successes: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0).min(p), (center + half).min(1.0).max(p))
}

/// Survival function of the Kolmogorov distribution.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=200 {
        let k = k as f64;
        let term = (-2.0 * k * k * lambda * lambda).exp();
        sum += if k as u64 % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// One-sample Kolmogorov-Smirnov test; returns `(D, p)`.
pub fn ks_test(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<(f64, f64)> {
    if samples.len() < 50 {
        return Err(UrnError::InsufficientSamples {
            got: samples.len(),
            need: 50,
        });
    }
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, x) in xs.iter().enumerate() {
        let f = cdf(*x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    let sn = n.sqrt();
    let p = kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d);
    Ok((d, p))
}

/// Pearson goodness-of-fit of `observed` counts against probabilities.
/// Returns `(statistic, degrees of freedom, p)`.
pub fn chi_square_gof(observed: &[u64], probs: &[f64]) -> Result<(f64, usize, f64)> {
    if observed.len() != probs.len() || observed.len() < 2 {
        return Err(UrnError::Config("chi-square needs matching bins (>= 2)".into()));
    }
    let n: u64 = observed.iter().sum();
    let n = n as f64;
    let mut stat = 0.0;
    let mut bins = 0usize;
    for (o, p) in observed.iter().zip(probs) {
        let e = n * p;
        if e <= 0.0 {
            if *o > 0 {
                return Ok((f64::INFINITY, observed.len() - 1, 0.0));
            }
            continue;
        }
        stat += (*o as f64 - e).powi(2) / e;
        bins += 1;
    }
    let df = bins.saturating_sub(1).max(1);
    Ok((stat, df, chi_square_sf(stat, df)))
}

/// Pearson test of homogeneity between two count vectors over the same bins.
pub fn chi_square_two_sample(a: &[u64], b: &[u64]) -> Result<(f64, usize, f64)> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(UrnError::Config("two-sample chi-square needs matching bins".into()));
    }
    let na: u64 = a.iter().sum();
    let nb: u64 = b.iter().sum();
    let (na, nb) = (na as f64, nb as f64);
    let mut stat = 0.0;
    let mut bins = 0usize;
    for (x, y) in a.iter().zip(b) {
        let tot = (*x + *y) as f64;
        if tot == 0.0 {
            continue;
        }
        let ea = tot * na / (na + nb);
        let eb = tot * nb / (na + nb);
        stat += (*x as f64 - ea).powi(2) / ea + (*y as f64 - eb).powi(2) / eb;
        bins += 1;
    }
    let df = bins.saturating_sub(1).max(1);
    Ok((stat, df, chi_square_sf(stat, df)))
}

pub fn chi_square_sf(stat: f64, df: usize) -> f64 {
    if !stat.is_finite() {
        return 0.0;
    }
    let dist = ChiSquared::new(df as f64).expect("df >= 1");
    dist.sf(stat)
}

/// Mean and unbiased sample variance.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn wilson_contains_point_and_stays_in_unit_interval() {
        for (s, n) in [(0u64, 10u64), (10, 10), (5, 10), (1, 1000)] {
            let (lo, hi) = wilson_interval(s, n, Z95);
            let p = s as f64 / n as f64;
            assert!(0.0 <= lo && lo <= p && p <= hi && hi <= 1.0);
        }
        let (lo, hi) = wilson_interval(50, 100, Z95);
        assert!((lo - 0.4038).abs() < 1e-3 && (hi - 0.5962).abs() < 1e-3);
    }

    #[test]
    fn kolmogorov_reference_values() {
        // Q_KS(1.36) ~ 0.049, Q_KS(1.63) ~ 0.010.
        assert!((kolmogorov_sf(1.36) - 0.0494).abs() < 1e-3);
        assert!((kolmogorov_sf(1.63) - 0.0098).abs() < 1e-3);
    }

    #[test]
    fn ks_uniform_calibration() {
        let mut rng = crate::rng::rng_from(3);
        let xs: Vec<f64> = (0..1000).map(|_| rng.random::<f64>()).collect();
        let (_, p) = ks_test(&xs, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!(p > 0.01);
        let (_, p) = ks_test(&xs, |x| x.clamp(0.0, 1.0).powi(2)).unwrap();
        assert!(p < 1e-6);
        assert!(ks_test(&xs[..10], |x| x).is_err());
    }

    #[test]
    fn chi_square_reference() {
        let (s, df, p) = chi_square_gof(&[50, 50], &[0.5, 0.5]).unwrap();
        assert_eq!((s, df), (0.0, 1));
        assert!((p - 1.0).abs() < 1e-12);
        assert!((chi_square_sf(3.841_458_820_694_124, 1) - 0.05).abs() < 1e-9);
        let (_, _, p) = chi_square_two_sample(&[30, 70], &[70, 30]).unwrap();
        assert!(p < 1e-6);
    }
}
