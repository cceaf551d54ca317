//! Cumulant generating function of `U = sum_{k>=x0} (tau(k) - 1/F(k))`.

use serde::{Deserialize, Serialize};

use super::tmon::tail_within;
use crate::error::{Result, UrnError};
use crate::feedback::{tail_sum, FeedbackSpec, TailSum};

const RADIUS_SCAN: u64 = 1 << 16;
const MAX_ORDER: u32 = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CgfReport {
    pub x0: u64,
    /// `min_{k>=x0} F(k)` over the probed range.
    pub radius: f64,
    /// `(l, (l-1)! sum_{k>=x0} F(k)^(-l))` for `l = 2..=L`.
    pub cumulants: Vec<(u32, f64)>,
    /// `(lambda, ln E e^{lambda U})`.
    pub evaluation: Vec<(f64, f64)>,
}

fn radius(spec: &FeedbackSpec, x0: u64) -> f64 {
    let near = (x0..x0 + RADIUS_SCAN).map(|k| spec.ln_f(k as f64));
    let far = (17..=62).map(|j| spec.ln_f((x0 + (1u64 << j)) as f64));
    near.chain(far).fold(f64::INFINITY, f64::min).exp()
}

/// Cumulants and CGF values of the centred explosion-time fluctuation
/// `U` for feedback with `sum 1/F = inf` and `sum 1/F^2 < inf`.
pub fn cgf_u(spec: &FeedbackSpec, x0: u64, lambdas: &[f64], l_max: u32) -> Result<CgfReport> {
    if x0 == 0 || l_max < 2 {
        return Err(UrnError::Config("need x0 >= 1 and L >= 2".into()));
    }
    let first = tail_sum(spec, x0, 1, 1.0)?;
    let second = tail_sum(spec, x0, 2, f64::MAX)?;
    if first != TailSum::Divergent || !second.is_finite() {
        return Err(UrnError::AssumptionViolated(format!(
            "'{}' does not have divergent 1/F and summable 1/F^2",
            spec.label
        )));
    }
    let r = radius(spec, x0);
    for l in lambdas {
        if l.abs() >= r {
            return Err(UrnError::RadiusExceeded { lambda: *l, radius: r });
        }
    }
    let mut sums: Vec<f64> = Vec::new();
    let mut moment = |l: u32| -> Result<f64> {
        while sums.len() < l as usize - 1 {
            let p = sums.len() as u32 + 2;
            sums.push(tail_within(spec, x0, p, 0.0)?.value().unwrap_or(f64::NAN));
        }
        Ok(sums[l as usize - 2])
    };
    let mut cumulants = Vec::with_capacity(l_max as usize - 1);
    let mut factorial = 1.0f64;
    for l in 2..=l_max {
        factorial *= (l - 1) as f64;
        cumulants.push((l, factorial * moment(l)?));
    }
    let mut evaluation = Vec::with_capacity(lambdas.len());
    for &lam in lambdas {
        let mut sum = 0.0;
        let mut l = 2;
        loop {
            let term = lam.powi(l as i32) * moment(l)? / l as f64;
            sum += term;
            if term.abs() <= 1e-15 * sum.abs() || term == 0.0 {
                break;
            }
            l += 1;
            if l > MAX_ORDER {
                return Err(UrnError::ToleranceUnreachable(format!(
                    "CGF series at lambda = {lam} did not converge"
                )));
            }
        }
        evaluation.push((lam, sum));
    }
    Ok(CgfReport {
        x0,
        radius: r,
        cumulants,
        evaluation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::KahanSum;

    #[test]
    fn second_cumulant_is_variance_sum() {
        let f = FeedbackSpec::log_linear(1.0, 1.0).unwrap();
        let r = cgf_u(&f, 2, &[0.0, 0.5], 4).unwrap();
        let s2 = tail_within(&f, 2, 2, 0.0).unwrap().value().unwrap();
        assert_eq!(r.cumulants[0], (2, s2));
        assert!(r.cumulants.iter().all(|(_, v)| *v > 0.0));
        assert_eq!(r.evaluation[0].1, 0.0);
        assert!((r.radius - 2.0 * 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn cgf_matches_exponential_closed_form() {
        // ln E e^{l(tau - m)} = -l m - ln(1 - l m), summed directly.
        let f = FeedbackSpec::log_linear(1.0, 1.0).unwrap();
        let lam = 0.5;
        let r = cgf_u(&f, 2, &[lam], 2).unwrap();
        let mut direct = KahanSum::new();
        for k in 2..20_000_000u64 {
            let m = (-f.ln_f(k as f64)).exp();
            direct.add(-lam * m - (-lam * m).ln_1p());
        }
        let tail = 0.5 * lam * lam * tail_within(&f, 20_000_000, 2, 0.0).unwrap().value().unwrap();
        let exact = direct.value() + tail;
        assert!((r.evaluation[0].1 - exact).abs() < 1e-9, "{} {exact}", r.evaluation[0].1);
    }

    #[test]
    fn centred_and_flat_at_zero() {
        let f = FeedbackSpec::polynomial(1.0, 1.0).unwrap();
        let h = 1e-4;
        let r = cgf_u(&f, 3, &[-h, h], 2).unwrap();
        let slope = (r.evaluation[1].1 - r.evaluation[0].1) / (2.0 * h);
        assert!(slope.abs() < 1e-6);
    }

    #[test]
    fn preconditions() {
        let f = FeedbackSpec::polynomial(1.0, 2.0).unwrap();
        assert!(matches!(cgf_u(&f, 1, &[0.1], 3), Err(UrnError::AssumptionViolated(_))));
        let f = FeedbackSpec::polynomial(1.0, 0.5).unwrap();
        assert!(matches!(cgf_u(&f, 1, &[0.1], 3), Err(UrnError::AssumptionViolated(_))));
        let f = FeedbackSpec::polynomial(1.0, 1.0).unwrap();
        assert!(matches!(cgf_u(&f, 2, &[2.0], 3), Err(UrnError::RadiusExceeded { .. })));
    }
}
