//! The time change `a(t) = int_{x0}^{x0+t} dx / F(x)`.
//!
//! Step mode integrates the step function `x -> F(floor(x))`, which is what
//! the exponential embedding sees. Continuum mode integrates the smooth
//! extension and is used for asymptotic share limits.

use super::tail::converges;
use super::{tail_sum, Family, FeedbackSpec};
use crate::error::{Result, UrnError};
use crate::numeric::{integrate, KahanSum};

const DIRECT_TERMS: u64 = 1 << 22;

fn check_args(t: f64, what: &str) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(UrnError::Config(format!("{what} must be finite and >= 0")));
    }
    Ok(())
}

fn recip(spec: &FeedbackSpec, x: f64) -> f64 {
    (-spec.ln_f(x)).exp()
}

/// `sum_{k=a}^{b-1} 1/F(k)`, exact summation for moderate ranges and
/// Euler-Maclaurin with the continuum integral beyond.
fn step_sum(spec: &FeedbackSpec, a: u64, b: u64) -> f64 {
    let mut acc = KahanSum::new();
    let direct_end = b.min(a.saturating_add(DIRECT_TERMS));
    for k in a..direct_end {
        acc.add(recip(spec, k as f64));
    }
    if direct_end < b {
        let lo = direct_end as f64;
        let hi = (b - 1) as f64;
        let f = |x: f64| recip(spec, x);
        let d = |x: f64| {
            let h = 1e-3 * x;
            (f(x + h) - f(x - h)) / (2.0 * h)
        };
        acc.add(continuum_integral(spec, lo, hi));
        acc.add(0.5 * (f(lo) + f(hi)));
        acc.add((d(hi) - d(lo)) / 12.0);
    }
    acc.value()
}

/// `int_lo^hi dx / F(x)` of the smooth extension.
fn continuum_integral(spec: &FeedbackSpec, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    match spec.family {
        Family::Polynomial { alpha, beta } => {
            if beta == 1.0 {
                (hi / lo).ln() / alpha
            } else {
                let e = 1.0 - beta;
                (hi.powf(e) - lo.powf(e)) / (alpha * e)
            }
        }
        Family::Exponential { alpha, beta } if beta != 0.0 => {
            // (e^{-b lo} - e^{-b hi}) / (a b), written to avoid cancellation.
            let base = (-beta * lo).exp() / (alpha * beta);
            -base * (-beta * (hi - lo)).exp_m1()
        }
        Family::Exponential { alpha, .. } | Family::Constant { alpha } => (hi - lo) / alpha,
        _ => {
            let g = |u: f64| spec.ln_integrand_at_log(u, 1.0).exp();
            integrate(g, lo.ln(), hi.ln(), 1e-300, 1e-14).0
        }
    }
}

/// Step-mode `a(t) = int_{x0}^{x0+t} dx / F(floor(x))`.
pub fn a_transform(spec: &FeedbackSpec, t: f64, x0: u64) -> Result<f64> {
    check_args(t, "t")?;
    if x0 == 0 {
        return Err(UrnError::Config("x0 must be >= 1".into()));
    }
    let m = t.floor();
    if m >= 9.0e18 {
        return Err(UrnError::OutOfRange(format!("t = {t} is too large")));
    }
    let m = m as u64;
    let frac = t - m as f64;
    let mut v = step_sum(spec, x0, x0 + m);
    if frac > 0.0 {
        v += frac * recip(spec, (x0 + m) as f64);
    }
    Ok(v)
}

/// Continuum-mode `a(t) = int_{x0}^{x0+t} dx / F(x)`.
pub fn a_transform_continuum(spec: &FeedbackSpec, t: f64, x0: f64) -> Result<f64> {
    check_args(t, "t")?;
    if !(x0 > 0.0) {
        return Err(UrnError::Config("x0 must be > 0".into()));
    }
    Ok(continuum_integral(spec, x0, x0 + t))
}

/// Inverse of the step-mode transform.
pub fn a_inverse(spec: &FeedbackSpec, y: f64, x0: u64) -> Result<f64> {
    check_args(y, "y")?;
    if x0 == 0 {
        return Err(UrnError::Config("x0 must be >= 1".into()));
    }
    if converges(spec, 1) == Some(true) {
        let total = tail_sum(spec, x0, 1, 1e-12 * y.max(1.0))?;
        if y >= total.lower() {
            return Err(UrnError::OutOfRange(format!(
                "y = {y} is not below a(inf) = {}",
                total.value().unwrap_or(f64::NAN)
            )));
        }
    }
    // a is piecewise linear with slope 1/F(x0+m) on [m, m+1].
    let mut acc = KahanSum::new();
    let mut m = 0u64;
    while m < DIRECT_TERMS {
        let r = recip(spec, (x0 + m) as f64);
        let s = acc.value();
        if s + r > y {
            return Ok(m as f64 + (y - s) / r);
        }
        acc.add(r);
        m += 1;
    }
    let mut hi = 2.0 * m as f64;
    while a_transform(spec, hi, x0)? < y {
        hi *= 2.0;
        if hi > 1e18 {
            return Err(UrnError::OutOfRange(format!("a^-1({y}) exceeds 1e18")));
        }
    }
    bisect(|t| a_transform(spec, t, x0), y, m as f64, hi)
}

/// Inverse of the continuum transform.
pub fn a_inverse_continuum(spec: &FeedbackSpec, y: f64, x0: f64) -> Result<f64> {
    check_args(y, "y")?;
    if !(x0 > 0.0) {
        return Err(UrnError::Config("x0 must be > 0".into()));
    }
    let out_of_range = || UrnError::OutOfRange(format!("y = {y} is not below a(inf)"));
    match spec.family {
        Family::Polynomial { alpha, beta } => {
            if beta == 1.0 {
                return Ok(x0 * (alpha * y).exp_m1());
            }
            let e = 1.0 - beta;
            let base = x0.powf(e) + alpha * e * y;
            if base <= 0.0 {
                return Err(out_of_range());
            }
            Ok(base.powf(1.0 / e) - x0)
        }
        Family::Exponential { alpha, beta } if beta != 0.0 => {
            // e^{-b (x0+t)} = e^{-b x0} (1 - a b y e^{b x0})
            let z = alpha * beta * y * (beta * x0).exp();
            if z >= 1.0 {
                return Err(out_of_range());
            }
            Ok(-(-z).ln_1p() / beta)
        }
        Family::Exponential { alpha, .. } | Family::Constant { alpha } => Ok(alpha * y),
        _ => {
            let mut hi = 1.0;
            while continuum_integral(spec, x0, x0 + hi) < y {
                hi *= 2.0;
                if hi > 1e300 {
                    return Err(out_of_range());
                }
            }
            bisect(|t| Ok(continuum_integral(spec, x0, x0 + t)), y, 0.0, hi)
        }
    }
}

fn bisect(f: impl Fn(f64) -> Result<f64>, y: f64, mut lo: f64, mut hi: f64) -> Result<f64> {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid)? < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feedback::parse_feedback;
    use std::f64::consts::E;

    #[test]
    fn step_transform_examples() {
        let f = FeedbackSpec::polynomial(1.0, 2.0).unwrap();
        assert!((a_transform(&f, 2.0, 1).unwrap() - 1.25).abs() < 1e-15);
        assert!((a_transform(&f, 0.5, 1).unwrap() - 0.5).abs() < 1e-15);
        let f = FeedbackSpec::exponential(1.0, 1.0).unwrap();
        assert!((a_transform(&f, 1.0, 1).unwrap() - 1.0 / E).abs() < 1e-15);
        assert_eq!(a_transform(&f, 0.0, 3).unwrap(), 0.0);
    }

    #[test]
    fn step_inverse_round_trip() {
        for s in ["k^2", "sqrt(k)", "k", "log(k+1)", "k+1"] {
            let f = parse_feedback(s).unwrap();
            for t in [0.1, 1.0, 10.0, 100.0, 1234.5] {
                let y = a_transform(&f, t, 2).unwrap();
                let back = a_inverse(&f, y, 2).unwrap();
                assert!((back - t).abs() < 1e-9 * t.max(1.0), "{s} {t} {back}");
                let again = a_transform(&f, back, 2).unwrap();
                assert!((again - y).abs() <= 1e-12 * y.max(1.0));
            }
        }
    }

    #[test]
    fn step_inverse_beyond_explosion() {
        let f = FeedbackSpec::polynomial(1.0, 2.0).unwrap();
        assert!(matches!(a_inverse(&f, 2.0, 1), Err(UrnError::OutOfRange(_))));
    }

    #[test]
    fn continuum_closed_forms() {
        // x0 = 1 gives the familiar (alpha (1-beta) y + 1)^(1/(1-beta)).
        let f = FeedbackSpec::polynomial(2.0, 0.5).unwrap();
        let t = a_inverse_continuum(&f, 3.0, 1.0).unwrap();
        assert!((1.0 + t - (2.0 * 0.5 * 3.0 + 1.0f64).powf(2.0)).abs() < 1e-12);
        for s in ["sqrt(k)", "k", "exp(-k)", "k*log(k+1)^0.5", "log(k+1)", "k^2"] {
            let f = parse_feedback(s).unwrap();
            for t in [0.1, 1.0, 10.0, 100.0] {
                let y = a_transform_continuum(&f, t, 1.0).unwrap();
                let back = a_inverse_continuum(&f, y, 1.0).unwrap();
                let again = a_transform_continuum(&f, back, 1.0).unwrap();
                assert!((again - y).abs() <= 1e-12 * y.max(1.0), "{s} {t}");
            }
        }
    }

    #[test]
    fn euler_maclaurin_branch_matches_direct() {
        let f = FeedbackSpec::polynomial(1.0, 0.5).unwrap();
        let n = DIRECT_TERMS * 2;
        let mut direct = KahanSum::new();
        for k in 1..1 + n {
            direct.add(1.0 / (k as f64).sqrt());
        }
        let v = a_transform(&f, n as f64, 1).unwrap();
        assert!((v - direct.value()).abs() < 1e-9 * v, "{v} {}", direct.value());
    }
}
