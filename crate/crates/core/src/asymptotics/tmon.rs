//! Total monopoly: the probability that one agent wins every step.

use serde::{Deserialize, Serialize};

use crate::error::{Result, UrnError};
use crate::feedback::{monopoly_condition, tail_sum, FeedbackSpec, TailSum, TriState};
use crate::numeric::{log_add_exp, KahanSum};
use crate::urn::shares_from_initial;

/// Factors with `F_i > 1e12 W` equal 1 in double precision.
const FACTOR_CUTOFF: f64 = 1e12;
const SCAN_CAP: u64 = 10_000_000;
const FIRST_K: u64 = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TmonBounds {
    pub agent: usize,
    pub counts: Vec<u64>,
    pub lower: f64,
    pub upper: f64,
    pub c_n: f64,
    /// `(value, error bound)` of the infinite product.
    pub exact: Option<(f64, f64)>,
}

fn check(feedbacks: &[FeedbackSpec], counts: &[u64], agent: usize) -> Result<()> {
    if feedbacks.len() < 2 || feedbacks.len() != counts.len() || counts.contains(&0) {
        return Err(UrnError::Config("need >= 2 agents with matching counts >= 1".into()));
    }
    if agent >= feedbacks.len() {
        return Err(UrnError::Config(format!("agent {} out of range", agent + 1)));
    }
    if monopoly_condition(&feedbacks[agent]) != TriState::Holds {
        return Err(UrnError::NotExplosive { agent });
    }
    Ok(())
}

/// `ln W` with `W = sum_{j != i} F_j(X_j)`.
fn ln_competition(feedbacks: &[FeedbackSpec], counts: &[u64], agent: usize) -> f64 {
    (0..feedbacks.len())
        .filter(|j| *j != agent)
        .map(|j| feedbacks[j].ln_f(counts[j] as f64))
        .fold(f64::NEG_INFINITY, log_add_exp)
}

/// Tail sum to absolute error `abs_tol`, but never finer than a relative
/// `1e-12` of its value.
pub(crate) fn tail_within(f: &FeedbackSpec, start: u64, power: u32, abs_tol: f64) -> Result<TailSum> {
    let rough = tail_sum(f, start, power, f64::MAX)?;
    let floor = 1e-12 * rough.value().unwrap_or(0.0);
    tail_sum(f, start, power, abs_tol.max(floor).max(f64::MIN_POSITIVE))
}

/// Lower and upper bounds of `P(tMon_i)` from initial shares `chi0` and
/// market size `n`, plus the exact value to within `1e-6` when reachable.
pub fn tmon_bounds(feedbacks: &[FeedbackSpec], chi0: &[f64], n: u64, agent: usize) -> Result<TmonBounds> {
    let counts = shares_from_initial(chi0, n)?;
    tmon_bounds_from_counts(feedbacks, &counts, agent)
}

pub fn tmon_bounds_from_counts(feedbacks: &[FeedbackSpec], counts: &[u64], agent: usize) -> Result<TmonBounds> {
    check(feedbacks, counts, agent)?;
    let f = &feedbacks[agent];
    let x = counts[agent];
    let ln_w = ln_competition(feedbacks, counts, agent);
    let s = tail_within(f, x, 1, 0.0)?;
    let lower = (-(ln_w + s.upper().ln()).exp()).exp();
    // c_N = 1 / (1 + W / min_k F_i(X_i + k)).
    let stop = ln_w + FACTOR_CUTOFF.ln();
    let mut min_ln_f = f64::INFINITY;
    let mut k = 0u64;
    // Explosive built-in families are increasing: the infimum is at k = 0.
    let increasing = !f.is_custom();
    loop {
        let lf = f.ln_f((x + k) as f64);
        min_ln_f = min_ln_f.min(lf);
        if increasing || lf > stop {
            break;
        }
        k += 1;
        if k > SCAN_CAP {
            return Err(UrnError::ToleranceUnreachable(format!(
                "c_N scan of '{}' did not settle within {SCAN_CAP} terms",
                f.label
            )));
        }
    }
    let c_n = 1.0 / (1.0 + (ln_w - min_ln_f).exp());
    let upper = (-c_n * (ln_w + s.lower().ln()).exp()).exp();
    let exact = exact_tmon_probability(feedbacks, counts, agent, 1e-6).ok();
    Ok(TmonBounds {
        agent,
        counts: counts.to_vec(),
        lower,
        upper,
        c_n,
        exact,
    })
}

/// `prod_k F_i(X_i+k) / (F_i(X_i+k) + W)` with a certified error `<= tol`.
///
/// The first `K` log factors are summed directly. The rest lie between
/// `W R1 - W^2 R2 / 2` and `W R1` with `Rp = sum_{k>=K} F_i(X_i+k)^(-p)`,
/// and `K` doubles until that bracket is narrow enough.
pub fn exact_tmon_probability(feedbacks: &[FeedbackSpec], counts: &[u64], agent: usize, tol: f64) -> Result<(f64, f64)> {
    check(feedbacks, counts, agent)?;
    if !(tol > 0.0) {
        return Err(UrnError::Config("tol must be > 0".into()));
    }
    let f = &feedbacks[agent];
    let x = counts[agent];
    let ln_w = ln_competition(feedbacks, counts, agent);
    let w = ln_w.exp();
    let mut head = KahanSum::new();
    let mut done = 0u64;
    let mut k_end = FIRST_K;
    while k_end <= SCAN_CAP {
        for k in done..k_end {
            head.add((ln_w - f.ln_f((x + k) as f64)).exp().ln_1p());
        }
        done = k_end;
        let start = x + k_end;
        let r1 = tail_within(f, start, 1, 0.1 * tol / w)?;
        let r2 = tail_within(f, start, 2, 0.1 * tol / (w * w))?;
        let t_hi = w * r1.upper();
        let t_lo = (w * r1.lower() - 0.5 * w * w * r2.upper()).max(0.0);
        let h = head.value();
        let rounding = 4.0 * f64::EPSILON * (h + done as f64 * f64::EPSILON);
        let hi = (-(h + t_lo) + rounding).exp();
        let lo = (-(h + t_hi) - rounding).exp();
        if hi - lo <= 2.0 * tol {
            return Ok((0.5 * (hi + lo), 0.5 * (hi - lo)));
        }
        k_end *= 2;
    }
    Err(UrnError::ToleranceUnreachable(format!(
        "total monopoly product of '{}' needs more than {SCAN_CAP} factors",
        f.label
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{E, PI};

    fn specs(s: FeedbackSpec, a: usize) -> Vec<FeedbackSpec> {
        vec![s; a]
    }

    #[test]
    fn exponential_bounds_at_six_four_four() {
        let f = specs(FeedbackSpec::exponential(1.0, 1.0).unwrap(), 3);
        let b = tmon_bounds(&f, &[6.0 / 14.0, 4.0 / 14.0, 4.0 / 14.0], 14, 0).unwrap();
        assert_eq!(b.counts, vec![6, 4, 4]);
        let lower = (-2.0 / (E * (E - 1.0))).exp();
        assert!((b.lower - lower).abs() < 1e-10);
        assert!((b.lower - 0.652).abs() < 5e-4);
        assert!((b.upper - 0.714).abs() < 5e-4);
        assert!((b.c_n - 1.0 / (1.0 + 2.0 * (-2f64).exp())).abs() < 1e-12);
        let (v, err) = b.exact.unwrap();
        assert!(err <= 1e-6);
        assert!(b.lower <= v && v <= b.upper);
        assert!((v - 0.676).abs() < 5e-4);
    }

    #[test]
    fn exact_product_agrees_with_direct_resummation() {
        // Independent oracle: plain product over 2000 factors; the rest are
        // 1 to double precision for F = e^k.
        let f = specs(FeedbackSpec::exponential(1.0, 1.0).unwrap(), 3);
        let w = 2.0 * 4f64.exp();
        let direct: f64 = (0..40).map(|k| {
            let fi = ((6 + k) as f64).exp();
            fi / (fi + w)
        }).product();
        let (v, err) = exact_tmon_probability(&f, &[6, 4, 4], 0, 1e-10).unwrap();
        assert!((v - direct).abs() <= err + 1e-12, "{v} {direct}");
    }

    #[test]
    fn square_feedback_lower_bound_is_basel() {
        let f = specs(FeedbackSpec::polynomial(1.0, 2.0).unwrap(), 2);
        let b = tmon_bounds_from_counts(&f, &[1, 1], 0).unwrap();
        assert!((b.lower - (-PI * PI / 6.0).exp()).abs() < 1e-9);
        assert!((b.lower - 0.19304).abs() < 5e-5);
        assert!((b.c_n - 0.5).abs() < 1e-15);
        let (v, _) = b.exact.unwrap();
        assert!(v < b.upper && v > b.lower);
        let b = tmon_bounds_from_counts(&f, &[10, 1], 0).unwrap();
        let (v, _) = b.exact.unwrap();
        assert!(b.lower < v && v < b.upper);
    }

    #[test]
    fn sublinear_agent_is_rejected() {
        let f = specs(FeedbackSpec::polynomial(1.0, 0.5).unwrap(), 2);
        assert!(matches!(
            tmon_bounds_from_counts(&f, &[1, 1], 0),
            Err(UrnError::NotExplosive { agent: 0 })
        ));
    }
}
