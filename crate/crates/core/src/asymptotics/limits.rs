//! Long-time shares without strong monopoly, and bounds on the rate of
//! strong monopoly.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::domain::{classify_domain, DomainOutcome};
use super::expansion::{self, compare, Cmp};
use super::tmon::tail_within;
use crate::error::{Result, UrnError};
use crate::feedback::{a_inverse_continuum, classify, Family, FeedbackSpec, GrowthClass, PeType, TriState};
use crate::urn::shares_from_initial;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LimitVerdict {
    Deterministic(Vec<f64>),
    RandomDirichlet,
    WeakMonopolyRandomWinner,
    StrongMonopoly,
    Oscillating,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitShares {
    pub verdict: LimitVerdict,
    pub rate_note: Option<String>,
}

impl LimitShares {
    fn new(verdict: LimitVerdict, note: Option<&str>) -> Self {
        LimitShares {
            verdict,
            rate_note: note.map(str::to_string),
        }
    }
}

/// Growth rank of `a^{-1}(t)`; larger ranks dominate.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Rank {
    /// `alpha e^{-beta k}`, `a^{-1}(t) ~ ln(t) / beta`.
    ExpDecreasing { beta: f64 },
    /// `a^{-1}(t) ~ w t^q` (`sub = 0`) or `w t ln t` (`q = 1`, `sub = 1`).
    Power { q: f64, sub: u8, w: f64 },
    /// `a^{-1}(t) = exp((c t)^e)` with `e < 1`.
    StretchedGrowth { e: f64, c: f64 },
    Linear { c: f64 },
    /// Superlinear without (M): `k log(k+1)^beta`, `0 < beta <= 1`.
    NearLinear { beta: f64, alpha: f64 },
}

impl Rank {
    fn class(&self) -> u8 {
        match self {
            Rank::ExpDecreasing { .. } => 0,
            Rank::Power { .. } => 1,
            Rank::StretchedGrowth { .. } => 2,
            Rank::Linear { .. } => 3,
            Rank::NearLinear { .. } => 4,
        }
    }

    /// Order by asymptotic dominance, ignoring the weight-like parameters.
    fn order(&self, o: &Rank) -> Ordering {
        let by_class = self.class().cmp(&o.class());
        if by_class != Ordering::Equal {
            return by_class;
        }
        match (self, o) {
            (Rank::Power { q: a, sub: s, .. }, Rank::Power { q: b, sub: t, .. }) => a.total_cmp(b).then(s.cmp(t)),
            (Rank::StretchedGrowth { e: a, c: x }, Rank::StretchedGrowth { e: b, c: y }) => {
                a.total_cmp(b).then(x.total_cmp(y))
            }
            (Rank::Linear { c: a }, Rank::Linear { c: b }) => a.total_cmp(b),
            (Rank::NearLinear { beta: a, alpha: x }, Rank::NearLinear { beta: b, alpha: y }) => {
                a.total_cmp(b).then(x.total_cmp(y))
            }
            _ => Ordering::Equal,
        }
    }

    fn weight(&self) -> f64 {
        match self {
            Rank::ExpDecreasing { beta } => 1.0 / beta,
            Rank::Power { w, .. } => *w,
            _ => 1.0,
        }
    }
}

fn rank(spec: &FeedbackSpec) -> Option<Rank> {
    let r = match spec.family {
        Family::Polynomial { alpha, beta } if beta == 1.0 => Rank::Linear { c: alpha },
        Family::Polynomial { alpha, beta } if beta < 1.0 => {
            let q = 1.0 / (1.0 - beta);
            Rank::Power { q, sub: 0, w: alpha.powf(q) }
        }
        Family::Constant { alpha } | Family::Exponential { alpha, beta: 0.0 } => Rank::Power { q: 1.0, sub: 0, w: alpha },
        Family::Exponential { beta, .. } if beta < 0.0 => Rank::ExpDecreasing { beta: -beta },
        Family::Log { alpha } => Rank::Power { q: 1.0, sub: 1, w: alpha },
        Family::LogLinear { alpha, beta } if beta < 0.0 => {
            let e = 1.0 / (1.0 - beta);
            Rank::StretchedGrowth {
                e,
                c: (alpha * (1.0 - beta)).powf(e),
            }
        }
        Family::LogLinear { alpha, beta } if beta == 0.0 => Rank::Linear { c: alpha },
        Family::LogLinear { alpha, beta } if beta <= 1.0 => Rank::NearLinear { beta, alpha },
        _ => return None,
    };
    Some(r)
}

/// Long-time behaviour of the shares for the given feedbacks.
pub fn limit_shares(feedbacks: &[FeedbackSpec]) -> LimitShares {
    let mut classes = Vec::with_capacity(feedbacks.len());
    for f in feedbacks {
        match classify(f) {
            Ok(c) => classes.push(c),
            Err(_) => return LimitShares::new(LimitVerdict::Unknown, Some("classification failed")),
        }
    }
    if classes.iter().any(|c| c.monopoly == TriState::Holds) {
        return LimitShares::new(
            LimitVerdict::StrongMonopoly,
            Some("an agent with summable 1/F wins all but finitely many steps"),
        );
    }
    if classes.iter().any(|c| c.monopoly == TriState::Indeterminate) {
        return LimitShares::new(LimitVerdict::Unknown, Some("condition (M) undecided"));
    }
    if feedbacks.iter().any(FeedbackSpec::is_custom) {
        return custom_limit(feedbacks, &classes);
    }
    let ranks: Vec<Rank> = match feedbacks.iter().map(rank).collect::<Option<Vec<_>>>() {
        Some(r) => r,
        None => return LimitShares::new(LimitVerdict::Unknown, None),
    };
    let top = (0..ranks.len())
        .max_by(|a, b| ranks[*a].order(&ranks[*b]))
        .unwrap();
    let group: Vec<usize> = (0..ranks.len())
        .filter(|i| ranks[*i].order(&ranks[top]) == Ordering::Equal)
        .collect();
    let a = feedbacks.len();
    let unit = |i: usize| {
        let mut v = vec![0.0; a];
        v[i] = 1.0;
        v
    };
    match ranks[top] {
        Rank::NearLinear { .. } if group.len() > 1 => LimitShares::new(
            LimitVerdict::WeakMonopolyRandomWinner,
            Some("one agent's share tends to 1; the winner is random"),
        ),
        Rank::Linear { .. } if group.len() > 1 => {
            let note = if group.len() == a {
                "Dirichlet with parameter X(0)/c when F(k) = c k"
            } else {
                "random shares among the fastest linear agents"
            };
            LimitShares::new(LimitVerdict::RandomDirichlet, Some(note))
        }
        Rank::NearLinear { .. } | Rank::Linear { .. } => LimitShares::new(
            LimitVerdict::Deterministic(unit(top)),
            Some("the agent with the fastest growth takes the whole market"),
        ),
        _ => {
            let total: f64 = group.iter().map(|i| ranks[*i].weight()).sum();
            let mut v = vec![0.0; a];
            for i in &group {
                v[*i] = ranks[*i].weight() / total;
            }
            LimitShares::new(LimitVerdict::Deterministic(v), None)
        }
    }
}

fn custom_limit(feedbacks: &[FeedbackSpec], classes: &[crate::feedback::RegimeClass]) -> LimitShares {
    let mut linear = Vec::new();
    for (i, c) in classes.iter().enumerate() {
        match c.growth {
            GrowthClass::Superlinear => {
                return LimitShares::new(LimitVerdict::Unknown, Some("superlinear feedback without (M)"));
            }
            GrowthClass::Indeterminate => return LimitShares::new(LimitVerdict::Unknown, None),
            GrowthClass::LinearWithConstant(k) => linear.push((i, k)),
            GrowthClass::SublinearToZero => {}
        }
    }
    if !linear.is_empty() {
        let best = linear.iter().map(|(_, k)| *k).fold(f64::MIN, f64::max);
        let top: Vec<usize> = linear
            .iter()
            .filter(|(_, k)| *k >= best * (1.0 - 1e-2))
            .map(|(i, _)| *i)
            .collect();
        if top.len() > 1 {
            return LimitShares::new(LimitVerdict::RandomDirichlet, Some("linear feedback with a common slope"));
        }
        let mut v = vec![0.0; feedbacks.len()];
        v[top[0]] = 1.0;
        return LimitShares::new(LimitVerdict::Deterministic(v), None);
    }
    let inverses: Vec<Box<dyn Fn(f64) -> Result<f64> + '_>> = feedbacks
        .iter()
        .map(|f| Box::new(move |t: f64| a_inverse_continuum(f, t, 1.0)) as Box<dyn Fn(f64) -> Result<f64>>)
        .collect();
    limit_shares_from_inverses(&inverses)
}

/// Spread threshold for declaring a numeric limit stable.
const STABLE: f64 = 1e-3;
/// Half-doublings per window: eight doublings.
const WINDOW: usize = 16;

/// Numeric limit of `a_i^{-1}(t) / sum_j a_j^{-1}(t)` sampled at
/// `t = 2^(m/2)`. Stable over the last eight doublings gives
/// `Deterministic`; a spread that does not shrink from the previous window
/// gives `Oscillating`.
pub fn limit_shares_from_inverses(inverses: &[Box<dyn Fn(f64) -> Result<f64> + '_>]) -> LimitShares {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for m in 0..=240 {
        let t = (m as f64 / 2.0).exp2();
        let vals: Option<Vec<f64>> = inverses.iter().map(|g| g(t).ok().filter(|v| v.is_finite())).collect();
        let Some(vals) = vals else { break };
        let s: f64 = vals.iter().sum();
        if !(s > 0.0) || !s.is_finite() {
            break;
        }
        rows.push(vals.iter().map(|v| v / s).collect());
    }
    if rows.len() < 2 * WINDOW {
        return LimitShares::new(LimitVerdict::Unknown, Some("too few finite probes"));
    }
    let spread = |w: &[Vec<f64>]| -> f64 {
        (0..inverses.len())
            .map(|i| {
                let hi = w.iter().map(|r| r[i]).fold(f64::MIN, f64::max);
                let lo = w.iter().map(|r| r[i]).fold(f64::MAX, f64::min);
                hi - lo
            })
            .fold(0.0, f64::max)
    };
    let n = rows.len();
    let last = spread(&rows[n - WINDOW..]);
    let prev = spread(&rows[n - 2 * WINDOW..n - WINDOW]);
    if last < STABLE {
        LimitShares::new(LimitVerdict::Deterministic(rows[n - 1].clone()), Some("numeric limit of a^-1 ratios"))
    } else if last >= 0.5 * prev {
        LimitShares::new(LimitVerdict::Oscillating, Some("a^-1 ratios keep oscillating on a log-time scale"))
    } else {
        LimitShares::new(LimitVerdict::Unknown, Some("a^-1 ratios converge too slowly to certify"))
    }
}

/// Limit shares for exponentially decreasing feedback `alpha_i e^{-beta_i k}`:
/// proportional to `1/beta_i` and independent of `alpha`.
pub fn exp_decreasing_limit(betas: &[f64]) -> Result<Vec<f64>> {
    if betas.len() < 2 || betas.iter().any(|b| !(*b > 0.0) || !b.is_finite()) {
        return Err(UrnError::Config("need >= 2 positive finite decay rates".into()));
    }
    let total: f64 = betas.iter().map(|b| 1.0 / b).sum();
    Ok(betas.iter().map(|b| 1.0 / b / total).collect())
}

/// `e^{-c L(n)}` with `L(x) = F(x)/x`, for non-decreasing `L` without (M).
pub fn share_floor(spec: &FeedbackSpec, c: f64, n: f64) -> Result<f64> {
    if !(c > 0.0) || !(n >= 1.0) {
        return Err(UrnError::Config("need c > 0 and n >= 1".into()));
    }
    if crate::feedback::monopoly_condition(spec) != TriState::Fails {
        return Err(UrnError::AssumptionViolated(format!("'{}' may satisfy (M)", spec.label)));
    }
    let l = |x: f64| (spec.ln_f(x) - x.ln()).exp();
    let probes: Vec<f64> = (1..=64).map(f64::from).chain((7..=40).map(|j| (j as f64).exp2())).collect();
    for w in probes.windows(2) {
        if l(w[1]) < l(w[0]) * (1.0 - 1e-12) {
            return Err(UrnError::AssumptionViolated(format!(
                "F(x)/x of '{}' decreases between {} and {}",
                spec.label, w[0], w[1]
            )));
        }
    }
    Ok((-c * l(n)).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmonBound {
    pub agent: usize,
    pub counts: Vec<u64>,
    /// `d_j = g(lim S_i / S_j)` with `d_i = min_{j != i} d_j`.
    pub d: Vec<f64>,
    pub eps: f64,
    pub bound: f64,
}

/// `1 - sum_j exp(-(d_j - eps) sqrt(F_j(X_j) S_j(X_j)))`, clamped to `[0, 1]`.
/// The bound holds for large enough `N`; the threshold is not certified.
pub fn smon_lower_bound(feedbacks: &[FeedbackSpec], chi0: &[f64], n: u64, eps: f64) -> Result<SmonBound> {
    for f in feedbacks {
        let c = classify(f)?;
        if f.is_custom() || c.monopoly != TriState::Holds || c.pe_type != PeType::TypeP {
            return Err(UrnError::AssumptionViolated(format!(
                "'{}' is not a built-in monotone type P feedback",
                f.label
            )));
        }
    }
    let domain = classify_domain(feedbacks, chi0)?;
    let i = match domain.outcome {
        DomainOutcome::Agent(i) => i,
        o => return Err(UrnError::AssumptionViolated(format!("initial shares are not inside a domain: {o:?}"))),
    };
    let counts = shares_from_initial(chi0, n)?;
    let ki = expansion::ln_tail(&feedbacks[i]).unwrap().scaled(chi0[i]);
    let g = |x: f64| (1.0 - x) / (1.0 + x);
    let mut d = vec![0.0; feedbacks.len()];
    for j in 0..feedbacks.len() {
        if j == i {
            continue;
        }
        let kj = expansion::ln_tail(&feedbacks[j]).unwrap().scaled(chi0[j]);
        d[j] = match compare(&ki, &kj) {
            Cmp::Diverges(Ordering::Less) => 1.0,
            Cmp::Finite(v) if v < 0.0 => g(v.exp()),
            _ => unreachable!("agent {i} is in its domain"),
        };
    }
    d[i] = (0..d.len()).filter(|j| *j != i).map(|j| d[j]).fold(f64::INFINITY, f64::min);
    let dmin = d.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(eps > 0.0 && eps < dmin) {
        return Err(UrnError::AssumptionViolated(format!("eps = {eps} is not in (0, {dmin})")));
    }
    let mut miss = 0.0;
    for (j, f) in feedbacks.iter().enumerate() {
        let x = counts[j];
        let s = tail_within(f, x, 1, 0.0)?.value().unwrap_or(f64::INFINITY);
        let scale = (f.ln_f(x as f64) + s.ln()).exp().sqrt();
        miss += (-(d[j] - eps) * scale).exp();
    }
    Ok(SmonBound {
        agent: i,
        counts,
        d,
        eps,
        bound: (1.0 - miss).clamp(0.0, 1.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feedback::parse_feedback;

    fn det(l: &LimitShares) -> Vec<f64> {
        match &l.verdict {
            LimitVerdict::Deterministic(v) => v.clone(),
            v => panic!("{v:?}"),
        }
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn sublinear_power_weights() {
        let f = vec![
            FeedbackSpec::polynomial(1.0, 0.5).unwrap(),
            FeedbackSpec::polynomial(2.0, 0.5).unwrap(),
        ];
        assert!(close(&det(&limit_shares(&f)), &[0.2, 0.8], 1e-15));
    }

    #[test]
    fn log_feedback_weights_are_fitness() {
        let f = vec![FeedbackSpec::log(1.0).unwrap(), FeedbackSpec::log(3.0).unwrap()];
        assert!(close(&det(&limit_shares(&f)), &[0.25, 0.75], 1e-15));
    }

    #[test]
    fn linear_is_dirichlet_and_faster_growth_wins() {
        let f = vec![FeedbackSpec::polynomial(1.0, 1.0).unwrap(); 3];
        assert_eq!(limit_shares(&f).verdict, LimitVerdict::RandomDirichlet);
        let f = vec![
            FeedbackSpec::polynomial(1.0, 0.9).unwrap(),
            FeedbackSpec::log(5.0).unwrap(),
            FeedbackSpec::polynomial(1.0, 0.5).unwrap(),
        ];
        assert_eq!(det(&limit_shares(&f)), vec![1.0, 0.0, 0.0]);
        let f = vec![FeedbackSpec::polynomial(1.0, 1.0).unwrap(), FeedbackSpec::polynomial(2.0, 1.0).unwrap()];
        assert_eq!(det(&limit_shares(&f)), vec![0.0, 1.0]);
    }

    #[test]
    fn near_linear_and_explosive_regimes() {
        let f = vec![FeedbackSpec::log_linear(1.0, 0.5).unwrap(); 2];
        assert_eq!(limit_shares(&f).verdict, LimitVerdict::WeakMonopolyRandomWinner);
        let f = vec![FeedbackSpec::log_linear(1.0, 2.0).unwrap(); 2];
        assert_eq!(limit_shares(&f).verdict, LimitVerdict::StrongMonopoly);
        let f = vec![FeedbackSpec::log_linear(1.0, -1.0).unwrap(); 4];
        assert!(close(&det(&limit_shares(&f)), &[0.25; 4], 1e-15));
    }

    #[test]
    fn exponentially_decreasing_shares() {
        assert_eq!(exp_decreasing_limit(&[1.0, 1.0]).unwrap(), vec![0.5, 0.5]);
        assert_eq!(exp_decreasing_limit(&[1.0, 3.0]).unwrap(), vec![0.75, 0.25]);
        assert!(exp_decreasing_limit(&[1.0, 0.0]).is_err());
        let f = vec![
            FeedbackSpec::exponential(7.0, -1.0).unwrap(),
            FeedbackSpec::exponential(0.1, -3.0).unwrap(),
        ];
        assert!(close(&det(&limit_shares(&f)), &[0.75, 0.25], 1e-15));
    }

    #[test]
    fn permuting_agents_permutes_shares() {
        let f = vec![
            FeedbackSpec::polynomial(1.0, 0.5).unwrap(),
            FeedbackSpec::polynomial(2.0, 0.5).unwrap(),
            FeedbackSpec::polynomial(3.0, 0.5).unwrap(),
        ];
        let a = det(&limit_shares(&f));
        let g = vec![f[2].clone(), f[0].clone(), f[1].clone()];
        let b = det(&limit_shares(&g));
        assert!(close(&[a[2], a[0], a[1]], &b, 1e-15));
    }

    #[test]
    fn oscillating_inverse_is_detected() {
        let g: Vec<Box<dyn Fn(f64) -> Result<f64>>> = vec![
            Box::new(|t: f64| Ok(t * t * (t.ln().sin() + 2.0))),
            Box::new(|t: f64| Ok(t * t)),
        ];
        assert_eq!(limit_shares_from_inverses(&g).verdict, LimitVerdict::Oscillating);
        let g: Vec<Box<dyn Fn(f64) -> Result<f64>>> = vec![Box::new(|t: f64| Ok(t * t)), Box::new(|t: f64| Ok(3.0 * t * t))];
        assert!(close(&det(&limit_shares_from_inverses(&g)), &[0.25, 0.75], 1e-12));
    }

    #[test]
    fn custom_sublinear_uses_numeric_inverses() {
        let f = vec![parse_feedback("sqrt(k)").unwrap(), parse_feedback("2*sqrt(k)").unwrap()];
        let v = det(&limit_shares(&f));
        assert!(close(&v, &[0.2, 0.8], 1e-3), "{v:?}");
        let f = vec![parse_feedback("k+1").unwrap(), parse_feedback("k").unwrap()];
        assert_eq!(limit_shares(&f).verdict, LimitVerdict::RandomDirichlet);
    }

    #[test]
    fn share_floor_cases() {
        let f = FeedbackSpec::log_linear(1.0, 1.0).unwrap();
        let n = std::f64::consts::E.exp();
        let v = share_floor(&f, 1.0, n).unwrap();
        assert!((v - 1.0 / (1.0 + n)).abs() < 1e-12);
        let f = FeedbackSpec::polynomial(2.0, 1.0).unwrap();
        assert!((share_floor(&f, 0.5, 10.0).unwrap() - (-1f64).exp()).abs() < 1e-15);
        let f = FeedbackSpec::polynomial(1.0, 2.0).unwrap();
        assert!(matches!(share_floor(&f, 1.0, 10.0), Err(UrnError::AssumptionViolated(_))));
        let f = FeedbackSpec::constant(1.0).unwrap();
        assert!(matches!(share_floor(&f, 1.0, 10.0), Err(UrnError::AssumptionViolated(_))));
    }

    #[test]
    fn smon_bound_examples() {
        let f = vec![FeedbackSpec::polynomial(1.0, 2.0).unwrap(); 2];
        let b = smon_lower_bound(&f, &[0.7, 0.3], 10_000, 0.01).unwrap();
        assert_eq!(b.agent, 0);
        assert!((b.d[1] - 0.4).abs() < 1e-12);
        assert!(b.bound >= 0.99);
        assert_eq!(smon_lower_bound(&f, &[0.7, 0.3], 4, 0.01).unwrap().bound, 0.0);
        assert!(matches!(
            smon_lower_bound(&f, &[0.5, 0.5], 100, 0.01),
            Err(UrnError::AssumptionViolated(_))
        ));
        assert!(matches!(
            smon_lower_bound(&f, &[0.7, 0.3], 100, 0.5),
            Err(UrnError::AssumptionViolated(_))
        ));
    }
}
