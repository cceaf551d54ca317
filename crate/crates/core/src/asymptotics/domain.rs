//! Attraction domains of strong monopoly.
//!
//! For explosive agents the winner as `N -> inf` is the one whose explosion
//! time `T_i(chi_i N)` is smallest. Type P times concentrate at their mean
//! `S_i(x) = sum_{k>=x} 1/F_i(k)`; type E times stay random on the scale
//! `1/F_i(x)`. Agent `i` beats `j` when the log ratio of these scales tends
//! to `-inf`, or, for two type P agents, to a negative constant.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::expansion::{self, compare, Cmp, Expansion, TIE_TOL};
use crate::error::Result;
use crate::feedback::{classify, Family, FeedbackSpec, PeType, TriState};
use crate::urn::check_open_simplex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DomainVerdict {
    InDomain,
    /// Ties with the other boundary agents; no deterministic winner.
    Boundary,
    /// Explosive but beaten by another agent at this share vector.
    Outside,
    /// Fails condition (M): never a strong monopolist.
    EmptyDomain,
    Indeterminate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DomainMethod {
    TypeERatio,
    TypePTailRatio,
    NumericLimit,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DomainOutcome {
    Agent(usize),
    Boundary,
    NoExplosiveAgent,
    Indeterminate,
}

/// Share ratio `chi_i / chi_j` at which agents `i` and `j` tie.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Threshold {
    Ratio(f64),
    /// Agent `i` loses at every finite ratio.
    Infinite,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainClassification {
    pub verdicts: Vec<DomainVerdict>,
    /// `thresholds[i][j]`; agent `i` wins the pair above the ratio.
    pub thresholds: Vec<Vec<Threshold>>,
    pub method: DomainMethod,
    pub outcome: DomainOutcome,
}

impl DomainClassification {
    pub fn in_domain(&self) -> Option<usize> {
        match self.outcome {
            DomainOutcome::Agent(i) => Some(i),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Pair {
    First,
    Second,
    Tie,
    Unknown,
}

struct Agent<'a> {
    spec: &'a FeedbackSpec,
    type_e: bool,
    key: Option<Expansion>,
}

impl Agent<'_> {
    fn new(spec: &FeedbackSpec, pe: PeType) -> Agent<'_> {
        let type_e = pe == PeType::TypeE;
        let key = if type_e {
            expansion::ln_f(spec).map(|e| e.neg())
        } else {
            expansion::ln_tail(spec)
        };
        Agent { spec, type_e, key }
    }
}

fn symbolic(a: &Agent, xa: f64, b: &Agent, xb: f64) -> Option<Pair> {
    let ka = a.key.as_ref()?.scaled(xa);
    let kb = b.key.as_ref()?.scaled(xb);
    Some(match compare(&ka, &kb) {
        Cmp::Diverges(Ordering::Less) => Pair::First,
        Cmp::Diverges(_) => Pair::Second,
        Cmp::Finite(d) => {
            if a.type_e || b.type_e || d == 0.0 {
                Pair::Tie
            } else if d < 0.0 {
                Pair::First
            } else {
                Pair::Second
            }
        }
    })
}

/// Log scale of the explosion time at `x`: `ln S(x)` for type P and
/// `-ln F(x)` for type E.
fn numeric_key(a: &Agent, x: f64) -> Result<f64> {
    if a.type_e {
        return Ok(-a.spec.ln_f(x));
    }
    let start = x.round().max(1.0) as u64;
    let t = super::tmon::tail_within(a.spec, start, 1, 0.0)?;
    Ok(t.value().map_or(f64::NAN, f64::ln))
}

/// Follows `D(N) = key_a(xa N) - key_b(xb N)` along `N = 2^j`.
fn numeric(a: &Agent, xa: f64, b: &Agent, xb: f64) -> Pair {
    let mut d = Vec::new();
    for j in 10..=40 {
        let n = (j as f64).exp2();
        match (numeric_key(a, xa * n), numeric_key(b, xb * n)) {
            (Ok(u), Ok(v)) if (u - v).is_finite() => d.push(u - v),
            _ => return Pair::Unknown,
        }
    }
    let tail = &d[d.len() - 8..];
    let last = tail[7];
    let same_sign = tail.iter().all(|v| v.signum() == last.signum());
    let growing = tail.windows(2).all(|w| w[1].abs() > w[0].abs());
    if same_sign && growing && last.abs() > 1.0 {
        return if last < 0.0 { Pair::First } else { Pair::Second };
    }
    let recent = &tail[4..];
    let hi = recent.iter().cloned().fold(f64::MIN, f64::max);
    let lo = recent.iter().cloned().fold(f64::MAX, f64::min);
    let spread = hi - lo;
    if spread <= 1e-7 * last.abs().max(1.0) {
        if a.type_e || b.type_e || last.abs() <= TIE_TOL.max(10.0 * spread) {
            Pair::Tie
        } else if last < 0.0 {
            Pair::First
        } else {
            Pair::Second
        }
    } else {
        Pair::Unknown
    }
}

fn pair(a: &Agent, xa: f64, b: &Agent, xb: f64) -> Pair {
    symbolic(a, xa, b, xb).unwrap_or_else(|| numeric(a, xa, b, xb))
}

fn threshold(a: &Agent, b: &Agent) -> Threshold {
    match (&a.spec.family, &b.spec.family) {
        (Family::Polynomial { alpha: ai, beta: bi }, Family::Polynomial { alpha: aj, beta: bj }) if bi == bj => {
            return Threshold::Ratio((aj / ai).powf(1.0 / (bi - 1.0)));
        }
        (Family::Exponential { beta: bi, .. }, Family::Exponential { beta: bj, .. }) => {
            return Threshold::Ratio(bj / bi);
        }
        (
            Family::StretchedExp { beta: bi, gamma: gi, .. },
            Family::StretchedExp { beta: bj, gamma: gj, .. },
        ) if gi == gj => return Threshold::Ratio((bj / bi).powf(1.0 / gi)),
        _ => {}
    }
    if a.key.is_none() || b.key.is_none() {
        return Threshold::Unknown;
    }
    let small = pair(a, 1e-6, b, 1.0);
    let large = pair(a, 1e6, b, 1.0);
    match (small, large) {
        (Pair::First, Pair::First) => Threshold::Ratio(0.0),
        (Pair::Second, Pair::Second) => Threshold::Infinite,
        _ => Threshold::Unknown,
    }
}

/// Which agent, if any, wins with probability tending to 1 as `N -> inf`
/// from initial shares `chi0`.
pub fn classify_domain(feedbacks: &[FeedbackSpec], chi0: &[f64]) -> Result<DomainClassification> {
    if feedbacks.len() != chi0.len() {
        return Err(crate::error::UrnError::Config("shares must match agents".into()));
    }
    check_open_simplex(chi0)?;
    let a = feedbacks.len();
    let mut verdicts = vec![DomainVerdict::EmptyDomain; a];
    let mut thresholds = vec![vec![Threshold::Unknown; a]; a];
    let mut agents: Vec<Option<Agent>> = Vec::with_capacity(a);
    let mut undecided = false;
    for (i, f) in feedbacks.iter().enumerate() {
        let c = classify(f)?;
        match c.monopoly {
            TriState::Holds => agents.push(Some(Agent::new(f, c.pe_type))),
            TriState::Fails => agents.push(None),
            TriState::Indeterminate => {
                verdicts[i] = DomainVerdict::Indeterminate;
                undecided = true;
                agents.push(None);
            }
        }
    }
    let explosive: Vec<usize> = (0..a).filter(|i| agents[*i].is_some()).collect();
    let method = if explosive.is_empty() {
        DomainMethod::None
    } else if explosive.iter().any(|i| agents[*i].as_ref().unwrap().key.is_none()) {
        DomainMethod::NumericLimit
    } else if explosive.iter().any(|i| agents[*i].as_ref().unwrap().type_e) {
        DomainMethod::TypeERatio
    } else {
        DomainMethod::TypePTailRatio
    };
    if explosive.is_empty() {
        let outcome = if undecided {
            DomainOutcome::Indeterminate
        } else {
            DomainOutcome::NoExplosiveAgent
        };
        return Ok(DomainClassification {
            verdicts,
            thresholds,
            method,
            outcome,
        });
    }
    let mut beaten = vec![false; a];
    let mut unknown = false;
    for (n, &i) in explosive.iter().enumerate() {
        for &j in &explosive[n + 1..] {
            let (ai, aj) = (agents[i].as_ref().unwrap(), agents[j].as_ref().unwrap());
            thresholds[i][j] = threshold(ai, aj);
            thresholds[j][i] = match thresholds[i][j] {
                Threshold::Ratio(r) if r == 0.0 => Threshold::Infinite,
                Threshold::Ratio(r) => Threshold::Ratio(1.0 / r),
                Threshold::Infinite => Threshold::Ratio(0.0),
                Threshold::Unknown => Threshold::Unknown,
            };
            match pair(ai, chi0[i], aj, chi0[j]) {
                Pair::First => beaten[j] = true,
                Pair::Second => beaten[i] = true,
                Pair::Tie => {}
                Pair::Unknown => unknown = true,
            }
        }
    }
    let top: Vec<usize> = explosive.iter().cloned().filter(|i| !beaten[*i]).collect();
    for &i in &explosive {
        verdicts[i] = DomainVerdict::Outside;
    }
    let outcome = if unknown || undecided {
        for &i in &top {
            verdicts[i] = DomainVerdict::Indeterminate;
        }
        DomainOutcome::Indeterminate
    } else if top.len() == 1 {
        verdicts[top[0]] = DomainVerdict::InDomain;
        DomainOutcome::Agent(top[0])
    } else {
        for &i in &top {
            verdicts[i] = DomainVerdict::Boundary;
        }
        DomainOutcome::Boundary
    };
    Ok(DomainClassification {
        verdicts,
        thresholds,
        method,
        outcome,
    })
}
