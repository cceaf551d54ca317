//! Aggregated regime report.

use serde::{Deserialize, Serialize};

use super::domain::{classify_domain, DomainClassification};
use super::limits::{limit_shares, smon_lower_bound, LimitShares, LimitVerdict, SmonBound};
use super::tmon::{tmon_bounds, TmonBounds};
use crate::error::Result;
use crate::feedback::{classify, FeedbackSpec, RegimeClass, TriState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentReport {
    pub family: String,
    pub params: Vec<f64>,
    pub expression: String,
    pub regime: RegimeClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum JointVerdict {
    StrongMonopoly,
    WeakMonopolyRandomWinner,
    WeakMonopolyDeterministicWinner(usize),
    RandomDirichlet,
    DeterministicShares,
    Oscillating,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub chi0: Vec<f64>,
    pub n: u64,
    /// Total-monopoly bounds for every explosive agent.
    pub tmon: Vec<TmonBounds>,
    /// Strong-monopoly lower bound at `eps = d_min / 2`, when applicable.
    pub smon: Option<SmonBound>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub agents: Vec<AgentReport>,
    pub joint_verdict: JointVerdict,
    pub limit_shares: LimitShares,
    pub domains: Option<DomainClassification>,
    pub bounds: Option<BoundsReport>,
}

fn joint(l: &LimitShares) -> JointVerdict {
    match &l.verdict {
        LimitVerdict::StrongMonopoly => JointVerdict::StrongMonopoly,
        LimitVerdict::WeakMonopolyRandomWinner => JointVerdict::WeakMonopolyRandomWinner,
        LimitVerdict::RandomDirichlet => JointVerdict::RandomDirichlet,
        LimitVerdict::Oscillating => JointVerdict::Oscillating,
        LimitVerdict::Unknown => JointVerdict::Unknown,
        LimitVerdict::Deterministic(v) => match v.iter().position(|x| *x == 1.0) {
            Some(i) => JointVerdict::WeakMonopolyDeterministicWinner(i),
            None => JointVerdict::DeterministicShares,
        },
    }
}

/// Per-agent regimes, the joint verdict and, given initial shares and a
/// market size, attraction domains and monopoly bounds.
pub fn regime_report(feedbacks: &[FeedbackSpec], at: Option<(&[f64], u64)>) -> Result<RegimeReport> {
    let mut agents = Vec::with_capacity(feedbacks.len());
    for f in feedbacks {
        agents.push(AgentReport {
            family: f.family_name().to_string(),
            params: f.params(),
            expression: f.expression(),
            regime: classify(f)?,
        });
    }
    let limit = limit_shares(feedbacks);
    let (domains, bounds) = match at {
        None => (None, None),
        Some((chi0, n)) => {
            let d = classify_domain(feedbacks, chi0)?;
            let mut tmon = Vec::new();
            for (i, a) in agents.iter().enumerate() {
                if a.regime.monopoly == TriState::Holds {
                    if let Ok(b) = tmon_bounds(feedbacks, chi0, n, i) {
                        tmon.push(b);
                    }
                }
            }
            let smon = smon_lower_bound(feedbacks, chi0, n, f64::MIN_POSITIVE)
                .ok()
                .and_then(|probe| {
                    let dmin = probe.d.iter().cloned().fold(f64::INFINITY, f64::min);
                    smon_lower_bound(feedbacks, chi0, n, 0.5 * dmin).ok()
                });
            let bounds = BoundsReport {
                chi0: chi0.to_vec(),
                n,
                tmon,
                smon,
            };
            (Some(d), Some(bounds))
        }
    };
    Ok(RegimeReport {
        agents,
        joint_verdict: joint(&limit),
        limit_shares: limit,
        domains,
        bounds,
    })
}
