//! Explosion times `T(x0) = sum_{k>=x0} tau(k)` and the strong-monopoly
//! estimator based on comparing them.

use rand::{Rng, RngCore};
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::UrnConfig;
use crate::error::{Result, UrnError};
use crate::feedback::{monopoly_condition, tail_sum, FeedbackSpec, TriState};
use crate::numeric::KahanSum;
use crate::rng::{child_rng, UrnRng};
use crate::stats::MonteCarloEstimate;

const MAX_SPAN: u64 = 1 << 27;
const FIRST_STAGE: usize = 64;
/// Separation, in tail standard deviations, at which a comparison is final.
const MARGIN: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExplosionSample {
    pub agent: usize,
    pub value: f64,
    pub guaranteed_error: f64,
    pub truncation_k: u64,
}

/// Precomputed holding-time means `1/F(k)` for `k = x0..=K`.
#[derive(Debug, Clone)]
pub struct ExplosionPlan {
    pub x0: u64,
    pub truncation_k: u64,
    means: Vec<f64>,
    /// `suffix_mean[j] = sum_{m>=j} means[m]`, same for squares.
    suffix_mean: Vec<f64>,
    suffix_var: Vec<f64>,
    /// Mean and variance of the neglected tail beyond `K`.
    pub tail_mean: f64,
    pub tail_var: f64,
}

impl ExplosionPlan {
    pub fn new(spec: &FeedbackSpec, x0: u64, tol: f64) -> Result<Self> {
        Self::for_agent(spec, x0, tol, 0)
    }

    fn for_agent(spec: &FeedbackSpec, x0: u64, tol: f64, agent: usize) -> Result<Self> {
        if !(tol > 0.0) {
            return Err(UrnError::Config("tol must be > 0".into()));
        }
        if x0 == 0 {
            return Err(UrnError::Config("x0 must be >= 1".into()));
        }
        if monopoly_condition(spec) != TriState::Holds {
            return Err(UrnError::NotExplosive { agent });
        }
        let mut span = 16u64;
        let (k, tail) = loop {
            let k = x0 + span - 1;
            let t = tail_sum(spec, k + 1, 1, tol * 1e-3)?;
            if t.upper() <= tol {
                break (k, t.value().unwrap_or(t.upper()));
            }
            span *= 2;
            if span > MAX_SPAN {
                return Err(UrnError::ToleranceUnreachable(format!(
                    "explosion tail of '{}' stays above {tol} beyond k = {k}",
                    spec.label
                )));
            }
        };
        let tail_var = tail_sum(spec, k + 1, 2, (tol * tol).max(1e-300))?
            .value()
            .unwrap_or(tail * tail);
        let means: Vec<f64> = (x0..=k).map(|j| (-spec.ln_f(j as f64)).exp()).collect();
        let n = means.len();
        let mut suffix_mean = vec![0.0; n + 1];
        let mut suffix_var = vec![0.0; n + 1];
        for j in (0..n).rev() {
            suffix_mean[j] = suffix_mean[j + 1] + means[j];
            suffix_var[j] = suffix_var[j + 1] + means[j] * means[j];
        }
        Ok(ExplosionPlan {
            x0,
            truncation_k: k,
            means,
            suffix_mean,
            suffix_var,
            tail_mean: tail,
            tail_var,
        })
    }

    /// `sum_{k=x0}^{K} tau(k)`.
    pub fn sample(&self, rng: &mut UrnRng) -> f64 {
        let mut acc = KahanSum::new();
        for m in &self.means {
            let e: f64 = rng.sample(Exp1);
            acc.add(e * m);
        }
        acc.value()
    }

    fn len(&self) -> usize {
        self.means.len()
    }
}

/// One draw of the truncated explosion time.
pub fn sample_explosion_time(spec: &FeedbackSpec, x0: u64, rng: &mut UrnRng, tol: f64) -> Result<ExplosionSample> {
    let plan = ExplosionPlan::new(spec, x0, tol)?;
    Ok(ExplosionSample {
        agent: 0,
        value: plan.sample(rng),
        guaranteed_error: plan.tail_mean,
        truncation_k: plan.truncation_k,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmonEstimate {
    /// `P(sMon_i)` per agent; exactly 0 for agents failing (M).
    pub per_agent: Vec<MonteCarloEstimate>,
    pub explosive: Vec<bool>,
    pub discarded_ties: u64,
    pub replicas: u64,
    pub seed: u64,
}

struct Partial {
    sum: KahanSum,
    pos: usize,
}

/// Estimates `P(T_i < T_j for all j != i)` over explosive agents.
///
/// Each replica samples the explosion times in stages. A comparison is
/// settled early once the leader's completed time (partial sum plus the mean
/// of the unsampled terms) is separated from every other agent's by more
/// than a wide multiple of the unsampled standard deviations; otherwise the
/// sums are extended up to the truncation where the neglected mean is below
/// `tol`, and the completed times are compared. Exact ties are discarded.
pub fn smon_estimate(config: &UrnConfig, replicas: u64, rng: &mut UrnRng, tol: f64) -> Result<SmonEstimate> {
    config.validate()?;
    let seed = rng.next_u64();
    let mut plans: Vec<Option<ExplosionPlan>> = Vec::with_capacity(config.agents());
    for (i, f) in config.feedbacks.iter().enumerate() {
        match ExplosionPlan::for_agent(f, config.initial_counts[i], tol, i) {
            Ok(p) => plans.push(Some(p)),
            Err(UrnError::NotExplosive { .. }) => plans.push(None),
            Err(e) => return Err(e),
        }
    }
    let active: Vec<usize> = (0..plans.len()).filter(|i| plans[*i].is_some()).collect();
    if active.is_empty() {
        return Err(UrnError::NotExplosive { agent: 0 });
    }
    let plans: Vec<&ExplosionPlan> = active.iter().map(|i| plans[*i].as_ref().unwrap()).collect();
    let outcomes: Vec<Option<usize>> = (0..replicas)
        .into_par_iter()
        .map(|r| race(&plans, &mut child_rng(seed, r)))
        .collect();
    let mut wins = vec![0u64; config.agents()];
    let mut ties = 0u64;
    for o in outcomes {
        match o {
            Some(w) => wins[active[w]] += 1,
            None => ties += 1,
        }
    }
    let kept = replicas - ties;
    let per_agent = (0..config.agents())
        .map(|i| {
            if active.contains(&i) {
                MonteCarloEstimate::from_counts(wins[i], kept, ties, seed)
            } else {
                MonteCarloEstimate::exact(0.0, seed)
            }
        })
        .collect();
    Ok(SmonEstimate {
        per_agent,
        explosive: (0..config.agents()).map(|i| active.contains(&i)).collect(),
        discarded_ties: ties,
        replicas,
        seed,
    })
}

fn race(plans: &[&ExplosionPlan], rng: &mut UrnRng) -> Option<usize> {
    if plans.len() == 1 {
        return Some(0);
    }
    let mut parts: Vec<Partial> = plans
        .iter()
        .map(|_| Partial {
            sum: KahanSum::new(),
            pos: 0,
        })
        .collect();
    let mut stage = FIRST_STAGE;
    loop {
        for (p, plan) in parts.iter_mut().zip(plans) {
            let end = stage.min(plan.len());
            for m in &plan.means[p.pos..end] {
                let e: f64 = rng.sample(Exp1);
                p.sum.add(e * m);
            }
            p.pos = end;
        }
        let done = parts.iter().zip(plans).all(|(p, plan)| p.pos == plan.len());
        let stats: Vec<(f64, f64)> = parts
            .iter()
            .zip(plans)
            .map(|(p, plan)| {
                let mean = plan.suffix_mean[p.pos] + plan.tail_mean;
                let sd = (plan.suffix_var[p.pos] + plan.tail_var).sqrt();
                (p.sum.value() + mean, sd)
            })
            .collect();
        let lead = (0..stats.len())
            .min_by(|a, b| stats[*a].0.total_cmp(&stats[*b].0))
            .unwrap();
        if done {
            let tied = (0..stats.len()).any(|j| j != lead && stats[j].0 == stats[lead].0);
            return if tied { None } else { Some(lead) };
        }
        let settled = (0..stats.len())
            .all(|j| j == lead || stats[j].0 - stats[lead].0 > MARGIN * (stats[j].1 + stats[lead].1));
        if settled {
            return Some(lead);
        }
        stage *= 2;
    }
}
