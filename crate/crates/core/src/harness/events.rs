//! Events and oracles evaluated on simulated paths.

use serde::{Deserialize, Serialize};

use crate::error::{Result, UrnError};
use crate::feedback::{monopoly_condition, tail_sum, Family, FeedbackSpec, TriState};
use crate::numeric::log_add_exp;
use crate::rng::UrnRng;
use crate::urn::{transition_probabilities, UrnState};

/// Total monopoly of one agent on the direct chain, decided after `steps`
/// consecutive wins. Winning the first `steps` draws overestimates
/// `P(tMon)` by at most `residual`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TmonChain {
    pub agent: usize,
    pub steps: u64,
    pub residual: f64,
}

fn ln_competition(feedbacks: &[FeedbackSpec], counts: &[u64], agent: usize) -> f64 {
    (0..feedbacks.len())
        .filter(|j| *j != agent)
        .map(|j| feedbacks[j].ln_f(counts[j] as f64))
        .fold(f64::NEG_INFINITY, log_add_exp)
}

impl TmonChain {
    pub fn new(feedbacks: &[FeedbackSpec], counts: &[u64], agent: usize, residual_tol: f64) -> Result<Self> {
        if agent >= feedbacks.len() || feedbacks.len() != counts.len() {
            return Err(UrnError::Config("agent or counts do not match the feedbacks".into()));
        }
        let f = &feedbacks[agent];
        if monopoly_condition(f) != TriState::Holds {
            return Err(UrnError::NotExplosive { agent });
        }
        let w = ln_competition(feedbacks, counts, agent).exp();
        let mut steps = 16u64;
        loop {
            // P(loss after the first `steps` wins) <= W sum_{k >= x + steps} 1/F(k).
            let s = tail_sum(f, counts[agent] + steps, 1, 0.1 * residual_tol / w)?;
            let residual = w * s.upper();
            if residual <= residual_tol {
                return Ok(TmonChain { agent, steps, residual });
            }
            steps *= 2;
            if steps > 1 << 24 {
                return Err(UrnError::ToleranceUnreachable(format!(
                    "total-monopoly residual stays above {residual_tol}"
                )));
            }
        }
    }

    /// Runs the chain until the first loss of the agent or `steps` wins.
    pub fn run(&self, feedbacks: &[FeedbackSpec], counts: &[u64], rng: &mut UrnRng) -> Result<bool> {
        let mut state = UrnState::new(feedbacks, counts)?;
        for _ in 0..self.steps {
            if state.step(rng)? != self.agent {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Declared strong-monopoly winner of one direct-chain run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmonDirect {
    pub winner: usize,
    /// Bound on the probability that `winner` loses again after `steps`.
    pub residual: f64,
    pub steps: u64,
}

fn poly_tail_upper(spec: &FeedbackSpec, x: u64) -> Option<f64> {
    match spec.family {
        Family::Polynomial { alpha, beta } if beta > 1.0 => {
            let x = x as f64;
            Some((x.powf(-beta) + x.powf(1.0 - beta) / (beta - 1.0)) / alpha)
        }
        _ => None,
    }
}

const RESIDUAL_STOP: f64 = 1e-7;
const CHECK_EVERY: u64 = 32;

/// Runs the direct chain for at most `horizon` steps and declares as winner
/// the agent with the largest current weight. The residual
/// `1 - exp(-W S)` (with `W` the competitors' weight and `S` the leader's
/// remaining explosion mean) bounds the chance that the leader ever loses
/// again; the run stops early once it is below `1e-7`.
///
/// Only polynomial feedbacks `k^beta` with `beta > 1` are accepted, where
/// `S` has a closed-form upper bound.
pub fn smon_direct(feedbacks: &[FeedbackSpec], counts: &[u64], horizon: u64, rng: &mut UrnRng) -> Result<SmonDirect> {
    if feedbacks.iter().any(|f| poly_tail_upper(f, 1).is_none()) {
        return Err(UrnError::Config(
            "direct strong-monopoly oracle needs polynomial feedbacks with beta > 1".into(),
        ));
    }
    let mut state = UrnState::new(feedbacks, counts)?;
    let judge = |c: &[u64]| {
        let lw: Vec<f64> = feedbacks.iter().zip(c).map(|(f, x)| f.ln_f(*x as f64)).collect();
        let lead = (0..lw.len()).max_by(|a, b| lw[*a].total_cmp(&lw[*b])).unwrap();
        let ln_w = (0..lw.len()).filter(|j| *j != lead).map(|j| lw[j]).fold(f64::NEG_INFINITY, log_add_exp);
        let s = poly_tail_upper(&feedbacks[lead], c[lead]).unwrap();
        (lead, -(-(ln_w.exp() * s)).exp_m1())
    };
    let mut steps = 0;
    while steps < horizon {
        state.step(rng)?;
        steps += 1;
        if steps % CHECK_EVERY == 0 {
            let (winner, residual) = judge(state.counts());
            if residual <= RESIDUAL_STOP {
                return Ok(SmonDirect { winner, residual, steps });
            }
        }
    }
    let (winner, residual) = judge(state.counts());
    Ok(SmonDirect { winner, residual, steps })
}

/// Exact probabilities of every winner sequence of length `len`; sequence
/// `(w_1, ..., w_len)` has index `sum w_m A^(len-m)`.
pub fn sequence_law(feedbacks: &[FeedbackSpec], counts: &[u64], len: u32) -> Result<Vec<f64>> {
    let a = feedbacks.len();
    let total = a.pow(len);
    let mut out = Vec::with_capacity(total);
    for idx in 0..total {
        let mut c = counts.to_vec();
        let mut p = 1.0;
        for m in (0..len).rev() {
            let w = idx / a.pow(m) % a;
            p *= transition_probabilities(feedbacks, &c)?[w];
            c[w] += 1;
        }
        out.push(p);
    }
    Ok(out)
}

/// Index of a winner sequence in `sequence_law` order.
pub(crate) fn sequence_index(winners: &[u32], a: usize) -> usize {
    winners.iter().fold(0, |acc, w| acc * a + *w as usize)
}
