//! Exponential embedding: independent birth processes with holding times
//! `tau_i(k) ~ Exp(F_i(k))`, merged into a jump chain.

use rand::{Rng, RngCore};
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use super::{ln_weight, Trajectory, UrnConfig};
use crate::error::{Result, UrnError};
use crate::feedback::{monopoly_condition, TriState};
use crate::rng::{child_rng, UrnRng};

/// Event budget per agent when the configuration has no horizon.
const DEFAULT_BUDGET: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Explosion {
    pub agent: usize,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingTrajectory {
    pub config: UrnConfig,
    pub t_max: f64,
    /// Absolute event times of each birth process.
    pub event_times: Vec<Vec<f64>>,
    /// Time up to which each agent's events are fully known.
    pub known_through: Vec<f64>,
    /// Merged jump times `t_1 < t_2 < ...` of the valid prefix.
    pub jump_times: Vec<f64>,
    pub winners: Vec<u32>,
    pub explosion: Option<Explosion>,
}

impl EmbeddingTrajectory {
    pub fn steps(&self) -> usize {
        self.winners.len()
    }

    /// `Xi(t_n)`.
    pub fn state_at(&self, n: usize) -> Vec<u64> {
        self.to_trajectory().counts_at(n)
    }

    /// The jump chain as a direct-chain trajectory.
    pub fn to_trajectory(&self) -> Trajectory {
        let mut config = self.config.clone();
        config.horizon = self.winners.len() as u64;
        Trajectory {
            config,
            winners: self.winners.clone(),
        }
    }

    fn cutoff(&self, agents: &[usize]) -> f64 {
        agents
            .iter()
            .map(|i| self.known_through[*i])
            .fold(f64::INFINITY, f64::min)
    }
}

struct AgentRun {
    times: Vec<f64>,
    known_through: f64,
    exploded: bool,
}

fn run_agent(config: &UrnConfig, i: usize, rng: &mut UrnRng, t_max: f64, budget: u64) -> Result<AgentRun> {
    let spec = &config.feedbacks[i];
    let mut k = config.initial_counts[i];
    let mut s = 0.0f64;
    let mut times = Vec::new();
    while (times.len() as u64) < budget {
        let e: f64 = rng.sample(Exp1);
        let tau = e * (-ln_weight(spec, k)?).exp();
        let next = s + tau;
        if next > t_max {
            return Ok(AgentRun {
                times,
                known_through: t_max,
                exploded: false,
            });
        }
        if next <= s {
            return Ok(AgentRun {
                times,
                known_through: s,
                exploded: true,
            });
        }
        s = next;
        times.push(s);
        k += 1;
    }
    Ok(AgentRun {
        times,
        known_through: s,
        exploded: false,
    })
}

/// Samples every birth process on `[0, t_max]` (at most `horizon` events
/// each, or a large default budget when `horizon = 0`) and merges them.
///
/// Only jumps before the earliest per-agent `known_through` time are kept,
/// so the jump chain is an exact sample of the urn. An agent whose event
/// times stop advancing in floating point is reported in `explosion` and
/// truncates the chain at that time.
pub fn simulate_embedding(config: &UrnConfig, rng: &mut UrnRng, t_max: f64) -> Result<EmbeddingTrajectory> {
    config.validate()?;
    if !(t_max > 0.0) {
        return Err(UrnError::Config("t_max must be > 0".into()));
    }
    let budget = if config.horizon > 0 {
        config.horizon
    } else {
        DEFAULT_BUDGET
    };
    let base = rng.next_u64();
    let a = config.agents();
    let mut event_times = Vec::with_capacity(a);
    let mut known_through = Vec::with_capacity(a);
    let mut explosion: Option<Explosion> = None;
    for i in 0..a {
        let run = run_agent(config, i, &mut child_rng(base, i as u64), t_max, budget)?;
        if run.exploded && explosion.is_none_or(|e| run.known_through < e.time) {
            explosion = Some(Explosion {
                agent: i,
                time: run.known_through,
            });
        }
        event_times.push(run.times);
        known_through.push(run.known_through);
    }
    let mut emb = EmbeddingTrajectory {
        config: config.clone(),
        t_max,
        event_times,
        known_through,
        jump_times: Vec::new(),
        winners: Vec::new(),
        explosion,
    };
    let all: Vec<usize> = (0..a).collect();
    let (times, winners) = merge(&emb, &all, config.horizon);
    emb.jump_times = times;
    emb.winners = winners;
    Ok(emb)
}

fn merge(emb: &EmbeddingTrajectory, agents: &[usize], limit: u64) -> (Vec<f64>, Vec<u32>) {
    let cutoff = emb.cutoff(agents);
    let mut events: Vec<(f64, u32)> = Vec::new();
    for (pos, i) in agents.iter().enumerate() {
        events.extend(
            emb.event_times[*i]
                .iter()
                .take_while(|t| **t <= cutoff)
                .map(|t| (*t, pos as u32)),
        );
    }
    events.sort_by(|x, y| x.0.total_cmp(&y.0));
    if limit > 0 {
        events.truncate(limit as usize);
    }
    events.into_iter().unzip()
}

/// Sub-jump-chain of the agents in `subset` (0-based): the jumps of the
/// embedding's chain made by those agents, re-indexed in the order given. Requires every agent to violate
/// condition (M).
pub fn coupling_subsequence(embedding: &EmbeddingTrajectory, subset: &[usize]) -> Result<Trajectory> {
    let a = embedding.config.agents();
    if subset.is_empty() || subset.iter().any(|i| *i >= a) {
        return Err(UrnError::Config(format!("subset {subset:?} is not a nonempty set of agents")));
    }
    let mut sorted = subset.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != subset.len() {
        return Err(UrnError::Config("subset has repeated agents".into()));
    }
    for (i, f) in embedding.config.feedbacks.iter().enumerate() {
        if monopoly_condition(f) != TriState::Fails {
            return Err(UrnError::AssumptionViolated(format!(
                "agent {} feedback '{}' is (or may be) explosive",
                i + 1,
                f.label
            )));
        }
    }
    let winners: Vec<u32> = embedding
        .winners
        .iter()
        .filter_map(|w| subset.iter().position(|i| *i == *w as usize).map(|p| p as u32))
        .collect();
    let config = UrnConfig {
        feedbacks: subset.iter().map(|i| embedding.config.feedbacks[*i].clone()).collect(),
        initial_counts: subset.iter().map(|i| embedding.config.initial_counts[*i]).collect(),
        horizon: winners.len() as u64,
        seed: embedding.config.seed,
    };
    Ok(Trajectory { config, winners })
}
