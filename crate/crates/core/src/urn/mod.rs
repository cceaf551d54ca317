//! The urn process: direct Markov chain, exponential embedding and
//! explosion times.

mod embedding;
mod explosion;
pub mod io;

use serde::{Deserialize, Serialize};

use crate::error::{Result, UrnError};
use crate::feedback::FeedbackSpec;
use crate::rng::UrnRng;
pub use embedding::{coupling_subsequence, simulate_embedding, EmbeddingTrajectory, Explosion};
pub use explosion::{sample_explosion_time, smon_estimate, ExplosionPlan, ExplosionSample, SmonEstimate};
use rand::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UrnConfig {
    pub feedbacks: Vec<FeedbackSpec>,
    pub initial_counts: Vec<u64>,
    pub horizon: u64,
    pub seed: u64,
}

impl UrnConfig {
    pub fn new(feedbacks: Vec<FeedbackSpec>, initial_counts: Vec<u64>, horizon: u64, seed: u64) -> Result<Self> {
        let c = UrnConfig {
            feedbacks,
            initial_counts,
            horizon,
            seed,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.feedbacks.len() < 2 {
            return Err(UrnError::Config("need at least two agents".into()));
        }
        if self.feedbacks.len() != self.initial_counts.len() {
            return Err(UrnError::Config(format!(
                "{} feedbacks but {} initial counts",
                self.feedbacks.len(),
                self.initial_counts.len()
            )));
        }
        if self.initial_counts.contains(&0) {
            return Err(UrnError::Config("initial counts must be >= 1".into()));
        }
        Ok(())
    }

    pub fn agents(&self) -> usize {
        self.feedbacks.len()
    }

    /// Initial market size `N`.
    pub fn market_size(&self) -> u64 {
        self.initial_counts.iter().sum()
    }
}

fn ln_weight(spec: &FeedbackSpec, count: u64) -> Result<f64> {
    let lw = spec.ln_f(count as f64);
    if lw.is_nan() || lw == f64::NEG_INFINITY {
        return Err(UrnError::Domain {
            k: count as f64,
            msg: format!("feedback '{}' is not positive", spec.label),
        });
    }
    Ok(lw)
}

/// `p_i = F_i(X_i) / sum_j F_j(X_j)`, evaluated in the log domain.
pub fn transition_probabilities(feedbacks: &[FeedbackSpec], counts: &[u64]) -> Result<Vec<f64>> {
    if feedbacks.len() != counts.len() || counts.contains(&0) {
        return Err(UrnError::Config("counts must match agents and be >= 1".into()));
    }
    let lw: Vec<f64> = feedbacks
        .iter()
        .zip(counts)
        .map(|(f, c)| ln_weight(f, *c))
        .collect::<Result<_>>()?;
    Ok(softmax(&lw))
}

fn softmax(lw: &[f64]) -> Vec<f64> {
    let m = lw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::INFINITY {
        let n = lw.iter().filter(|v| **v == f64::INFINITY).count() as f64;
        return lw.iter().map(|v| if *v == f64::INFINITY { 1.0 / n } else { 0.0 }).collect();
    }
    let w: Vec<f64> = lw.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

/// Mutable state of the direct chain with cached log-weights.
#[derive(Debug, Clone)]
pub struct UrnState<'a> {
    feedbacks: &'a [FeedbackSpec],
    counts: Vec<u64>,
    lw: Vec<f64>,
    weights: Vec<f64>,
}

impl<'a> UrnState<'a> {
    pub fn new(feedbacks: &'a [FeedbackSpec], counts: &[u64]) -> Result<Self> {
        let lw = feedbacks
            .iter()
            .zip(counts)
            .map(|(f, c)| ln_weight(f, *c))
            .collect::<Result<Vec<_>>>()?;
        Ok(UrnState {
            feedbacks,
            counts: counts.to_vec(),
            weights: vec![0.0; lw.len()],
            lw,
        })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Samples the next winner by inverse CDF and updates the state.
    pub fn step(&mut self, rng: &mut UrnRng) -> Result<usize> {
        let m = self.lw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for (w, l) in self.weights.iter_mut().zip(&self.lw) {
            *w = (l - m).exp();
            total += *w;
        }
        let u: f64 = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let last = self.weights.len() - 1;
        let mut winner = last;
        for (i, w) in self.weights.iter().enumerate().take(last) {
            acc += w;
            if u < acc {
                winner = i;
                break;
            }
        }
        self.counts[winner] += 1;
        self.lw[winner] = ln_weight(&self.feedbacks[winner], self.counts[winner])?;
        Ok(winner)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub config: UrnConfig,
    pub winners: Vec<u32>,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.winners.len()
    }

    pub fn market_size(&self) -> u64 {
        self.config.market_size()
    }

    /// `X(n)`.
    pub fn counts_at(&self, n: usize) -> Vec<u64> {
        let mut c = self.config.initial_counts.clone();
        for w in &self.winners[..n.min(self.winners.len())] {
            c[*w as usize] += 1;
        }
        c
    }

    /// `chi(n) = X(n) / (N + n)`.
    pub fn shares_at(&self, n: usize) -> Vec<f64> {
        shares(&self.counts_at(n))
    }

    /// All states `X(0), X(1), ..., X(steps)`.
    pub fn counts_path(&self) -> Vec<Vec<u64>> {
        let mut out = Vec::with_capacity(self.winners.len() + 1);
        let mut c = self.config.initial_counts.clone();
        out.push(c.clone());
        for w in &self.winners {
            c[*w as usize] += 1;
            out.push(c.clone());
        }
        out
    }
}

/// Shares from integer counts.
pub fn shares(counts: &[u64]) -> Vec<f64> {
    let total: u64 = counts.iter().sum();
    let t = total as f64;
    counts.iter().map(|c| *c as f64 / t).collect()
}

/// Runs `config.horizon` steps of the direct chain.
pub fn simulate(config: &UrnConfig, rng: &mut UrnRng) -> Result<Trajectory> {
    config.validate()?;
    let mut state = UrnState::new(&config.feedbacks, &config.initial_counts)?;
    let mut winners = Vec::with_capacity(config.horizon as usize);
    for _ in 0..config.horizon {
        winners.push(state.step(rng)? as u32);
    }
    Ok(Trajectory {
        config: config.clone(),
        winners,
    })
}

/// Final counts after `config.horizon` steps, without storing the path.
pub fn simulate_final_counts(config: &UrnConfig, rng: &mut UrnRng) -> Result<Vec<u64>> {
    config.validate()?;
    let mut state = UrnState::new(&config.feedbacks, &config.initial_counts)?;
    for _ in 0..config.horizon {
        state.step(rng)?;
    }
    Ok(state.counts)
}

/// `X_i(0) = max(1, round(chi_i N))`, then the largest coordinate absorbs the
/// rounding difference so that the counts sum to `N`.
pub fn shares_from_initial(chi0: &[f64], n: u64) -> Result<Vec<u64>> {
    let a = chi0.len();
    if a < 2 {
        return Err(UrnError::Config("need at least two agents".into()));
    }
    if n < a as u64 {
        return Err(UrnError::Config(format!("InfeasibleN: N = {n} < A = {a}")));
    }
    check_open_simplex(chi0)?;
    let mut x: Vec<u64> = chi0.iter().map(|c| ((c * n as f64).round() as u64).max(1)).collect();
    loop {
        let s: u64 = x.iter().sum();
        if s == n {
            return Ok(x);
        }
        let big = (0..a).max_by(|i, j| x[*i].cmp(&x[*j]).then(j.cmp(i))).unwrap();
        if s > n {
            let excess = s - n;
            let room = x[big] - 1;
            x[big] -= excess.min(room);
        } else {
            x[big] += n - s;
        }
    }
}

pub fn check_open_simplex(chi: &[f64]) -> Result<()> {
    let s: f64 = chi.iter().sum();
    if chi.iter().any(|c| !(*c > 0.0)) || (s - 1.0).abs() > 1e-9 {
        return Err(UrnError::Config(format!("shares {chi:?} are not in the open simplex")));
    }
    Ok(())
}
