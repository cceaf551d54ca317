//! Flat TOML configuration merged under command-line flags.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use feedback_urn::feedback::{parse_feedback, FeedbackSpec};
use feedback_urn::urn::shares_from_initial;
use feedback_urn::{Result, UrnError};

use crate::args::UrnArgs;

/// Keys accepted in a config file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub feedback: Option<Vec<String>>,
    pub agents: Option<usize>,
    pub init: Option<Vec<u64>>,
    pub shares: Option<Vec<ShareValue>>,
    #[serde(rename = "N")]
    pub n: Option<u64>,
    pub seed: Option<u64>,
    pub steps: Option<u64>,
    #[serde(rename = "T")]
    pub t: Option<f64>,
    pub h: Option<f64>,
    pub beta: Option<f64>,
    pub t_max: Option<f64>,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ShareValue {
    Number(f64),
    Text(String),
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| UrnError::Config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| UrnError::Config(format!("{}: {e}", path.display())))
    }
}

pub fn parse_share(s: &str) -> Result<f64> {
    let bad = || UrnError::Config(format!("'{s}' is not a share"));
    let v = match s.trim().split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|_| bad())?;
            let b: f64 = b.trim().parse().map_err(|_| bad())?;
            a / b
        }
        None => s.trim().parse().map_err(|_| bad())?,
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad())
    }
}

/// Agent configuration after merging flags over the file.
#[derive(Debug, Clone)]
pub struct UrnSetup {
    pub feedbacks: Vec<FeedbackSpec>,
    pub counts: Option<Vec<u64>>,
    pub shares: Option<Vec<f64>>,
    pub n: Option<u64>,
    pub seed: u64,
}

impl UrnSetup {
    pub fn resolve(args: &UrnArgs, file: &FileConfig) -> Result<Self> {
        let exprs = if args.feedback.is_empty() {
            file.feedback.clone().unwrap_or_default()
        } else {
            args.feedback.clone()
        };
        if exprs.is_empty() {
            return Err(UrnError::Config("at least one --feedback is required".into()));
        }
        let mut feedbacks = exprs.iter().map(|e| parse_feedback(e)).collect::<Result<Vec<_>>>()?;
        let counts = args.init.clone().or_else(|| file.init.clone());
        let shares = match (&args.shares, &file.shares) {
            (Some(s), _) => Some(s.iter().map(|x| parse_share(x)).collect::<Result<Vec<_>>>()?),
            (None, Some(s)) => Some(
                s.iter()
                    .map(|x| match x {
                        ShareValue::Number(v) => Ok(*v),
                        ShareValue::Text(t) => parse_share(t),
                    })
                    .collect::<Result<Vec<_>>>()?,
            ),
            (None, None) => None,
        };
        let agents = args
            .agents
            .or(file.agents)
            .or(counts.as_ref().map(|c| c.len()))
            .or(shares.as_ref().map(|s| s.len()));
        if let Some(a) = agents {
            if feedbacks.len() == 1 {
                feedbacks = vec![feedbacks[0].clone(); a];
            }
            if feedbacks.len() != a {
                return Err(UrnError::Config(format!("{} feedbacks for {a} agents", feedbacks.len())));
            }
        }
        if feedbacks.len() < 2 {
            return Err(UrnError::Config("need at least two agents (use --agents)".into()));
        }
        for (what, len) in [("init", counts.as_ref().map(|c| c.len())), ("shares", shares.as_ref().map(|s| s.len()))] {
            if let Some(len) = len {
                if len != feedbacks.len() {
                    return Err(UrnError::Config(format!("--{what} has {len} entries for {} agents", feedbacks.len())));
                }
            }
        }
        Ok(UrnSetup {
            feedbacks,
            counts,
            shares,
            n: args.n.or(file.n),
            seed: args.seed.or(file.seed).unwrap_or(0),
        })
    }

    /// Initial counts from `--init`, or from `--shares` and `--N`.
    pub fn initial_counts(&self) -> Result<Vec<u64>> {
        match (&self.counts, &self.shares, self.n) {
            (Some(c), _, _) => Ok(c.clone()),
            (None, Some(s), Some(n)) => shares_from_initial(s, n),
            (None, Some(_), None) => Err(UrnError::Config("--shares needs --N".into())),
            (None, None, _) => Err(UrnError::Config("give --init or --shares with --N".into())),
        }
    }

    /// Initial shares from `--shares`, or from `--init`.
    pub fn initial_shares(&self) -> Result<Vec<f64>> {
        match (&self.shares, &self.counts) {
            (Some(s), _) => Ok(s.clone()),
            (None, Some(c)) => Ok(feedback_urn::urn::shares(c)),
            (None, None) => Err(UrnError::Config("give --shares or --init".into())),
        }
    }
}
