//! Monte Carlo estimation and the registry of named experiments that
//! confront simulation with the analytic results of this crate.

mod events;
mod experiments;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, UrnError};
use crate::rng::{child_rng, UrnRng};
use crate::urn::UrnConfig;

pub use crate::stats::{chi_square_gof, chi_square_two_sample, ks_test, wilson_interval, MonteCarloEstimate};
pub use crate::urn::coupling_subsequence;
pub use events::{sequence_law, smon_direct, SmonDirect, TmonChain};

/// Significance level of a single hypothesis test.
pub const ALPHA: f64 = 0.01;

/// Frequency of `event_fn` over independent replicas; each replica gets its
/// own stream split from one master seed drawn from `rng`. An event
/// returning `None` is a discarded tie.
pub fn monte_carlo<F>(event_fn: F, config: &UrnConfig, replicas: u64, rng: &mut UrnRng) -> Result<MonteCarloEstimate>
where
    F: Fn(&UrnConfig, &mut UrnRng) -> Result<Option<bool>> + Sync,
{
    if replicas < 100 {
        return Err(UrnError::InsufficientSamples {
            got: replicas as usize,
            need: 100,
        });
    }
    config.validate()?;
    let seed = rng.next_u64();
    let outcomes: Vec<Option<bool>> = (0..replicas)
        .into_par_iter()
        .map(|r| event_fn(config, &mut child_rng(seed, r)))
        .collect::<Result<_>>()?;
    let ties = outcomes.iter().filter(|o| o.is_none()).count() as u64;
    let hits = outcomes.iter().filter(|o| **o == Some(true)).count() as u64;
    Ok(MonteCarloEstimate::from_counts(hits, replicas - ties, ties, seed))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

/// What an experiment is compared against: a value with a tolerance, or an
/// acceptance region `[lo, hi]` (for tests, `[alpha, 1]` on the p-value).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub value: Option<f64>,
    pub region: (f64, f64),
    pub tolerance: f64,
    pub source: String,
}

impl Target {
    pub fn value(v: f64, tolerance: f64, source: &str) -> Self {
        Target {
            value: Some(v),
            region: (v - tolerance, v + tolerance),
            tolerance,
            source: source.into(),
        }
    }

    pub fn region(lo: f64, hi: f64, source: &str) -> Self {
        Target {
            value: None,
            region: (lo, hi),
            tolerance: 0.0,
            source: source.into(),
        }
    }

    pub fn p_value(alpha: f64, source: &str) -> Self {
        Self::region(alpha, 1.0, source)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "{}", self.header.join(","))?;
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|v| v.to_string()).collect();
            writeln!(out, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub name: String,
    pub description: String,
    pub parameters: BTreeMap<String, f64>,
    pub target: Target,
    pub estimate: f64,
    pub interval: (f64, f64),
    pub p_value: Option<f64>,
    pub checks: Vec<Check>,
    pub verdict: Verdict,
    pub runtime_secs: f64,
    #[serde(skip)]
    pub data: Table,
}

impl ExperimentResult {
    /// Writes `<root>/<name>/result.json` and `<root>/<name>/data.csv`.
    pub fn persist(&self, root: &Path) -> Result<PathBuf> {
        let dir = root.join(&self.name);
        std::fs::create_dir_all(&dir)?;
        let json = serde_json::to_string_pretty(self).map_err(|e| UrnError::Format(e.to_string()))?;
        std::fs::write(dir.join("result.json"), json)?;
        let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join("data.csv"))?);
        self.data.write_csv(&mut f)?;
        f.flush()?;
        Ok(dir)
    }
}

/// What an experiment function hands back before the verdict is drawn.
pub(crate) struct Outcome {
    pub target: Target,
    pub estimate: f64,
    pub interval: (f64, f64),
    pub p_value: Option<f64>,
    pub checks: Vec<Check>,
    pub inconclusive: bool,
    pub data: Table,
}

/// Parameters of one run: registry defaults with overrides applied.
#[derive(Debug, Clone)]
pub struct Params(BTreeMap<String, f64>);

impl Params {
    pub fn get(&self, key: &str) -> f64 {
        *self.0.get(key).unwrap_or_else(|| panic!("parameter '{key}' missing from registry defaults"))
    }

    pub fn count(&self, key: &str) -> Result<u64> {
        let v = self.get(key);
        if v < 0.0 || v.fract() != 0.0 || v > 2f64.powi(53) {
            return Err(UrnError::Config(format!("parameter '{key}' = {v} must be a non-negative integer")));
        }
        Ok(v as u64)
    }

    pub fn seed(&self) -> Result<u64> {
        self.count("seed")
    }
}

pub(crate) type ExperimentFn = fn(&Params) -> Result<Outcome>;

pub struct ExperimentInfo {
    pub name: &'static str,
    pub description: &'static str,
    pub defaults: &'static [(&'static str, f64)],
    /// Whether the verdict is a hypothesis test subject to the suite's
    /// Bonferroni correction.
    pub is_test: bool,
    run: ExperimentFn,
}

pub fn registry() -> &'static [ExperimentInfo] {
    experiments::REGISTRY
}

pub fn find(name: &str) -> Result<&'static ExperimentInfo> {
    registry()
        .iter()
        .find(|e| e.name == name)
        .ok_or_else(|| UrnError::UnknownExperiment(name.to_string()))
}

/// Runs one registered experiment with `overrides` replacing defaults.
/// Unknown parameter names are configuration errors.
pub fn run_experiment(name: &str, overrides: &BTreeMap<String, f64>) -> Result<ExperimentResult> {
    let info = find(name)?;
    let mut params: BTreeMap<String, f64> = info.defaults.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    for (k, v) in overrides {
        if !params.contains_key(k) {
            return Err(UrnError::Config(format!("experiment '{name}' has no parameter '{k}'")));
        }
        params.insert(k.clone(), *v);
    }
    let start = Instant::now();
    let out = (info.run)(&Params(params.clone()))?;
    let runtime_secs = start.elapsed().as_secs_f64();
    let (lo, hi) = out.target.region;
    let intersects = out.interval.0 <= hi && out.interval.1 >= lo;
    let verdict = if out.inconclusive {
        Verdict::Inconclusive
    } else if intersects && out.checks.iter().all(|c| c.passed) {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(ExperimentResult {
        name: name.to_string(),
        description: info.description.to_string(),
        parameters: params,
        target: out.target,
        estimate: out.estimate,
        interval: out.interval,
        p_value: out.p_value,
        checks: out.checks,
        verdict,
        runtime_secs,
        data: out.data,
    })
}

/// Runs every registered experiment. Hypothesis tests share the level
/// `ALPHA` by Bonferroni: each runs at `ALPHA / m` for `m` tests.
pub fn run_all(overrides: &BTreeMap<String, f64>) -> Result<Vec<ExperimentResult>> {
    let m = registry().iter().filter(|e| e.is_test).count() as f64;
    registry()
        .iter()
        .map(|e| {
            let mut o: BTreeMap<String, f64> = overrides
                .iter()
                .filter(|(k, _)| e.defaults.iter().any(|(d, _)| d == k))
                .map(|(k, v)| (k.clone(), *v))
                .collect();
            if e.is_test {
                o.entry("alpha".into()).or_insert(ALPHA / m);
            }
            run_experiment(e.name, &o)
        })
        .collect()
}
