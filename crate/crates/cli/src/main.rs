mod args;
mod config;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use serde_json::json;

use feedback_urn::asymptotics::regime_report;
use feedback_urn::harness::{self, ExperimentResult, Verdict};
use feedback_urn::rng::rng_from;
use feedback_urn::scaling::{
    beta_scaling, fixed_points, integrate_mean_ode, quadratic_variation, simulate_fclt, write_path_csv,
};
use feedback_urn::urn::{io, shares, simulate, simulate_embedding, UrnConfig};
use feedback_urn::{Result, UrnError};

use args::{Cli, Command, ScalingMode};
use config::{FileConfig, UrnSetup};

const EXIT_RUNTIME: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_FAIL: u8 = 3;

fn exit_code(e: &UrnError) -> u8 {
    match e {
        UrnError::Syntax { .. }
        | UrnError::Config(_)
        | UrnError::UnknownExperiment(_)
        | UrnError::Domain { .. }
        | UrnError::OutOfRange(_)
        | UrnError::AssumptionViolated(_) => EXIT_CONFIG,
        _ => EXIT_RUNTIME,
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    std::fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_json(dir: &Path, name: &str, value: &serde_json::Value) -> Result<()> {
    let mut f = create(dir, name)?;
    serde_json::to_writer_pretty(&mut f, value).map_err(|e| UrnError::Format(e.to_string()))?;
    writeln!(f)?;
    f.flush()?;
    Ok(())
}

fn print_json(value: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

fn to_json<T: serde::Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("serializable")
}

fn parse_overrides(set: &[String]) -> Result<BTreeMap<String, f64>> {
    set.iter()
        .map(|kv| {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| UrnError::Config(format!("override '{kv}' is not key=value")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| UrnError::Config(format!("override '{kv}' needs a numeric value")))?;
            Ok((k.trim().to_string(), v))
        })
        .collect()
}

fn report_line(r: &ExperimentResult) -> String {
    let tag = match r.verdict {
        Verdict::Pass => "PASS",
        Verdict::Fail => "FAIL",
        Verdict::Inconclusive => "INCONCLUSIVE",
    };
    format!(
        "{tag:<12} {:<26} estimate {:.6} [{:.6}, {:.6}] target [{:.6}, {:.6}] ({:.1}s)",
        r.name, r.estimate, r.interval.0, r.interval.1, r.target.region.0, r.target.region.1, r.runtime_secs
    )
}

fn run(cli: Cli) -> Result<u8> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let out: PathBuf = cli.out.clone().or(file.out.clone()).unwrap_or_else(|| PathBuf::from("out"));
    if let Some(j) = cli.jobs.or(file.jobs) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build_global()
            .map_err(|e| UrnError::Config(e.to_string()))?;
    }
    match cli.command {
        Command::Simulate { urn, steps, binary } => {
            let s = UrnSetup::resolve(&urn, &file)?;
            let steps = steps.or(file.steps).ok_or_else(|| UrnError::Config("--steps is required".into()))?;
            let config = UrnConfig::new(s.feedbacks.clone(), s.initial_counts()?, steps, s.seed)?;
            let traj = simulate(&config, &mut rng_from(s.seed))?;
            let dir = out.join("simulate");
            let mut f = create(&dir, "trajectory.csv")?;
            io::write_trajectory_csv(&mut f, &traj)?;
            f.flush()?;
            if binary {
                let mut b = create(&dir, "trajectory.purn")?;
                io::write_binary(&mut b, &traj)?;
                b.flush()?;
            }
            let last = traj.counts_at(traj.steps());
            let summary = json!({
                "feedbacks": config.feedbacks.iter().map(|f| f.label.clone()).collect::<Vec<_>>(),
                "initial_counts": config.initial_counts,
                "steps": traj.steps(),
                "seed": s.seed,
                "final_counts": last,
                "final_shares": shares(&last),
                "trajectory": dir.join("trajectory.csv"),
            });
            write_json(&dir, "summary.json", &summary)?;
            print_json(&summary);
        }
        Command::Embed { urn, steps, t_max } => {
            let s = UrnSetup::resolve(&urn, &file)?;
            let steps = steps.or(file.steps).ok_or_else(|| UrnError::Config("--steps is required".into()))?;
            let t_max = t_max.or(file.t_max).unwrap_or(1e12);
            let config = UrnConfig::new(s.feedbacks.clone(), s.initial_counts()?, steps, s.seed)?;
            let emb = simulate_embedding(&config, &mut rng_from(s.seed), t_max)?;
            let dir = out.join("embed");
            let mut f = create(&dir, "jump_chain.csv")?;
            io::write_embedding_csv(&mut f, &emb)?;
            f.flush()?;
            let summary = json!({
                "steps": emb.steps(),
                "seed": s.seed,
                "t_max": t_max,
                "last_jump_time": emb.jump_times.last(),
                "explosion": emb.explosion,
                "final_counts": emb.state_at(emb.steps()),
            });
            write_json(&dir, "summary.json", &summary)?;
            print_json(&summary);
        }
        Command::Analyze { urn } => {
            let s = UrnSetup::resolve(&urn, &file)?;
            let at = match (&s.shares, &s.counts, s.n) {
                (Some(sh), _, Some(n)) => Some((sh.clone(), n)),
                (None, Some(c), _) => Some((shares(c), c.iter().sum())),
                _ => None,
            };
            let report = regime_report(&s.feedbacks, at.as_ref().map(|(x, n)| (x.as_slice(), *n)))?;
            let value = to_json(&report);
            write_json(&out.join("analyze"), "report.json", &value)?;
            print_json(&value);
        }
        Command::Scaling { mode, urn, t, h, beta } => {
            let s = UrnSetup::resolve(&urn, &file)?;
            let t = t.or(file.t);
            let h = h.or(file.h).unwrap_or(1e-2);
            let dir = out.join("scaling");
            match mode {
                ScalingMode::Ode | ScalingMode::Fclt => {
                    let chi0 = s.initial_shares()?;
                    let t = t.unwrap_or(10.0);
                    let path = if mode == ScalingMode::Ode {
                        integrate_mean_ode(&s.feedbacks, &chi0, t, h)?
                    } else {
                        simulate_fclt(&s.feedbacks, &chi0, t, h, &mut rng_from(s.seed))?
                    };
                    let name = if mode == ScalingMode::Ode { "ode.csv" } else { "fclt.csv" };
                    let mut f = create(&dir, name)?;
                    write_path_csv(&mut f, &path)?;
                    f.flush()?;
                    print_json(&json!({
                        "path": dir.join(name),
                        "points": path.t.len(),
                        "final_z": path.z.last(),
                        "max_clamp": path.max_clamp,
                        "reparam_error": path.reparam_error,
                        "seed": path.seed,
                    }));
                }
                ScalingMode::Qvar => {
                    let chi0 = s.initial_shares()?;
                    let q = quadratic_variation(&s.feedbacks, &chi0, t.unwrap_or(f64::INFINITY))?;
                    let value = json!({
                        "T": if q.t_max.is_finite() { json!(q.t_max) } else { json!("inf") },
                        "qvar": q.values,
                        "error": q.error,
                        "tail_bound": q.tail_bound,
                    });
                    write_json(&dir, "qvar.json", &value)?;
                    print_json(&value);
                }
                ScalingMode::Beta => {
                    let chi0 = s.initial_shares()?;
                    let beta = beta.or(file.beta).ok_or_else(|| UrnError::Config("--beta is required".into()))?;
                    let n = s.n.ok_or_else(|| UrnError::Config("--N is required".into()))?;
                    let r = beta_scaling(&s.feedbacks, &chi0, beta, n, t.unwrap_or(1.0), &mut rng_from(s.seed))?;
                    let a = r.g.len();
                    let mut f = create(&dir, "beta.csv")?;
                    let mut header = vec!["t".to_string()];
                    for name in ["R", "lln", "second"] {
                        header.extend((1..=a).map(|i| format!("{name}_{i}")));
                    }
                    writeln!(f, "{}", header.join(","))?;
                    for row in &r.rows {
                        let mut cells = vec![row.t.to_string()];
                        for block in [&row.rescaled, &row.lln, &row.second_order] {
                            cells.extend(block.iter().map(|v| v.to_string()));
                        }
                        writeln!(f, "{}", cells.join(","))?;
                    }
                    f.flush()?;
                    let mut value = to_json(&r);
                    value.as_object_mut().expect("object").remove("rows");
                    write_json(&dir, "beta.json", &value)?;
                    print_json(&value);
                }
                ScalingMode::Fixed => {
                    let report = fixed_points(&s.feedbacks, 1e-6)?;
                    let value = to_json(&report);
                    write_json(&dir, "fixed_points.json", &value)?;
                    print_json(&value);
                }
            }
        }
        Command::Experiment { name, set } => {
            let overrides = parse_overrides(&set)?;
            let results = if name == "all" {
                harness::run_all(&overrides)?
            } else {
                vec![harness::run_experiment(&name, &overrides)?]
            };
            let mut failed = false;
            for r in &results {
                r.persist(&out)?;
                println!("{}", report_line(r));
                failed |= r.verdict == Verdict::Fail;
            }
            if failed {
                return Ok(EXIT_FAIL);
            }
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
