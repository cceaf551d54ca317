//! The experiment registry.

use rayon::prelude::*;
use statrs::function::erf::erfc;

use super::events::{sequence_index, sequence_law, smon_direct, TmonChain};
use super::{monte_carlo, Check, ExperimentInfo, Outcome, Params, Table, Target};
use crate::asymptotics::{
    classify_domain, exact_tmon_probability, exp_decreasing_limit, limit_shares, tmon_bounds_from_counts,
    DomainOutcome, LimitVerdict,
};
use crate::error::{Result, UrnError};
use crate::feedback::{parse_feedback, FeedbackSpec};
use crate::rng::{child_rng, rng_from, UrnRng};
use crate::scaling::{integrate_mean_ode, quadratic_variation, FcltPlan};
use crate::stats::{chi_square_gof, chi_square_two_sample, ks_test, mean_var, median, Z95};
use crate::urn::{
    coupling_subsequence, shares, shares_from_initial, simulate, simulate_embedding, simulate_final_counts,
    smon_estimate, UrnConfig, UrnState,
};

const INF: f64 = f64::INFINITY;

pub(super) static REGISTRY: &[ExperimentInfo] = &[
    ExperimentInfo {
        name: "tmon_e6_4_4",
        description: "Total monopoly of agent 1 for F = e^k, X(0) = (6,4,4): analytic bounds, exact product and direct-chain Monte Carlo",
        defaults: &[("replicas", 1e5), ("seed", 1.0)],
        is_test: false,
        run: tmon_e6_4_4,
    },
    ExperimentInfo {
        name: "dirichlet_uniform",
        description: "Classical urn X(0) = (1,1): chi_1(n) against Uniform(0,1) by Kolmogorov-Smirnov",
        defaults: &[("replicas", 2000.0), ("steps", 5000.0), ("seed", 2.0), ("alpha", 0.01)],
        is_test: true,
        run: dirichlet_uniform,
    },
    ExperimentInfo {
        name: "dirichlet_beta21",
        description: "Classical urn X(0) = (2,1): chi_1(n) against Beta(2,1) by Kolmogorov-Smirnov",
        defaults: &[("replicas", 2000.0), ("steps", 5000.0), ("seed", 3.0), ("alpha", 0.01)],
        is_test: true,
        run: dirichlet_beta21,
    },
    ExperimentInfo {
        name: "sublinear_limit_sqrt",
        description: "F = (sqrt k, 2 sqrt k): mean of chi_1(n) against the deterministic limit 1/5",
        defaults: &[("replicas", 200.0), ("steps", 1e5), ("seed", 4.0)],
        is_test: false,
        run: sublinear_limit_sqrt,
    },
    ExperimentInfo {
        name: "khanin_variance_beta025",
        description: "F = k^beta, A = 2: Var(sqrt(n)(chi_1(n) - 1/2)) against (A-1)/(A^(1+2beta)(1-2beta))",
        defaults: &[("replicas", 2000.0), ("steps", 1e5), ("beta", 0.25), ("seed", 5.0)],
        is_test: false,
        run: khanin_variance,
    },
    ExperimentInfo {
        name: "qvar_sqrt_0.2474",
        description: "Limit quadratic variation <M_1> for F = sqrt k, chi(0) = (0.8,0.1,0.1)",
        defaults: &[("T", 1e12)],
        is_test: false,
        run: qvar_sqrt,
    },
    ExperimentInfo {
        name: "qvar_square_0.1908",
        description: "Limit quadratic variation <M_1> for F = k^2, chi(0) = (0.4,0.3,0.3)",
        defaults: &[("T", 1e12)],
        is_test: false,
        run: qvar_square,
    },
    ExperimentInfo {
        name: "fclt_linear_variance",
        description: "Linear feedback: E[M_1(T)^2] of the limit diffusion against chi_1(1-chi_1)(1-1/(1+T)) at T = 1, 5",
        defaults: &[("paths", 1e4), ("chi1", 0.3), ("h", 0.01), ("seed", 6.0)],
        is_test: false,
        run: fclt_linear_variance,
    },
    ExperimentInfo {
        name: "lln_convergence",
        description: "F = k^2, chi(0) = (0.4,0.3,0.3): median sup distance to the ODE path decreases over N = 10^2, 10^3, 10^4",
        defaults: &[("replicas", 50.0), ("T", 2.0), ("seed", 7.0)],
        is_test: false,
        run: lln_convergence,
    },
    ExperimentInfo {
        name: "domain_k3_500",
        description: "F = k^3, chi(0) = (0.5,0.3,0.2), N = 500: strong monopoly of agent 1 via explosion times",
        defaults: &[("replicas", 1e4), ("N", 500.0), ("tol", 1e-9), ("seed", 8.0)],
        is_test: false,
        run: domain_k3_500,
    },
    ExperimentInfo {
        name: "expdecreasing_limit",
        description: "F_i = alpha_i e^(-beta_i k), beta = (1,3): chi_1(n) against beta_2/(beta_1+beta_2) for several alpha",
        defaults: &[("replicas", 20.0), ("steps", 1e5), ("seed", 9.0)],
        is_test: false,
        run: expdecreasing_limit,
    },
    ExperimentInfo {
        name: "rubin_equivalence",
        description: "F = (k^2, 2k+1), X(0) = (1,2): 5-step winner sequences of the direct chain and of the embedding jump chain",
        defaults: &[("replicas", 1e5), ("seed", 10.0), ("alpha", 0.01)],
        is_test: true,
        run: rubin_equivalence,
    },
    ExperimentInfo {
        name: "partial_urn_coupling",
        description: "Linear A = 3, B = {1,2}: the induced sub-jump-chain against a fresh 2-agent urn over 5 steps",
        defaults: &[("replicas", 1e5), ("horizon", 400.0), ("seed", 11.0), ("alpha", 0.01)],
        is_test: true,
        run: partial_urn_coupling,
    },
    ExperimentInfo {
        name: "smon_estimator_crossval",
        description: "Strong-monopoly probabilities from explosion times against a direct-chain oracle on five polynomial configurations",
        defaults: &[("replicas", 1e4), ("horizon", 1e4), ("tol", 1e-6), ("seed", 12.0), ("alpha", 0.01)],
        is_test: true,
        run: smon_crossval,
    },
];

fn specs(expr: &str, a: usize) -> Vec<FeedbackSpec> {
    vec![parse_feedback(expr).expect("registry expression"); a]
}

fn replicate<T: Send>(replicas: u64, seed: u64, f: impl Fn(&mut UrnRng) -> Result<T> + Sync) -> Result<Vec<T>> {
    (0..replicas).into_par_iter().map(|r| f(&mut child_rng(seed, r))).collect()
}

fn check(name: &str, passed: bool, detail: String) -> Check {
    Check {
        name: name.into(),
        passed,
        detail,
    }
}

fn mean_ci(xs: &[f64]) -> (f64, (f64, f64)) {
    let (m, v) = mean_var(xs);
    let half = Z95 * (v / xs.len() as f64).sqrt();
    (m, (m - half, m + half))
}

fn test_outcome(p: f64, alpha: f64, source: &str, checks: Vec<Check>, data: Table) -> Outcome {
    Outcome {
        target: Target::p_value(alpha, source),
        estimate: p,
        interval: (p, p),
        p_value: Some(p),
        checks,
        inconclusive: false,
        data,
    }
}

fn final_share(feedbacks: &[FeedbackSpec], counts: &[u64], steps: u64, rng: &mut UrnRng) -> Result<f64> {
    let config = UrnConfig::new(feedbacks.to_vec(), counts.to_vec(), steps, 0)?;
    Ok(shares(&simulate_final_counts(&config, rng)?)[0])
}

fn tmon_e6_4_4(p: &Params) -> Result<Outcome> {
    let f = specs("exp(k)", 3);
    let counts = [6, 4, 4];
    let bounds = tmon_bounds_from_counts(&f, &counts, 0)?;
    let (exact, err) = exact_tmon_probability(&f, &counts, 0, 1e-9)?;
    let chain = TmonChain::new(&f, &counts, 0, 1e-9)?;
    let config = UrnConfig::new(f.clone(), counts.to_vec(), chain.steps, p.seed()?)?;
    let est = monte_carlo(
        |c, rng| chain.run(&c.feedbacks, &c.initial_counts, rng).map(Some),
        &config,
        p.count("replicas")?,
        &mut rng_from(p.seed()?),
    )?;
    let interval = (est.interval.0 - chain.residual, est.interval.1);
    let round3 = |x: f64| (x * 1000.0).round() / 1000.0;
    let checks = vec![
        check("lower bound 0.652", round3(bounds.lower) == 0.652, format!("{}", bounds.lower)),
        check("upper bound 0.714", round3(bounds.upper) == 0.714, format!("{}", bounds.upper)),
        check(
            "exact inside bounds",
            bounds.lower <= exact && exact <= bounds.upper,
            format!("{exact} +- {err}"),
        ),
    ];
    let mut data = Table::new(&["lower", "upper", "exact", "exact_error", "estimate", "ci_lo", "ci_hi", "residual"]);
    data.rows.push(vec![bounds.lower, bounds.upper, exact, err, est.estimate, interval.0, interval.1, chain.residual]);
    Ok(Outcome {
        target: Target::value(exact, err, "exact infinite product"),
        estimate: est.estimate,
        interval,
        p_value: None,
        checks,
        inconclusive: false,
        data,
    })
}

fn dirichlet(p: &Params, counts: [u64; 2], cdf: fn(f64) -> f64, source: &str) -> Result<Outcome> {
    let f = specs("k", 2);
    let steps = p.count("steps")?;
    let xs = replicate(p.count("replicas")?, p.seed()?, |rng| final_share(&f, &counts, steps, rng))?;
    let (d, pv) = ks_test(&xs, cdf)?;
    let mut data = Table::new(&["chi_1"]);
    data.rows = xs.iter().map(|x| vec![*x]).collect();
    let checks = vec![check("KS statistic", true, format!("D = {d}"))];
    Ok(test_outcome(pv, p.get("alpha"), source, checks, data))
}

fn dirichlet_uniform(p: &Params) -> Result<Outcome> {
    dirichlet(p, [1, 1], |x| x.clamp(0.0, 1.0), "Beta(1,1) marginal of the Dirichlet limit")
}

fn dirichlet_beta21(p: &Params) -> Result<Outcome> {
    dirichlet(p, [2, 1], |x| x.clamp(0.0, 1.0).powi(2), "Beta(2,1) marginal of the Dirichlet limit")
}

fn sublinear_limit_sqrt(p: &Params) -> Result<Outcome> {
    let f = vec![parse_feedback("sqrt(k)")?, parse_feedback("2*sqrt(k)")?];
    let target = match limit_shares(&f).verdict {
        LimitVerdict::Deterministic(v) => v[0],
        other => return Err(UrnError::AssumptionViolated(format!("expected deterministic shares, got {other:?}"))),
    };
    let steps = p.count("steps")?;
    let xs = replicate(p.count("replicas")?, p.seed()?, |rng| final_share(&f, &[1, 1], steps, rng))?;
    let (m, ci) = mean_ci(&xs);
    let mut data = Table::new(&["chi_1"]);
    data.rows = xs.iter().map(|x| vec![*x]).collect();
    let checks = vec![
        check("limit is 1/5", (target - 0.2).abs() < 1e-12, format!("{target}")),
        check("mean within 0.02", (m - target).abs() <= 0.02, format!("{m}")),
    ];
    Ok(Outcome {
        target: Target::value(target, 0.02, "alpha_i^(1/(1-beta)) / sum_j alpha_j^(1/(1-beta))"),
        estimate: m,
        interval: ci,
        p_value: None,
        checks,
        inconclusive: false,
        data,
    })
}

fn khanin_variance(p: &Params) -> Result<Outcome> {
    let beta = p.get("beta");
    if !(beta > 0.0 && beta < 0.5) {
        return Err(UrnError::Config("beta must be in (0, 1/2)".into()));
    }
    let f = vec![FeedbackSpec::polynomial(1.0, beta)?; 2];
    let n = p.count("steps")?;
    let replicas = p.count("replicas")?;
    let xs = replicate(replicas, p.seed()?, |rng| {
        let chi = final_share(&f, &[1, 1], n, rng)?;
        Ok((n as f64 + 2.0).sqrt() * (chi - 0.5))
    })?;
    let (_, var) = mean_var(&xs);
    let a = 2.0f64;
    let target = (a - 1.0) / (a.powf(1.0 + 2.0 * beta) * (1.0 - 2.0 * beta));
    let half = Z95 * var * (2.0 / (replicas as f64 - 1.0)).sqrt();
    let mut data = Table::new(&["scaled_deviation"]);
    data.rows = xs.iter().map(|x| vec![*x]).collect();
    let linearized = (a - 1.0) / (a * a * (1.0 - 2.0 * beta));
    let checks = vec![
        check(
            "variance within 15%",
            (var - target).abs() <= 0.15 * target,
            format!("{var} vs {target}"),
        ),
        check(
            "diagnostic: linearized variance (A-1)/(A^2(1-2beta))",
            true,
            format!("{linearized}"),
        ),
    ];
    Ok(Outcome {
        target: Target::value(target, 0.15 * target, "(A-1)/(A^(1+2beta)(1-2beta))"),
        estimate: var,
        interval: (var - half, var + half),
        p_value: None,
        checks,
        inconclusive: false,
        data,
    })
}

fn qvar(p: &Params, f: Vec<FeedbackSpec>, chi0: &[f64], value: f64) -> Result<Outcome> {
    let q = quadratic_variation(&f, chi0, p.get("T"))?;
    let v = q.values[0];
    let err = q.error + q.tail_bound;
    let mut data = Table::new(&["agent", "qvar"]);
    data.rows = q.values.iter().enumerate().map(|(i, v)| vec![(i + 1) as f64, *v]).collect();
    let checks = vec![check("value within 0.002", (v - value).abs() <= 0.002, format!("{v}"))];
    Ok(Outcome {
        target: Target::value(value, 0.002, "reference value"),
        estimate: v,
        interval: (v - err, v + err),
        p_value: None,
        checks,
        inconclusive: false,
        data,
    })
}

fn qvar_sqrt(p: &Params) -> Result<Outcome> {
    qvar(p, specs("sqrt(k)", 3), &[0.8, 0.1, 0.1], 0.2474)
}

fn qvar_square(p: &Params) -> Result<Outcome> {
    qvar(p, specs("k^2", 3), &[0.4, 0.3, 0.3], 0.1908)
}

fn fclt_linear_variance(p: &Params) -> Result<Outcome> {
    let f = specs("k", 2);
    let x = p.get("chi1");
    let paths = p.count("paths")?;
    let mut checks = Vec::new();
    let mut data = Table::new(&["T", "mean_m1_sq", "std_error", "target"]);
    let mut last = (0.0, (0.0, 0.0), 0.0);
    for (k, t) in [1.0, 5.0].into_iter().enumerate() {
        let plan = FcltPlan::new(&f, &[x, 1.0 - x], t, p.get("h"))?;
        let sq = replicate(paths, crate::rng::split(p.seed()?, k as u64), |rng| {
            Ok(plan.sample_final(rng).0[0].powi(2))
        })?;
        let (m, v) = mean_var(&sq);
        let se = (v / paths as f64).sqrt();
        let target = x * (1.0 - x) * (1.0 - 1.0 / (1.0 + t));
        checks.push(check(
            &format!("T = {t} within 3 standard errors"),
            (m - target).abs() <= 3.0 * se,
            format!("{m} vs {target} (se {se})"),
        ));
        data.rows.push(vec![t, m, se, target]);
        last = (m, (m - 3.0 * se, m + 3.0 * se), target);
    }
    Ok(Outcome {
        target: Target::value(last.2, 0.0, "chi_1(1-chi_1)(1-1/(1+T))"),
        estimate: last.0,
        interval: last.1,
        p_value: None,
        checks,
        inconclusive: false,
        data,
    })
}

/// `sup_{t <= T} |chi^(N)(floor(N t)) - Z(t)|` for one replica.
fn lln_distance(f: &[FeedbackSpec], chi0: &[f64], n: u64, t_max: f64, z: &(Vec<f64>, Vec<Vec<f64>>), rng: &mut UrnRng) -> Result<f64> {
    let counts = shares_from_initial(chi0, n)?;
    let (grid, path) = z;
    let h = grid[1] - grid[0];
    let z_at = |t: f64| -> Vec<f64> {
        let i = ((t / h).floor() as usize).min(grid.len() - 2);
        let w = (t - grid[i]) / (grid[i + 1] - grid[i]);
        path[i].iter().zip(&path[i + 1]).map(|(a, b)| a + w * (b - a)).collect()
    };
    let dist = |chi: &[f64], t: f64| chi.iter().zip(z_at(t)).fold(0.0f64, |m, (c, z)| m.max((c - z).abs()));
    let steps = (n as f64 * t_max).floor() as u64;
    let mut state = UrnState::new(f, &counts)?;
    let mut sup: f64 = 0.0;
    for k in 0..=steps {
        let chi = shares(state.counts());
        let t0 = k as f64 / n as f64;
        let t1 = ((k + 1) as f64 / n as f64).min(t_max);
        sup = sup.max(dist(&chi, t0)).max(dist(&chi, t1));
        if k < steps {
            state.step(rng)?;
        }
    }
    Ok(sup)
}

fn lln_convergence(p: &Params) -> Result<Outcome> {
    let f = specs("k^2", 3);
    let chi0 = [0.4, 0.3, 0.3];
    let t_max = p.get("T");
    let ode = integrate_mean_ode(&f, &chi0, t_max, 1e-3)?;
    let z = (ode.t, ode.z);
    let replicas = p.count("replicas")?;
    let mut data = Table::new(&["N", "replica", "sup_distance"]);
    let mut medians = Vec::new();
    for (k, n) in [100u64, 1000, 10_000].into_iter().enumerate() {
        let d = replicate(replicas, crate::rng::split(p.seed()?, k as u64), |rng| {
            lln_distance(&f, &chi0, n, t_max, &z, rng)
        })?;
        for (r, v) in d.iter().enumerate() {
            data.rows.push(vec![n as f64, r as f64, *v]);
        }
        medians.push(median(&d));
    }
    let ratio = medians.windows(2).map(|w| w[1] / w[0]).fold(0.0f64, f64::max);
    let checks = vec![check(
        "medians strictly decrease",
        medians.windows(2).all(|w| w[1] < w[0]),
        format!("{medians:?}"),
    )];
    Ok(Outcome {
        target: Target::region(0.0, 1.0 - 1e-12, "ratio of successive medians below 1"),
        estimate: ratio,
        interval: (ratio, ratio),
        p_value: None,
        checks,
        inconclusive: false,
        data,
    })
}

fn domain_k3_500(p: &Params) -> Result<Outcome> {
    let f = specs("k^3", 3);
    let chi0 = [0.5, 0.3, 0.2];
    let counts = shares_from_initial(&chi0, p.count("N")?)?;
    let domain = classify_domain(&f, &chi0)?;
    let config = UrnConfig::new(f, counts, 0, p.seed()?)?;
    let est = smon_estimate(&config, p.count("replicas")?, &mut rng_from(p.seed()?), p.get("tol"))?;
    let e = &est.per_agent[0];
    let mut data = Table::new(&["agent", "estimate", "ci_lo", "ci_hi"]);
    for (i, a) in est.per_agent.iter().enumerate() {
        data.rows.push(vec![(i + 1) as f64, a.estimate, a.interval.0, a.interval.1]);
    }
    let checks = vec![
        check(
            "chi(0) in the domain of agent 1",
            domain.outcome == DomainOutcome::Agent(0),
            format!("{:?}", domain.outcome),
        ),
        check("estimate >= 0.95", e.estimate >= 0.95, format!("{}", e.estimate)),
    ];
    Ok(Outcome {
        target: Target::region(0.95, 1.0, "attraction-domain prediction"),
        estimate: e.estimate,
        interval: e.interval,
        p_value: None,
        checks,
        inconclusive: false,
        data,
    })
}

fn expdecreasing_limit(p: &Params) -> Result<Outcome> {
    let betas = [1.0, 3.0];
    let target = exp_decreasing_limit(&betas)?[0];
    let alphas = [[1.0, 1.0], [10.0, 0.1], [0.01, 5.0]];
    let steps = p.count("steps")?;
    let replicas = p.count("replicas")?;
    let mut all = Vec::new();
    let mut means = Vec::new();
    let mut data = Table::new(&["alpha_1", "alpha_2", "replica", "chi_1"]);
    for (k, a) in alphas.iter().enumerate() {
        let f = vec![FeedbackSpec::exponential(a[0], -betas[0])?, FeedbackSpec::exponential(a[1], -betas[1])?];
        let xs = replicate(replicas, crate::rng::split(p.seed()?, k as u64), |rng| {
            final_share(&f, &[1, 1], steps, rng)
        })?;
        for (r, x) in xs.iter().enumerate() {
            data.rows.push(vec![a[0], a[1], r as f64, *x]);
        }
        means.push(mean_var(&xs).0);
        all.extend(xs);
    }
    let (m, ci) = mean_ci(&all);
    let spread = means.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - means.iter().cloned().fold(INF, f64::min);
    let checks = vec![
        check("limit is 3/4", (target - 0.75).abs() < 1e-12, format!("{target}")),
        check(
            "every alpha within 0.02",
            means.iter().all(|x| (x - target).abs() <= 0.02),
            format!("{means:?}"),
        ),
        check("alpha invariance (spread <= 0.01)", spread <= 0.01, format!("{spread}")),
    ];
    Ok(Outcome {
        target: Target::value(target, 0.02, "beta_2/(beta_1+beta_2)"),
        estimate: m,
        interval: ci,
        p_value: None,
        checks,
        inconclusive: false,
        data,
    })
}

/// Pools the bins whose expected count under `probs` is below 5.
fn pool_expected(counts: &[u64], probs: &[f64]) -> (Vec<u64>, Vec<f64>) {
    let n: u64 = counts.iter().sum();
    let (mut c, mut q) = (Vec::new(), Vec::new());
    let (mut rest_c, mut rest_q) = (0u64, 0.0);
    for (x, pr) in counts.iter().zip(probs) {
        if pr * n as f64 >= 5.0 {
            c.push(*x);
            q.push(*pr);
        } else {
            rest_c += x;
            rest_q += pr;
        }
    }
    if rest_q > 0.0 || rest_c > 0 {
        c.push(rest_c);
        q.push(rest_q);
    }
    (c, q)
}

/// Pools the bins with fewer than 10 observations over both samples.
fn pool_two(a: &[u64], b: &[u64]) -> (Vec<u64>, Vec<u64>) {
    let (mut x, mut y) = (Vec::new(), Vec::new());
    let (mut rx, mut ry) = (0, 0);
    for (u, v) in a.iter().zip(b) {
        if u + v >= 10 {
            x.push(*u);
            y.push(*v);
        } else {
            rx += u;
            ry += v;
        }
    }
    if rx + ry > 0 {
        x.push(rx);
        y.push(ry);
    }
    (x, y)
}

fn histogram(idx: &[Option<usize>], bins: usize) -> Vec<u64> {
    let mut h = vec![0u64; bins];
    for i in idx.iter().flatten() {
        h[*i] += 1;
    }
    h
}

fn bonferroni(ps: &[f64]) -> f64 {
    (ps.iter().cloned().fold(1.0, f64::min) * ps.len() as f64).min(1.0)
}

const SEQ_LEN: u32 = 5;

fn rubin_equivalence(p: &Params) -> Result<Outcome> {
    let f = vec![parse_feedback("k^2")?, parse_feedback("2*k+1")?];
    let counts = vec![1u64, 2];
    let law = sequence_law(&f, &counts, SEQ_LEN)?;
    let bins = law.len();
    let replicas = p.count("replicas")?;
    let config = UrnConfig::new(f.clone(), counts.clone(), SEQ_LEN as u64, p.seed()?)?;
    let direct = replicate(replicas, crate::rng::split(p.seed()?, 0), |rng| {
        Ok(Some(sequence_index(&simulate(&config, rng)?.winners, 2)))
    })?;
    let jump = replicate(replicas, crate::rng::split(p.seed()?, 1), |rng| {
        let e = simulate_embedding(&config, rng, 1e12)?;
        Ok((e.steps() == SEQ_LEN as usize).then(|| sequence_index(&e.winners, 2)))
    })?;
    let discarded = jump.iter().filter(|x| x.is_none()).count();
    let (hd, hj) = (histogram(&direct, bins), histogram(&jump, bins));
    let (cd, qd) = pool_expected(&hd, &law);
    let (cj, qj) = pool_expected(&hj, &law);
    let (a, b) = pool_two(&hd, &hj);
    let ps = [chi_square_gof(&cd, &qd)?.2, chi_square_gof(&cj, &qj)?.2, chi_square_two_sample(&a, &b)?.2];
    let mut data = Table::new(&["sequence", "exact", "direct", "jump_chain"]);
    for i in 0..bins {
        data.rows.push(vec![i as f64, law[i], hd[i] as f64, hj[i] as f64]);
    }
    let checks = vec![check(
        "component p-values",
        true,
        format!("direct {:.4}, jump {:.4}, two-sample {:.4}; discarded {discarded}", ps[0], ps[1], ps[2]),
    )];
    Ok(test_outcome(bonferroni(&ps), p.get("alpha"), "exact sequence law", checks, data))
}

fn partial_urn_coupling(p: &Params) -> Result<Outcome> {
    let f3 = specs("k", 3);
    let f2 = specs("k", 2);
    let law = sequence_law(&f2, &[1, 1], SEQ_LEN)?;
    let bins = law.len();
    let replicas = p.count("replicas")?;
    let big = UrnConfig::new(f3, vec![1, 1, 1], p.count("horizon")?, p.seed()?)?;
    let small = UrnConfig::new(f2, vec![1, 1], SEQ_LEN as u64, p.seed()?)?;
    let coupled = replicate(replicas, crate::rng::split(p.seed()?, 0), |rng| {
        let e = simulate_embedding(&big, rng, 1e12)?;
        let sub = coupling_subsequence(&e, &[0, 1])?;
        Ok((sub.steps() >= SEQ_LEN as usize).then(|| sequence_index(&sub.winners[..SEQ_LEN as usize], 2)))
    })?;
    let fresh = replicate(replicas, crate::rng::split(p.seed()?, 1), |rng| {
        Ok(Some(sequence_index(&simulate(&small, rng)?.winners, 2)))
    })?;
    let discarded = coupled.iter().filter(|x| x.is_none()).count();
    let (hc, hf) = (histogram(&coupled, bins), histogram(&fresh, bins));
    let (cc, qc) = pool_expected(&hc, &law);
    let (a, b) = pool_two(&hc, &hf);
    let ps = [chi_square_gof(&cc, &qc)?.2, chi_square_two_sample(&a, &b)?.2];
    let mut data = Table::new(&["sequence", "exact", "coupled", "fresh"]);
    for i in 0..bins {
        data.rows.push(vec![i as f64, law[i], hc[i] as f64, hf[i] as f64]);
    }
    let checks = vec![check(
        "component p-values",
        true,
        format!("coupled vs exact {:.4}, coupled vs fresh {:.4}; discarded {discarded}", ps[0], ps[1]),
    )];
    Ok(test_outcome(bonferroni(&ps), p.get("alpha"), "exact 2-agent sequence law", checks, data))
}

pub(super) fn crossval_configs() -> Vec<(Vec<FeedbackSpec>, Vec<u64>)> {
    let f = |s: &str| parse_feedback(s).expect("registry expression");
    vec![
        (vec![f("k^2"), f("k^2")], vec![2, 1]),
        (vec![f("k^3"), f("k^3")], vec![1, 1]),
        (vec![f("k^2"), f("2*k^2")], vec![1, 1]),
        (vec![f("k^2"), f("k^3")], vec![2, 1]),
        (vec![f("k^2"), f("k^2"), f("k^2")], vec![3, 2, 1]),
    ]
}

fn smon_crossval(p: &Params) -> Result<Outcome> {
    let replicas = p.count("replicas")?;
    let horizon = p.count("horizon")?;
    let mut data = Table::new(&[
        "config", "agent", "explosion", "explosion_lo", "explosion_hi", "direct", "direct_bias", "tmon", "p_value",
    ]);
    let mut ps = Vec::new();
    let mut sandwich = Vec::new();
    for (c, (f, counts)) in crossval_configs().into_iter().enumerate() {
        let seed = crate::rng::split(p.seed()?, c as u64);
        let config = UrnConfig::new(f.clone(), counts.clone(), 0, seed)?;
        let est = smon_estimate(&config, replicas, &mut rng_from(seed), p.get("tol"))?;
        let runs = replicate(replicas, crate::rng::split(seed, 1), |rng| smon_direct(&f, &counts, horizon, rng))?;
        let bias = runs.iter().map(|r| r.residual).sum::<f64>() / replicas as f64;
        let tmon: Vec<f64> = (0..f.len())
            .map(|i| exact_tmon_probability(&f, &counts, i, 1e-6).map(|v| v.0))
            .collect::<Result<_>>()?;
        for i in 0..f.len() {
            let e = &est.per_agent[i];
            let d = runs.iter().filter(|r| r.winner == i).count() as f64 / replicas as f64;
            let se = (e.estimate * (1.0 - e.estimate) / e.replicas as f64 + d * (1.0 - d) / replicas as f64).sqrt();
            let excess = ((e.estimate - d).abs() - bias).max(0.0);
            let pv = if excess == 0.0 {
                1.0
            } else if se == 0.0 {
                0.0
            } else {
                erfc(excess / se / std::f64::consts::SQRT_2)
            };
            ps.push(pv);
            let hi = 1.0 - (0..f.len()).filter(|j| *j != i).map(|j| tmon[j]).sum::<f64>();
            sandwich.push((c, i, e.interval.0 <= hi + 1e-6 && e.interval.1 >= tmon[i] - 1e-6));
            data.rows.push(vec![c as f64, i as f64, e.estimate, e.interval.0, e.interval.1, d, bias, tmon[i], pv]);
        }
    }
    let bad: Vec<(usize, usize)> = sandwich.iter().filter(|s| !s.2).map(|s| (s.0, s.1)).collect();
    let checks = vec![check(
        "explosion estimate inside [P(tMon_i), 1 - sum_j P(tMon_j)]",
        bad.is_empty(),
        format!("violations (config, agent): {bad:?}"),
    )];
    Ok(test_outcome(bonferroni(&ps), p.get("alpha"), "agreement of two estimators", checks, data))
}
