//! Monte Carlo oracle for the CGF of the centred explosion-time sum.

use feedback_urn::asymptotics::cgf_u;
use feedback_urn::feedback::{tail_sum, FeedbackSpec};
use feedback_urn::rng::child_rng;
use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;

#[test]
fn series_matches_simulated_cgf() {
    let f = FeedbackSpec::log_linear(1.0, 1.0).unwrap();
    let (x0, lam) = (2u64, 0.5);
    let k0 = 1000u64;
    let means: Vec<f64> = (x0..x0 + k0).map(|k| (-f.ln_f(k as f64)).exp()).collect();
    let replicas = 100_000u64;
    let draws: Vec<f64> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let mut rng = child_rng(21, r);
            let u: f64 = means.iter().map(|m| (rng.sample::<f64, _>(Exp1) - 1.0) * m).sum();
            (lam * u).exp()
        })
        .collect();
    let n = replicas as f64;
    let mean = draws.iter().sum::<f64>() / n;
    let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let se = (var / n).sqrt() / mean;
    // Terms beyond k0 are near-Gaussian with variance sum 1/F^2.
    let tail_var = tail_sum(&f, x0 + k0, 2, 1e-12).unwrap().value().unwrap();
    let simulated = mean.ln() + 0.5 * lam * lam * tail_var;
    let rep = cgf_u(&f, x0, &[lam], 4).unwrap();
    let series = rep.evaluation[0].1;
    assert!((series - simulated).abs() <= 3.0 * se, "{series} vs {simulated} (se {se})");
}

#[test]
fn cgf_is_centred() {
    let f = FeedbackSpec::log_linear(1.0, 1.0).unwrap();
    let h = 1e-3;
    let rep = cgf_u(&f, 2, &[0.0, -h, h], 3).unwrap();
    assert_eq!(rep.evaluation[0].1, 0.0);
    let slope = (rep.evaluation[2].1 - rep.evaluation[1].1) / (2.0 * h);
    assert!(slope.abs() < 1e-6, "{slope}");
    let sigma2 = tail_sum(&f, 2, 2, 1e-14).unwrap().value().unwrap();
    assert!((rep.cumulants[0].1 - sigma2).abs() <= 1e-12 * sigma2);
}
