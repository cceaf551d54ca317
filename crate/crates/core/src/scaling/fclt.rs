//! The fluctuation limit: diffusion `M`, drift correction `H`, and the
//! `N^beta` time-scale limits.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::field::{Jacobian, LimitField};
use super::ode::integrate_mean_ode;
use super::ScalingPath;
use crate::error::{Result, UrnError};
use crate::feedback::FeedbackSpec;
use crate::rng::UrnRng;
use crate::urn::{shares, shares_from_initial, UrnConfig, UrnState};

/// The mean path and its derivatives on a grid, shared by every sample.
#[derive(Debug, Clone)]
pub struct FcltPlan {
    pub path: ScalingPath,
    p: Vec<Vec<f64>>,
    jac: Vec<Jacobian>,
}

impl FcltPlan {
    pub fn new(feedbacks: &[FeedbackSpec], chi0: &[f64], t_max: f64, h: f64) -> Result<Self> {
        let path = integrate_mean_ode(feedbacks, chi0, t_max, h)?;
        let field = LimitField::new(feedbacks)?;
        let p = path.z.iter().map(|z| field.p(z)).collect::<Result<Vec<_>>>()?;
        let jac = path.z.iter().map(|z| field.jacobian(z)).collect::<Result<Vec<_>>>()?;
        Ok(FcltPlan { path, p, jac })
    }

    fn run(&self, rng: &mut UrnRng, mut visit: impl FnMut(usize, &[f64], &[f64])) {
        let t = &self.path.t;
        let a = self.path.agents();
        let mut m = vec![0.0; a];
        let mut hh = vec![0.0; a];
        visit(0, &m, &hh);
        for n in 0..t.len() - 1 {
            let dt = t[n + 1] - t[n];
            let drive: Vec<f64> = m.iter().zip(&hh).map(|(m, h)| m + h).collect();
            let dh = self.jac[n].apply(&drive);
            for i in 0..a {
                hh[i] += dt * dh[i] / (1.0 + t[n]);
            }
            // int_{t_n}^{t_{n+1}} (1+s)^-2 ds, so the variance sums exactly.
            let c = (dt / ((1.0 + t[n]) * (1.0 + t[n + 1]))).sqrt();
            let p = &self.p[n];
            for i in 0..a {
                for j in i + 1..a {
                    let z: f64 = rng.sample(StandardNormal);
                    let d = (p[i] * p[j]).sqrt() * c * z;
                    m[i] += d;
                    m[j] -= d;
                }
            }
            visit(n + 1, &m, &hh);
        }
    }

    /// One path of `(M, H, Ztilde)` over the mean path.
    pub fn sample(&self, rng: &mut UrnRng, seed: Option<u64>) -> ScalingPath {
        let len = self.path.t.len();
        let mut out = self.path.clone();
        out.m = Vec::with_capacity(len);
        out.h_path = Vec::with_capacity(len);
        out.ztilde = Vec::with_capacity(len);
        out.seed = seed;
        self.run(rng, |_, m, h| {
            out.m.push(m.to_vec());
            out.h_path.push(h.to_vec());
            out.ztilde.push(m.iter().zip(h).map(|(m, h)| m + h).collect());
        });
        out
    }

    /// `(M(T), H(T))` without storing the path.
    pub fn sample_final(&self, rng: &mut UrnRng) -> (Vec<f64>, Vec<f64>) {
        let last = self.path.t.len() - 1;
        let mut res = (Vec::new(), Vec::new());
        self.run(rng, |n, m, h| {
            if n == last {
                res = (m.to_vec(), h.to_vec());
            }
        });
        res
    }
}

/// Euler-Maruyama for `M` driven by one Brownian motion per unordered pair
/// of agents, Euler for `H` with drift `DG(Z)(H + M)/(1+t)`.
pub fn simulate_fclt(feedbacks: &[FeedbackSpec], chi0: &[f64], t_max: f64, h: f64, rng: &mut UrnRng) -> Result<ScalingPath> {
    let plan = FcltPlan::new(feedbacks, chi0, t_max, h)?;
    let seed = rng.random::<u64>();
    Ok(plan.sample(&mut crate::rng::rng_from(seed), Some(seed)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BetaRegime {
    /// `beta > 2/3`: the second-order term is the deterministic curve.
    DeterministicCurve,
    /// `beta = 2/3`: curve plus Brownian motion.
    CurvePlusDiffusion,
    /// `beta < 2/3`: Brownian motion only.
    DiffusionOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaRow {
    pub t: f64,
    /// `N^(1-beta) (chi(floor(N^beta t)) - chi(0))`.
    pub rescaled: Vec<f64>,
    /// `G(chi(0)) t`.
    pub lln: Vec<f64>,
    /// `N^gamma (rescaled - G(chi(0)) t)`.
    pub second_order: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaScaling {
    pub beta: f64,
    pub n: u64,
    pub t_max: f64,
    /// Shares of the rounded initial counts.
    pub chi0: Vec<f64>,
    /// Slope of the law-of-large-numbers line.
    pub g: Vec<f64>,
    /// `c` in the second-order curve `c t^2`, `c = DG(chi0) G(chi0) / 2`.
    pub curve: Vec<f64>,
    pub regime: BetaRegime,
    /// Exponent of the second-order rescaling.
    pub gamma: f64,
    /// Brownian covariance `p_i (delta_ij - p_j)`.
    pub covariance: Vec<Vec<f64>>,
    pub rows: Vec<BetaRow>,
}

const MAX_ROWS: u64 = 1000;

/// Limits on the time scale `N^beta`, together with one simulated urn path
/// from `N` initial balls rescaled for comparison.
pub fn beta_scaling(
    feedbacks: &[FeedbackSpec],
    chi0: &[f64],
    beta: f64,
    n: u64,
    t_max: f64,
    rng: &mut UrnRng,
) -> Result<BetaScaling> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(UrnError::Config(format!("beta = {beta} is not in (0, 1)")));
    }
    if !(t_max > 0.0) || !t_max.is_finite() {
        return Err(UrnError::Config("T must be finite and > 0".into()));
    }
    let counts = shares_from_initial(chi0, n)?;
    let x0 = shares(&counts);
    let field = LimitField::new(feedbacks)?;
    let p = field.p(&x0)?;
    let g: Vec<f64> = p.iter().zip(&x0).map(|(p, x)| p - x).collect();
    let curve: Vec<f64> = field.jacobian(&x0)?.apply(&g).iter().map(|v| 0.5 * v).collect();
    let (regime, gamma) = if (beta - 2.0 / 3.0).abs() < 1e-12 {
        (BetaRegime::CurvePlusDiffusion, 1.0 / 3.0)
    } else if beta > 2.0 / 3.0 {
        (BetaRegime::DeterministicCurve, 1.0 - beta)
    } else {
        (BetaRegime::DiffusionOnly, beta / 2.0)
    };
    let a = x0.len();
    let covariance = (0..a)
        .map(|i| (0..a).map(|j| if i == j { p[i] * (1.0 - p[i]) } else { -p[i] * p[j] }).collect())
        .collect();
    let nf = n as f64;
    let scale = nf.powf(beta);
    let steps = (scale * t_max).floor() as u64;
    let config = UrnConfig::new(feedbacks.to_vec(), counts.clone(), steps, 0)?;
    let mut state = UrnState::new(&config.feedbacks, &counts)?;
    let stride = steps.div_ceil(MAX_ROWS).max(1);
    let row = |k: u64, c: &[u64]| {
        let t = k as f64 / scale;
        let chi = shares(c);
        let rescaled: Vec<f64> = chi.iter().zip(&x0).map(|(c, x)| nf.powf(1.0 - beta) * (c - x)).collect();
        let lln: Vec<f64> = g.iter().map(|g| g * t).collect();
        let second_order = rescaled.iter().zip(&lln).map(|(r, l)| nf.powf(gamma) * (r - l)).collect();
        BetaRow {
            t,
            rescaled,
            lln,
            second_order,
        }
    };
    let mut rows = vec![row(0, &counts)];
    for k in 1..=steps {
        state.step(rng)?;
        if k % stride == 0 || k == steps {
            rows.push(row(k, state.counts()));
        }
    }
    Ok(BetaScaling {
        beta,
        n,
        t_max,
        chi0: x0,
        g,
        curve,
        regime,
        gamma,
        covariance,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;

    fn poly(beta: f64, a: usize) -> Vec<FeedbackSpec> {
        vec![FeedbackSpec::polynomial(1.0, beta).unwrap(); a]
    }

    #[test]
    fn paths_stay_in_tangent_space() {
        let p = simulate_fclt(&poly(0.5, 3), &[0.5, 0.3, 0.2], 5.0, 1e-2, &mut rng_from(1)).unwrap();
        for n in 0..p.t.len() {
            assert!(p.m[n].iter().sum::<f64>().abs() < 1e-12);
            assert!(p.h_path[n].iter().sum::<f64>().abs() < 1e-12);
            assert!(p.ztilde[n].iter().sum::<f64>().abs() < 1e-12);
        }
        for w in p.qvar.windows(2) {
            assert!(w[0].iter().zip(&w[1]).all(|(a, b)| a <= b && *b < 0.25));
        }
    }

    #[test]
    fn same_seed_same_path() {
        let f = poly(2.0, 3);
        let a = simulate_fclt(&f, &[0.4, 0.3, 0.3], 2.0, 1e-2, &mut rng_from(7)).unwrap();
        let b = simulate_fclt(&f, &[0.4, 0.3, 0.3], 2.0, 1e-2, &mut rng_from(7)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn exponential_inside_domain_has_no_diffusion() {
        let f = vec![FeedbackSpec::exponential(1.0, 1.0).unwrap(); 2];
        let p = simulate_fclt(&f, &[0.7, 0.3], 5.0, 1e-2, &mut rng_from(2)).unwrap();
        assert!(p.m.iter().all(|m| m.iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn linear_variance_matches_bracket() {
        let plan = FcltPlan::new(&poly(1.0, 2), &[0.3, 0.7], 4.0, 1e-2).unwrap();
        let paths = 4000;
        let mut rng = rng_from(3);
        let sq: Vec<f64> = (0..paths).map(|_| plan.sample_final(&mut rng).0[0].powi(2)).collect();
        let (mean, var) = crate::stats::mean_var(&sq);
        let target = 0.21 * (1.0 - 1.0 / 5.0);
        assert!((mean - target).abs() < 3.0 * (var / paths as f64).sqrt(), "{mean} {target}");
    }

    #[test]
    fn beta_scaling_examples() {
        let r = beta_scaling(&poly(2.0, 3), &[0.5, 0.3, 0.2], 0.8, 1000, 1.0, &mut rng_from(4)).unwrap();
        assert!((r.g[0] - (0.25 / 0.38 - 0.5)).abs() < 1e-12);
        assert!((r.g[0] - 0.15789).abs() < 1e-5);
        assert_eq!(r.regime, BetaRegime::DeterministicCurve);
        assert!((r.gamma - 0.2).abs() < 1e-12);
        assert!(r.rows.len() <= 1001 && r.rows[0].t == 0.0);
        let row: f64 = r.covariance[0].iter().sum();
        assert!(row.abs() < 1e-12);
        let r = beta_scaling(&poly(1.0, 2), &[0.5, 0.5], 0.5, 10_000, 1.0, &mut rng_from(5)).unwrap();
        assert_eq!(r.regime, BetaRegime::DiffusionOnly);
        assert!(r.g.iter().chain(&r.curve).all(|v| v.abs() < 1e-9));
    }
}
