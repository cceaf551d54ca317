//! The drift field `G(k, x) = p(k, x) - x` and its `k -> inf` limit.

use serde::{Deserialize, Serialize};

use crate::asymptotics::expansion::{self, compare, Cmp, Expansion};
use crate::error::{Result, UrnError};
use crate::feedback::FeedbackSpec;

/// Sampling points `k` used to certify a numeric limit for custom specs.
const NUMERIC_K: [f64; 3] = [1.073_741_824e9, 3.435_973_836_8e10, 1.099_511_627_776e12];

#[derive(Debug, Clone)]
enum AgentField {
    Symbolic(Expansion),
    Numeric,
}

/// The limit field `p(x) = lim_k F_i(x_i k) / sum_j F_j(x_j k)`.
#[derive(Debug, Clone)]
pub struct LimitField {
    feedbacks: Vec<FeedbackSpec>,
    agents: Vec<AgentField>,
}

fn softmax(lw: &[f64]) -> Option<Vec<f64>> {
    let m = lw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return None;
    }
    let w: Vec<f64> = lw.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = w.iter().sum();
    Some(w.into_iter().map(|v| v / s).collect())
}

fn check_simplex(x: &[f64], a: usize) -> Result<()> {
    let s: f64 = x.iter().sum();
    if x.len() != a || x.iter().any(|v| !(*v >= 0.0)) || (s - 1.0).abs() > 1e-9 {
        return Err(UrnError::Config(format!("{x:?} is not a point of the closed simplex")));
    }
    Ok(())
}

impl LimitField {
    pub fn new(feedbacks: &[FeedbackSpec]) -> Result<Self> {
        if feedbacks.len() < 2 {
            return Err(UrnError::Config("need at least two agents".into()));
        }
        let agents = feedbacks
            .iter()
            .map(|f| match expansion::ln_f(f) {
                Some(e) => AgentField::Symbolic(e),
                None => AgentField::Numeric,
            })
            .collect();
        Ok(LimitField {
            feedbacks: feedbacks.to_vec(),
            agents,
        })
    }

    pub fn agents(&self) -> usize {
        self.feedbacks.len()
    }

    /// `p(k, x)` for real `k > 0`.
    pub fn p_finite(&self, k: f64, x: &[f64]) -> Result<Vec<f64>> {
        check_simplex(x, self.agents())?;
        let lw: Vec<f64> = self.feedbacks.iter().zip(x).map(|(f, xi)| f.ln_f(xi * k)).collect();
        softmax(&lw).ok_or_else(|| UrnError::Domain {
            k,
            msg: "no agent has positive weight".into(),
        })
    }

    /// `p(x)`; fails where the limit jumps.
    pub fn p(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_simplex(x, self.agents())?;
        if self.agents.iter().any(|a| matches!(a, AgentField::Numeric)) {
            return self.p_numeric(x);
        }
        let keys: Vec<Option<Expansion>> = self
            .agents
            .iter()
            .zip(x)
            .map(|(a, xi)| {
                let AgentField::Symbolic(e) = a else { unreachable!() };
                if *xi > 0.0 {
                    Some(e.scaled(*xi))
                } else if e.pow.is_empty() && e.ln == 0.0 && e.lnln == 0.0 {
                    Some(e.clone())
                } else {
                    None
                }
            })
            .collect();
        let mut top: Option<usize> = None;
        for (i, k) in keys.iter().enumerate() {
            let Some(k) = k else { continue };
            top = match top {
                Some(t) if !matches!(compare(k, keys[t].as_ref().unwrap()), Cmp::Diverges(std::cmp::Ordering::Greater)) => Some(t),
                _ => Some(i),
            };
        }
        let t = top.ok_or_else(|| UrnError::LimitUndefined("no agent has positive weight".into()))?;
        let kt = keys[t].as_ref().unwrap();
        let mut lw = vec![f64::NEG_INFINITY; x.len()];
        let mut group = 0;
        let mut diverging = false;
        for (i, k) in keys.iter().enumerate() {
            let Some(k) = k else { continue };
            if let Cmp::Finite(d) = compare(k, kt) {
                lw[i] = d;
                group += 1;
                diverging |= k.pow.iter().any(|(_, c)| *c != 0.0);
            }
        }
        if group > 1 && diverging {
            return Err(UrnError::LimitUndefined(format!(
                "exponential scales tie at {x:?}; the limit field jumps there"
            )));
        }
        Ok(softmax(&lw).expect("top agent has finite weight"))
    }

    fn p_numeric(&self, x: &[f64]) -> Result<Vec<f64>> {
        let rows: Vec<Vec<f64>> = NUMERIC_K.iter().map(|k| self.p_finite(*k, x)).collect::<Result<_>>()?;
        let last = &rows[2];
        let settled = rows[..2]
            .iter()
            .all(|r| r.iter().zip(last).all(|(a, b)| (a - b).abs() <= 1e-6));
        if settled {
            Ok(last.clone())
        } else {
            Err(UrnError::LimitUndefined(format!("p(k, x) does not settle at x = {x:?}")))
        }
    }

    /// `G(x) = p(x) - x`.
    pub fn g(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.p(x)?.iter().zip(x).map(|(p, x)| p - x).collect())
    }

    /// Directional derivatives `D_j = (d/dx_j - d/dx_r) G(x)` for `j != r`,
    /// with `r` the largest coordinate; column `r` of the result is zero.
    /// For a tangent vector `v`, `DG(x) v = sum_j v_j D_j`.
    pub fn jacobian(&self, x: &[f64]) -> Result<Jacobian> {
        const EPS: f64 = 1e-6;
        let a = x.len();
        let r = (0..a).max_by(|i, j| x[*i].total_cmp(&x[*j])).unwrap();
        let g0 = self.g(x)?;
        let mut cols = vec![vec![0.0; a]; a];
        for j in (0..a).filter(|j| *j != r) {
            let shift = |s: f64| {
                let mut y = x.to_vec();
                y[j] += s;
                y[r] -= s;
                y
            };
            let fwd = self.g(&shift(EPS))?;
            cols[j] = if x[j] >= EPS {
                let bwd = self.g(&shift(-EPS))?;
                fwd.iter().zip(&bwd).map(|(f, b)| (f - b) / (2.0 * EPS)).collect()
            } else {
                fwd.iter().zip(&g0).map(|(f, g)| (f - g) / EPS).collect()
            };
        }
        Ok(Jacobian { reference: r, cols })
    }
}

/// Tangent-space derivative of the limit field at a point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Jacobian {
    pub reference: usize,
    /// `cols[j] = D_j`; `cols[reference] = 0`.
    pub cols: Vec<Vec<f64>>,
}

impl Jacobian {
    /// `DG v` for a tangent vector `v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let a = v.len();
        let mut out = vec![0.0; a];
        for (j, col) in self.cols.iter().enumerate() {
            if j == self.reference {
                continue;
            }
            for i in 0..a {
                out[i] += v[j] * col[i];
            }
        }
        let mean = out.iter().sum::<f64>() / a as f64;
        out.iter_mut().for_each(|o| *o -= mean);
        out
    }

    /// The `(A-1) x (A-1)` matrix in the basis `e_j - e_r`.
    pub fn restricted(&self) -> nalgebra::DMatrix<f64> {
        let idx: Vec<usize> = (0..self.cols.len()).filter(|j| *j != self.reference).collect();
        nalgebra::DMatrix::from_fn(idx.len(), idx.len(), |i, j| self.cols[idx[j]][idx[i]])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorFieldEval {
    pub x: Vec<f64>,
    pub k: Option<f64>,
    pub g_k: Option<Vec<f64>>,
    pub p_lim: Option<Vec<f64>>,
    pub g_lim: Option<Vec<f64>>,
}

/// `G(k, x)` for finite `k`, and the limit field at `x`. With `k = None`
/// the limit is required and its failure is an error.
pub fn vector_field(feedbacks: &[FeedbackSpec], k: Option<f64>, x: &[f64]) -> Result<VectorFieldEval> {
    let field = LimitField::new(feedbacks)?;
    let g_k = match k {
        Some(k) if !(k > 0.0) => return Err(UrnError::Config("k must be > 0".into())),
        Some(k) => Some(field.p_finite(k, x)?.iter().zip(x).map(|(p, x)| p - x).collect()),
        None => None,
    };
    let p_lim = match field.p(x) {
        Ok(p) => Some(p),
        Err(e) if k.is_none() => return Err(e),
        Err(_) => None,
    };
    let g_lim = p_lim.as_ref().map(|p| p.iter().zip(x).map(|(p, x)| p - x).collect());
    Ok(VectorFieldEval {
        x: x.to_vec(),
        k,
        g_k,
        p_lim,
        g_lim,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stability {
    Stable,
    Unstable,
    Marginal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub x: Vec<f64>,
    pub residual: f64,
    pub stability: Stability,
    pub eigen_real: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointReport {
    pub points: Vec<FixedPoint>,
    /// Every probe is a zero of `G` (for instance linear feedback).
    pub continuum: bool,
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn newton(field: &LimitField, seed: &[f64]) -> Option<(Vec<f64>, f64)> {
    let mut x = seed.to_vec();
    for _ in 0..100 {
        let g = field.g(&x).ok()?;
        let res = sup(&g);
        if res < 1e-13 {
            return Some((x, res));
        }
        let jac = field.jacobian(&x).ok()?;
        let idx: Vec<usize> = (0..x.len()).filter(|j| *j != jac.reference).collect();
        let rhs = nalgebra::DVector::from_iterator(idx.len(), idx.iter().map(|i| -g[*i]));
        let step = jac.restricted().lu().solve(&rhs)?;
        let mut scale = 1.0;
        loop {
            let mut y = x.clone();
            for (n, j) in idx.iter().enumerate() {
                y[*j] += scale * step[n];
                y[jac.reference] -= scale * step[n];
            }
            if y.iter().all(|v| *v >= 0.0) {
                let improved = field.g(&y).map(|gy| sup(&gy) < res).unwrap_or(false);
                if improved || scale < 1e-6 {
                    x = y;
                    break;
                }
            }
            scale *= 0.5;
            if scale < 1e-12 {
                return None;
            }
        }
    }
    let res = sup(&field.g(&x).ok()?);
    (res < 1e-10).then_some((x, res))
}

fn seeds(a: usize) -> Vec<Vec<f64>> {
    use rand::Rng;
    use rand_distr::Exp1;
    let mut out = Vec::new();
    for i in 0..a {
        let mut v = vec![0.0; a];
        v[i] = 1.0;
        out.push(v);
    }
    out.push(vec![1.0 / a as f64; a]);
    for i in 0..a {
        for j in i + 1..a {
            let mut v = vec![0.0; a];
            v[i] = 0.5;
            v[j] = 0.5;
            out.push(v);
        }
    }
    let mut rng = crate::rng::rng_from(0x5eed);
    for _ in 0..100 {
        let e: Vec<f64> = (0..a).map(|_| rng.sample::<f64, _>(Exp1)).collect();
        let s: f64 = e.iter().sum();
        out.push(e.iter().map(|v| v / s).collect());
    }
    out
}

/// Zeros of the limit field from a multistart Newton search, with their
/// stability from the tangent Jacobian's eigenvalues.
pub fn fixed_points(feedbacks: &[FeedbackSpec], tol: f64) -> Result<FixedPointReport> {
    let field = LimitField::new(feedbacks)?;
    let probes = seeds(feedbacks.len());
    let zero_everywhere = probes
        .iter()
        .all(|x| field.g(x).map(|g| sup(&g) < 1e-12).unwrap_or(false));
    if zero_everywhere {
        return Ok(FixedPointReport {
            points: Vec::new(),
            continuum: true,
        });
    }
    let mut points: Vec<FixedPoint> = Vec::new();
    for s in &probes {
        let Some((x, residual)) = newton(&field, s) else { continue };
        if points.iter().any(|p| p.x.iter().zip(&x).all(|(a, b)| (a - b).abs() < 1e-8)) {
            continue;
        }
        let Ok(jac) = field.jacobian(&x) else { continue };
        let eigen_real: Vec<f64> = jac.restricted().complex_eigenvalues().iter().map(|c| c.re).collect();
        let stability = if eigen_real.iter().all(|r| *r < -tol) {
            Stability::Stable
        } else if eigen_real.iter().any(|r| *r > tol) {
            Stability::Unstable
        } else {
            Stability::Marginal
        };
        points.push(FixedPoint {
            x,
            residual,
            stability,
            eigen_real,
        });
    }
    points.sort_by(|a, b| a.x.iter().zip(&b.x).map(|(u, v)| v.total_cmp(u)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal));
    Ok(FixedPointReport {
        points,
        continuum: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feedback::parse_feedback;

    fn poly(beta: f64, a: usize) -> Vec<FeedbackSpec> {
        vec![FeedbackSpec::polynomial(1.0, beta).unwrap(); a]
    }

    #[test]
    fn field_examples() {
        let v = vector_field(&poly(1.0, 3), None, &[0.2, 0.3, 0.5]).unwrap();
        assert!(sup(v.g_lim.as_ref().unwrap()) < 1e-15);
        let v = vector_field(&poly(2.0, 3), None, &[1.0 / 3.0; 3]).unwrap();
        assert!(sup(v.g_lim.as_ref().unwrap()) < 1e-15);
        let v = vector_field(&poly(0.5, 2), None, &[0.25, 0.75]).unwrap();
        let g1 = 0.5 / (0.5 + 0.75f64.sqrt()) - 0.25;
        assert!((v.g_lim.unwrap()[0] - g1).abs() < 1e-12);
        assert!((g1 - 0.11603).abs() < 1e-4);
        let v = vector_field(&poly(2.0, 3), None, &[0.5, 0.3, 0.2]).unwrap();
        assert!((v.g_lim.as_ref().unwrap()[0] - (0.25 / 0.38 - 0.5)).abs() < 1e-12);
        let s: f64 = v.g_lim.unwrap().iter().sum();
        assert!(s.abs() < 1e-12);
    }

    #[test]
    fn exponential_field_jumps_on_ties() {
        let f = vec![FeedbackSpec::exponential(1.0, 1.0).unwrap(); 2];
        let v = vector_field(&f, None, &[0.6, 0.4]).unwrap();
        assert_eq!(v.p_lim.unwrap(), vec![1.0, 0.0]);
        assert!(matches!(vector_field(&f, None, &[0.5, 0.5]), Err(UrnError::LimitUndefined(_))));
        let v = vector_field(&f, Some(10.0), &[0.5, 0.5]).unwrap();
        assert!(v.g_lim.is_none() && v.g_k.is_some());
    }

    #[test]
    fn custom_limit_matches_builtin() {
        let f = vec![parse_feedback("k^2+k").unwrap(), parse_feedback("k^2").unwrap()];
        let p = LimitField::new(&f).unwrap().p(&[0.4, 0.6]).unwrap();
        assert!((p[0] - 0.16 / 0.52).abs() < 1e-6);
    }

    #[test]
    fn jacobian_matches_polynomial_derivative() {
        // dp_i/dx_j = beta p_i (delta_ij - p_j) / x_j for p_i = x_i^b / sum x^b.
        let beta = 2.0;
        let f = poly(beta, 3);
        let x = [0.5, 0.3, 0.2];
        let field = LimitField::new(&f).unwrap();
        let p = field.p(&x).unwrap();
        let jac = field.jacobian(&x).unwrap();
        let r = jac.reference;
        let dp = |i: usize, j: usize| beta * p[i] * (if i == j { 1.0 } else { 0.0 } - p[j]) / x[j];
        for j in (0..3).filter(|j| *j != r) {
            for i in 0..3 {
                let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
                let exact = dp(i, j) - dp(i, r) - (delta(i, j) - delta(i, r));
                assert!((jac.cols[j][i] - exact).abs() <= 1e-6 * exact.abs().max(1.0), "{i}{j}");
            }
        }
    }

    #[test]
    fn fixed_point_examples() {
        let rep = fixed_points(&poly(0.5, 2), 1e-6).unwrap();
        let stable: Vec<&FixedPoint> = rep.points.iter().filter(|p| p.stability == Stability::Stable).collect();
        assert_eq!(stable.len(), 1);
        assert!((stable[0].x[0] - 0.5).abs() < 1e-9);
        let rep = fixed_points(&poly(2.0, 2), 1e-6).unwrap();
        let kinds: Vec<(f64, Stability)> = rep.points.iter().map(|p| (p.x[0], p.stability)).collect();
        assert_eq!(kinds.len(), 3, "{kinds:?}");
        for (x0, s) in kinds {
            if (x0 - 0.5).abs() < 1e-9 {
                assert_eq!(s, Stability::Unstable);
            } else {
                assert!(x0 == 0.0 || x0 == 1.0);
                assert_eq!(s, Stability::Stable);
            }
        }
        assert!(rep.points.iter().all(|p| p.residual < 1e-10));
        let rep = fixed_points(&poly(1.0, 3), 1e-6).unwrap();
        assert!(rep.continuum);
    }
}
