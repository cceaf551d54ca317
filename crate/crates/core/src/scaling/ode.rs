//! The mean-field ODE `dZ/dt = G(Z)/(1+t)` and the quadratic variation of
//! the limiting diffusion.

use serde::{Deserialize, Serialize};

use super::field::LimitField;
use super::ScalingPath;
use crate::error::{Result, UrnError};
use crate::feedback::FeedbackSpec;
use crate::urn::check_open_simplex;

const MAX_CLAMP: f64 = 1e-6;

/// Clamps negatives to zero and renormalizes; returns the largest clamp.
pub(crate) fn project(x: &mut [f64]) -> f64 {
    let mut clamp: f64 = 0.0;
    for v in x.iter_mut() {
        if *v < 0.0 {
            clamp = clamp.max(-*v);
            *v = 0.0;
        }
    }
    let s: f64 = x.iter().sum();
    x.iter_mut().for_each(|v| *v /= s);
    clamp
}

fn g_at(field: &LimitField, x: &[f64]) -> Result<Vec<f64>> {
    let mut y = x.to_vec();
    project(&mut y);
    let p = field.p(&y)?;
    Ok(p.iter().zip(x).map(|(p, x)| p - x).collect())
}

fn axpy(x: &[f64], a: f64, d: &[f64]) -> Vec<f64> {
    x.iter().zip(d).map(|(x, d)| x + a * d).collect()
}

/// One RK4 step of `dx/dt = scale(t) G(x)`.
fn rk4(field: &LimitField, x: &[f64], t: f64, h: f64, scale: impl Fn(f64) -> f64) -> Result<Vec<f64>> {
    let k1: Vec<f64> = g_at(field, x)?.iter().map(|v| v * scale(t)).collect();
    let k2: Vec<f64> = g_at(field, &axpy(x, h / 2.0, &k1))?.iter().map(|v| v * scale(t + h / 2.0)).collect();
    let k3: Vec<f64> = g_at(field, &axpy(x, h / 2.0, &k2))?.iter().map(|v| v * scale(t + h / 2.0)).collect();
    let k4: Vec<f64> = g_at(field, &axpy(x, h, &k3))?.iter().map(|v| v * scale(t + h)).collect();
    Ok((0..x.len())
        .map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

pub(crate) fn grid(t_max: f64, h: f64) -> Result<Vec<f64>> {
    if !(t_max >= 0.0) || !t_max.is_finite() || !(h > 0.0) {
        return Err(UrnError::Config(format!("need finite T >= 0 and h > 0, got T = {t_max}, h = {h}")));
    }
    let steps = (t_max / h - 1e-9).ceil().max(0.0) as usize;
    let mut t: Vec<f64> = (0..steps).map(|n| n as f64 * h).collect();
    t.push(t_max);
    Ok(t)
}

fn p_var(p: &[f64]) -> Vec<f64> {
    p.iter().map(|p| p * (1.0 - p)).collect()
}

/// Integrates `Z` with RK4 on `[0, T]`, the homogeneous `dY/ds = G(Y)` on
/// the grid `s_n = log(1 + t_n)`, and `<M_i>` along `Z`.
///
/// Fails with `StepFailure` when a step has to clamp more than `1e-6` or
/// when `max_n |Z(t_n) - Y(s_n)|` exceeds `10 h^4 (1 + T)`.
pub fn integrate_mean_ode(feedbacks: &[FeedbackSpec], chi0: &[f64], t_max: f64, h: f64) -> Result<ScalingPath> {
    check_open_simplex(chi0)?;
    if feedbacks.len() != chi0.len() {
        return Err(UrnError::Config("feedbacks and shares differ in length".into()));
    }
    let field = LimitField::new(feedbacks)?;
    let t = grid(t_max, h)?;
    let a = chi0.len();
    let mut z = vec![chi0.to_vec()];
    let mut y = vec![chi0.to_vec()];
    let mut qvar = vec![vec![0.0; a]];
    let mut max_clamp: f64 = 0.0;
    let mut reparam_error: f64 = 0.0;
    for n in 0..t.len() - 1 {
        let dt = t[n + 1] - t[n];
        let zn = &z[n];
        let mut next = rk4(&field, zn, t[n], dt, |s| 1.0 / (1.0 + s))?;
        let clamp = project(&mut next);
        max_clamp = max_clamp.max(clamp);
        if clamp > MAX_CLAMP {
            return Err(UrnError::StepFailure(format!(
                "Z left the simplex by {clamp:e} at t = {}; reduce h",
                t[n + 1]
            )));
        }
        // <M_i> increment by Simpson's rule on the step.
        let mid = {
            let mut m = axpy(zn, 0.5, &next.iter().zip(zn).map(|(a, b)| a - b).collect::<Vec<_>>());
            project(&mut m);
            m
        };
        let w = |s: f64| 1.0 / ((1.0 + s) * (1.0 + s));
        let (v0, vm, v1) = (
            p_var(&field.p(zn)?),
            p_var(&field.p(&mid)?),
            p_var(&field.p(&next)?),
        );
        let tm = 0.5 * (t[n] + t[n + 1]);
        let q: Vec<f64> = (0..a)
            .map(|i| qvar[n][i] + dt / 6.0 * (v0[i] * w(t[n]) + 4.0 * vm[i] * w(tm) + v1[i] * w(t[n + 1])))
            .collect();
        let (s0, s1) = ((1.0 + t[n]).ln(), (1.0 + t[n + 1]).ln());
        let mut yn = rk4(&field, &y[n], s0, s1 - s0, |_| 1.0)?;
        project(&mut yn);
        let err = yn.iter().zip(&next).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        reparam_error = reparam_error.max(err);
        z.push(next);
        y.push(yn);
        qvar.push(q);
    }
    let bound = 10.0 * h.powi(4) * (1.0 + t_max);
    if reparam_error > bound {
        return Err(UrnError::StepFailure(format!(
            "Z(t) and Y(log(1+t)) differ by {reparam_error:e} > {bound:e}"
        )));
    }
    let zeros = vec![vec![0.0; a]; t.len()];
    Ok(ScalingPath {
        t,
        z,
        y: Some(y),
        m: zeros.clone(),
        h_path: zeros.clone(),
        ztilde: zeros,
        qvar,
        step: h,
        seed: None,
        max_clamp,
        reparam_error,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticVariation {
    pub t_max: f64,
    /// `<M_i>(T)`.
    pub values: Vec<f64>,
    /// Richardson estimate of the integration error.
    pub error: f64,
    /// `<M_i>(inf) - <M_i>(T) <= 1/(4(1+T))`.
    pub tail_bound: f64,
}

/// Log-time horizon standing in for `T = inf`; the neglected tail is `e^-40 / 4`.
const U_INF: f64 = 40.0;

fn qvar_u(field: &LimitField, chi0: &[f64], u_max: f64, du: f64) -> Result<Vec<f64>> {
    let a = chi0.len();
    let steps = (u_max / du).ceil().max(1.0) as usize;
    let du = u_max / steps as f64;
    // State: (Y, Q) with dY/du = G(Y), dQ/du = p(Y)(1 - p(Y)) e^-u.
    let rhs = |x: &[f64], u: f64| -> Result<Vec<f64>> {
        let mut y = x[..a].to_vec();
        project(&mut y);
        let p = field.p(&y)?;
        let mut out: Vec<f64> = p.iter().zip(&x[..a]).map(|(p, x)| p - x).collect();
        out.extend(p.iter().map(|p| p * (1.0 - p) * (-u).exp()));
        Ok(out)
    };
    let mut x: Vec<f64> = chi0.to_vec();
    x.extend(std::iter::repeat_n(0.0, a));
    for n in 0..steps {
        let u = n as f64 * du;
        let k1 = rhs(&x, u)?;
        let k2 = rhs(&axpy(&x, du / 2.0, &k1), u + du / 2.0)?;
        let k3 = rhs(&axpy(&x, du / 2.0, &k2), u + du / 2.0)?;
        let k4 = rhs(&axpy(&x, du, &k3), u + du)?;
        for i in 0..2 * a {
            x[i] += du / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let clamp = project(&mut x[..a]);
        if clamp > MAX_CLAMP {
            return Err(UrnError::StepFailure(format!("Y left the simplex by {clamp:e}")));
        }
    }
    Ok(x[a..].to_vec())
}

/// `<M_i>(T) = int_0^T p_i(Z)(1 - p_i(Z)) / (1+s)^2 ds`, computed in the
/// variable `u = log(1+s)` with step halving until two successive
/// resolutions agree to `1e-6`. `T = inf` is accepted.
pub fn quadratic_variation(feedbacks: &[FeedbackSpec], chi0: &[f64], t_max: f64) -> Result<QuadraticVariation> {
    check_open_simplex(chi0)?;
    if feedbacks.len() != chi0.len() {
        return Err(UrnError::Config("feedbacks and shares differ in length".into()));
    }
    if !(t_max >= 0.0) {
        return Err(UrnError::Config("T must be >= 0".into()));
    }
    let field = LimitField::new(feedbacks)?;
    let u_max = if t_max.is_finite() { t_max.ln_1p().min(U_INF) } else { U_INF };
    let tail_bound = if t_max.is_finite() { 0.25 / (1.0 + t_max) } else { 0.0 };
    if u_max == 0.0 {
        return Ok(QuadraticVariation {
            t_max,
            values: vec![0.0; chi0.len()],
            error: 0.0,
            tail_bound,
        });
    }
    let mut du = 1e-2;
    let mut coarse = qvar_u(&field, chi0, u_max, du)?;
    loop {
        du /= 2.0;
        let fine = qvar_u(&field, chi0, u_max, du)?;
        let diff = fine.iter().zip(&coarse).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        if diff <= 1e-6 {
            return Ok(QuadraticVariation {
                t_max,
                values: fine,
                error: diff,
                tail_bound,
            });
        }
        if du < 1e-6 {
            return Err(UrnError::ToleranceUnreachable(format!(
                "quadratic variation does not settle (last change {diff:e})"
            )));
        }
        coarse = fine;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly(beta: f64, a: usize) -> Vec<FeedbackSpec> {
        vec![FeedbackSpec::polynomial(1.0, beta).unwrap(); a]
    }

    #[test]
    fn linear_path_is_constant() {
        let p = integrate_mean_ode(&poly(1.0, 2), &[0.3, 0.7], 10.0, 1e-2).unwrap();
        for z in &p.z {
            assert!((z[0] - 0.3).abs() < 1e-14);
        }
        // <M_1>(T) = x(1-x)(1 - 1/(1+T)) for linear feedback.
        let q = p.qvar.last().unwrap()[0];
        assert!((q - 0.21 * (1.0 - 1.0 / 11.0)).abs() < 1e-10);
    }

    #[test]
    fn reparametrization_identity() {
        let p = integrate_mean_ode(&poly(2.0, 3), &[0.4, 0.3, 0.3], 10.0, 1e-3).unwrap();
        assert!(p.reparam_error <= 1e-6, "{}", p.reparam_error);
        for z in &p.z {
            assert!((z.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sublinear_converges_to_barycenter() {
        // The tangent eigenvalue at the barycenter is beta - 1 = -1/2, so the
        // distance decays like (1+t)^(-1/2).
        let p = integrate_mean_ode(&poly(0.5, 3), &[0.1, 0.1, 0.8], 5000.0, 0.05).unwrap();
        let dist = |z: &[f64]| z.iter().fold(0.0f64, |m, v| m.max((v - 1.0 / 3.0).abs()));
        let d: Vec<f64> = p.z.iter().map(|z| dist(z)).collect();
        assert!(d.windows(2).all(|w| w[1] <= w[0] + 1e-15));
        assert!(d[d.len() - 1] < 1e-2, "{}", d[d.len() - 1]);
        let at = |t: f64| d[(t / 0.05).round() as usize];
        let ratio = at(5000.0) / at(1250.0);
        assert!((ratio - 0.5).abs() < 0.02, "{ratio}");
    }

    #[test]
    fn quadratic_variation_values() {
        let q = quadratic_variation(&poly(0.5, 3), &[0.8, 0.1, 0.1], f64::INFINITY).unwrap();
        assert!((q.values[0] - 0.2474).abs() <= 0.002, "{:?}", q.values);
        let q = quadratic_variation(&poly(2.0, 3), &[0.4, 0.3, 0.3], f64::INFINITY).unwrap();
        assert!((q.values[0] - 0.1908).abs() <= 0.002, "{:?}", q.values);
        let q = quadratic_variation(&poly(2.0, 3), &[0.4, 0.3, 0.3], 0.0).unwrap();
        assert_eq!(q.values, vec![0.0; 3]);
    }

    #[test]
    fn quadratic_variation_matches_path_quadrature() {
        let f = poly(2.0, 3);
        let q = quadratic_variation(&f, &[0.4, 0.3, 0.3], 10.0).unwrap();
        let p = integrate_mean_ode(&f, &[0.4, 0.3, 0.3], 10.0, 1e-3).unwrap();
        for (a, b) in q.values.iter().zip(p.qvar.last().unwrap()) {
            assert!((a - b).abs() < 1e-6, "{a} {b}");
        }
    }
}
