use serde::{Deserialize, Serialize};

use super::{Family, FeedbackSpec};
use crate::error::{Result, UrnError};
use crate::numeric::{exp_sinh, KahanSum};

/// Value of `sum_{k >= start} F(k)^(-p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TailSum {
    /// `|value - true| <= error`.
    Finite { value: f64, error: f64 },
    Divergent,
    Indeterminate,
}

impl TailSum {
    pub fn value(&self) -> Option<f64> {
        match self {
            TailSum::Finite { value, .. } => Some(*value),
            _ => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, TailSum::Finite { .. })
    }

    /// Upper end of the certified interval (`inf` when divergent).
    pub fn upper(&self) -> f64 {
        match self {
            TailSum::Finite { value, error } => value + error,
            _ => f64::INFINITY,
        }
    }

    pub fn lower(&self) -> f64 {
        match self {
            TailSum::Finite { value, error } => (value - error).max(0.0),
            TailSum::Divergent => f64::INFINITY,
            TailSum::Indeterminate => 0.0,
        }
    }
}

const MAX_TERMS: u64 = 1 << 26;

/// Symbolic or probed convergence of `sum F(k)^(-p)`.
pub(crate) fn converges(spec: &FeedbackSpec, p: u32) -> Option<bool> {
    let p = p as f64;
    match &spec.family {
        Family::Polynomial { beta, .. } => Some(beta * p > 1.0),
        Family::Exponential { beta, .. } => Some(*beta > 0.0),
        Family::StretchedExp { .. } => Some(true),
        Family::LogLinear { beta, .. } => Some(p >= 2.0 || *beta > 1.0),
        Family::Log { .. } | Family::Constant { .. } => Some(false),
        Family::Custom { .. } => {
            // Cauchy condensation along 2^j.
            let lc: Vec<f64> = (2..=60)
                .map(|j| {
                    let j = j as f64;
                    j * std::f64::consts::LN_2 - p * spec.ln_f_at_log(j * std::f64::consts::LN_2)
                })
                .collect();
            if lc.iter().any(|v| v.is_nan()) {
                return None;
            }
            let tail = &lc[lc.len() - 9..];
            if tail.iter().all(|v| *v == f64::NEG_INFINITY) {
                return Some(true);
            }
            let d: Vec<f64> = tail.windows(2).map(|w| w[1] - w[0]).collect();
            if d.iter().all(|x| *x <= 0.9f64.ln()) {
                Some(true)
            } else if d.iter().all(|x| *x >= -1e-12) {
                Some(false)
            } else {
                None
            }
        }
    }
}

fn summand(spec: &FeedbackSpec, p: f64) -> impl Fn(f64) -> f64 + '_ {
    move |x| (-p * spec.ln_f(x)).exp()
}

fn tail_integral(spec: &FeedbackSpec, n: f64, p: f64) -> (f64, f64) {
    if let Family::Polynomial { alpha, beta } = spec.family {
        let s = beta * p;
        let v = (-p * alpha.ln() + (1.0 - s) * n.ln()).exp() / (s - 1.0);
        return (v, 4.0 * f64::EPSILON * v);
    }
    let g = |u: f64| spec.ln_integrand_at_log(u, p).exp();
    exp_sinh(g, n.ln(), 1e-14)
}

/// Checks monotone decrease and convexity of `f` on a geometric grid from `n`.
fn convex_decreasing_from(f: &impl Fn(f64) -> f64, n: f64) -> bool {
    let mut x = n;
    for _ in 0..24 {
        let (a, b, c) = (f(x - 1.0), f(x), f(x + 1.0));
        if !(a.is_finite() && b.is_finite() && c.is_finite()) {
            return false;
        }
        if b == 0.0 && c == 0.0 {
            return true;
        }
        let slack = 1e-12 * a;
        if a + slack < b || b + slack < c || a + c + slack < 2.0 * b {
            return false;
        }
        x *= 2.0;
    }
    true
}

/// `sum_{k >= start} F(k)^(-power)` with a certified absolute error.
///
/// Uses closed forms where available. Otherwise the head is summed directly
/// and the tail is bracketed by the trapezoid bound for convex decreasing
/// summands: it lies in `[I + f(N)/2, I + f(N)/2 + |f'(N)|/8]` with
/// `I = int_N^inf f`, and `|f'(N)| <= f(N-1) - f(N)`.
pub fn tail_sum(spec: &FeedbackSpec, start: u64, power: u32, tol: f64) -> Result<TailSum> {
    if start == 0 {
        return Err(UrnError::Config("tail sums start at k >= 1".into()));
    }
    if power == 0 || !(tol > 0.0) {
        return Err(UrnError::Config("tail sums need power >= 1 and tol > 0".into()));
    }
    match converges(spec, power) {
        Some(false) => return Ok(TailSum::Divergent),
        None => return Ok(TailSum::Indeterminate),
        Some(true) => {}
    }
    let p = power as f64;
    if let Family::Exponential { alpha, beta } = spec.family {
        let v = (-p * (alpha.ln() + beta * start as f64)).exp() / -(-p * beta).exp_m1();
        return Ok(TailSum::Finite {
            value: v,
            error: 8.0 * f64::EPSILON * v,
        });
    }
    let f = summand(spec, p);
    let mut n = (start + 1).max(32);
    if let Family::LogLinear { beta, .. } = spec.family {
        if beta < 0.0 {
            n = n.max((beta.abs() + 2.0).exp().ceil() as u64);
        }
    }
    while !convex_decreasing_from(&f, n as f64) {
        n *= 2;
        if n > MAX_TERMS {
            return geometric_majorant(spec, start, p, tol);
        }
    }
    let mut head = KahanSum::new();
    for k in start..n {
        head.add(f(k as f64));
    }
    loop {
        let x = n as f64;
        let fx = f(x);
        let slope = (f(x - 1.0) - fx).max(0.0);
        let (integral, ierr) = tail_integral(spec, x, p);
        let s = head.value();
        let value = s + integral + 0.5 * fx + slope / 16.0;
        let error = slope / 16.0 + ierr + 1e-15 * value;
        if error <= tol {
            return Ok(TailSum::Finite { value, error });
        }
        if n >= MAX_TERMS {
            return Err(UrnError::ToleranceUnreachable(format!(
                "tail sum of '{}' reached error {error:e} > {tol:e}",
                spec.label
            )));
        }
        for k in n..2 * n {
            head.add(f(k as f64));
        }
        n *= 2;
    }
}

/// Tail bound `f(N) / (1 - r)` with `r` the largest probed successive ratio.
fn geometric_majorant(spec: &FeedbackSpec, start: u64, p: f64, tol: f64) -> Result<TailSum> {
    let f = summand(spec, p);
    let mut head = KahanSum::new();
    let mut n = start;
    loop {
        let mut r: f64 = 0.0;
        let mut k = n as f64;
        while k < 64.0 * n as f64 {
            r = r.max(f(k + 1.0) / f(k));
            k += (k / 16.0).max(1.0).floor();
        }
        if r < 1.0 {
            let bound = f(n as f64) / (1.0 - r);
            if 0.5 * bound <= tol {
                let value = head.value() + 0.5 * bound;
                return Ok(TailSum::Finite {
                    value,
                    error: 0.5 * bound + 1e-15 * value,
                });
            }
        }
        if n >= MAX_TERMS {
            return Err(UrnError::ToleranceUnreachable(format!(
                "no certified tail bound for '{}'",
                spec.label
            )));
        }
        let next = 2 * n;
        for k in n..next {
            head.add(f(k as f64));
        }
        n = next;
    }
}
