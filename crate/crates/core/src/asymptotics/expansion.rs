//! Asymptotic expansions of log quantities as `x -> inf`:
//! `sum_g c_g x^g + l ln x + m lnln x + c + o(1)` with every `g > 0`.

use std::cmp::Ordering;

use crate::feedback::{Family, FeedbackSpec};

/// Relative tolerance under which two coefficients are treated as equal.
pub(crate) const TIE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Default, PartialEq)]
pub(crate) struct Expansion {
    pub pow: Vec<(f64, f64)>,
    pub ln: f64,
    pub lnln: f64,
    pub c: f64,
}

/// Outcome of comparing two expansions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Cmp {
    /// The difference diverges with the given sign.
    Diverges(Ordering),
    /// The difference converges to this value.
    Finite(f64),
}

impl Expansion {
    fn constant(c: f64) -> Self {
        Expansion {
            c,
            ..Default::default()
        }
    }

    /// The expansion of `x -> self(s x)` for a fixed scale `s > 0`.
    pub fn scaled(&self, s: f64) -> Self {
        Expansion {
            pow: self.pow.iter().map(|(g, c)| (*g, c * s.powf(*g))).collect(),
            ln: self.ln,
            lnln: self.lnln,
            c: self.c + self.ln * s.ln(),
        }
    }

    pub fn neg(&self) -> Self {
        Expansion {
            pow: self.pow.iter().map(|(g, c)| (*g, -c)).collect(),
            ln: -self.ln,
            lnln: -self.lnln,
            c: -self.c,
        }
    }

    fn coef(&self, g: f64) -> f64 {
        self.pow
            .iter()
            .filter(|(h, _)| (h - g).abs() < 1e-12)
            .map(|(_, c)| c)
            .sum()
    }
}

fn nearly_equal(a: f64, b: f64) -> bool {
    (a - b).abs() <= TIE_TOL * a.abs().max(b.abs())
}

/// Compares `a - b`, scale by scale from the fastest growing one.
pub(crate) fn compare(a: &Expansion, b: &Expansion) -> Cmp {
    let mut gs: Vec<f64> = a.pow.iter().chain(&b.pow).map(|(g, _)| *g).collect();
    gs.sort_by(|x, y| y.total_cmp(x));
    gs.dedup_by(|x, y| (*x - *y).abs() < 1e-12);
    let scales = gs
        .iter()
        .map(|g| (a.coef(*g), b.coef(*g)))
        .chain([(a.ln, b.ln), (a.lnln, b.lnln)]);
    for (x, y) in scales {
        if !nearly_equal(x, y) {
            return Cmp::Diverges(x.total_cmp(&y));
        }
    }
    let d = a.c - b.c;
    if d.abs() <= TIE_TOL * a.c.abs().max(b.c.abs()).max(1.0) {
        Cmp::Finite(0.0)
    } else {
        Cmp::Finite(d)
    }
}

/// `ln F(x)` for built-in families.
pub(crate) fn ln_f(spec: &FeedbackSpec) -> Option<Expansion> {
    let e = match &spec.family {
        Family::Polynomial { alpha, beta } => Expansion {
            ln: *beta,
            c: alpha.ln(),
            ..Default::default()
        },
        Family::Exponential { alpha, beta } => Expansion {
            pow: vec![(1.0, *beta)],
            c: alpha.ln(),
            ..Default::default()
        },
        Family::StretchedExp { alpha, beta, gamma } => Expansion {
            pow: vec![(*gamma, *beta)],
            c: alpha.ln(),
            ..Default::default()
        },
        Family::LogLinear { alpha, beta } => Expansion {
            ln: 1.0,
            lnln: *beta,
            c: alpha.ln(),
            ..Default::default()
        },
        Family::Log { alpha } => Expansion {
            lnln: 1.0,
            c: alpha.ln(),
            ..Default::default()
        },
        Family::Constant { alpha } => Expansion::constant(alpha.ln()),
        Family::Custom { .. } => return None,
    };
    Some(e)
}

/// `ln sum_{k>=x} 1/F(k)` for explosive built-in families of type P.
pub(crate) fn ln_tail(spec: &FeedbackSpec) -> Option<Expansion> {
    let e = match &spec.family {
        Family::Polynomial { alpha, beta } if *beta > 1.0 => Expansion {
            ln: 1.0 - beta,
            c: -(alpha * (beta - 1.0)).ln(),
            ..Default::default()
        },
        Family::LogLinear { alpha, beta } if *beta > 1.0 => Expansion {
            lnln: 1.0 - beta,
            c: -(alpha * (beta - 1.0)).ln(),
            ..Default::default()
        },
        Family::StretchedExp { alpha, beta, gamma } if *gamma < 1.0 => Expansion {
            pow: vec![(*gamma, -beta)],
            ln: 1.0 - gamma,
            c: -(alpha * beta * gamma).ln(),
            ..Default::default()
        },
        _ => return None,
    };
    Some(e)
}
