//! Feedback functions `F: N -> (0, inf)`.
//!
//! Expressions are parsed and, when their structure matches a known family,
//! normalized to that family so that closed forms can be used downstream.

mod classify;
pub mod expr;
mod tail;
mod transform;

use serde::{Deserialize, Serialize};

use crate::error::{Result, UrnError};
pub use classify::{classify, GrowthClass, PeType, RegimeClass, TriState};
use expr::{monomial, parse_expr, Expr};
pub use tail::{tail_sum, TailSum};
pub use transform::{a_inverse, a_inverse_continuum, a_transform, a_transform_continuum};

/// Condition (M), `sum_k 1/F(k) < inf`, decided without the full classifier.
pub fn monopoly_condition(spec: &FeedbackSpec) -> TriState {
    TriState::from_opt(tail::converges(spec, 1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family")]
pub enum Family {
    /// `alpha * k^beta`
    Polynomial { alpha: f64, beta: f64 },
    /// `alpha * exp(beta * k)`
    Exponential { alpha: f64, beta: f64 },
    /// `alpha * exp(beta * k^gamma)`
    StretchedExp { alpha: f64, beta: f64, gamma: f64 },
    /// `alpha * k * log(k+1)^beta`
    LogLinear { alpha: f64, beta: f64 },
    /// `alpha * log(k+1)`
    Log { alpha: f64 },
    /// `alpha`
    Constant { alpha: f64 },
    /// Any other expression.
    Custom {
        #[serde(with = "expr_text")]
        expr: Expr,
    },
}

mod expr_text {
    use super::expr::{parse_expr, Expr};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(e: &Expr, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&e.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Expr, D::Error> {
        let text = String::deserialize(d)?;
        parse_expr(&text).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackSpec {
    pub family: Family,
    pub label: String,
}

/// Parses an expression in `k`, normalizing it to a known family when possible.
pub fn parse_feedback(text: &str) -> Result<FeedbackSpec> {
    let expr = parse_expr(text)?;
    let family = normalize(&expr);
    let spec = FeedbackSpec {
        family,
        label: text.trim().to_string(),
    };
    spec.validate()?;
    Ok(spec)
}

fn normalize(e: &Expr) -> Family {
    let custom = || Family::Custom { expr: e.clone() };
    let m = match monomial(e) {
        Some(m) if m.coef > 0.0 && m.coef.is_finite() => m,
        _ => return custom(),
    };
    let alpha = m.coef;
    match (m.k_pow, m.log_pow, m.lin, m.stretched) {
        (p, l, lin, None) if l == 0.0 && lin == 0.0 => {
            if p == 0.0 {
                Family::Constant { alpha }
            } else {
                Family::Polynomial { alpha, beta: p }
            }
        }
        (p, l, lin, None) if p == 1.0 && lin == 0.0 => Family::LogLinear { alpha, beta: l },
        (p, l, lin, None) if p == 0.0 && l == 1.0 && lin == 0.0 => Family::Log { alpha },
        (p, l, lin, None) if p == 0.0 && l == 0.0 => Family::Exponential { alpha, beta: lin },
        (p, l, lin, Some((beta, gamma))) if p == 0.0 && l == 0.0 && lin == 0.0 && beta > 0.0 => {
            Family::StretchedExp { alpha, beta, gamma }
        }
        _ => custom(),
    }
}

impl FeedbackSpec {
    pub fn new(family: Family) -> Result<Self> {
        let label = family.expression();
        let spec = FeedbackSpec { family, label };
        spec.validate()?;
        Ok(spec)
    }

    pub fn polynomial(alpha: f64, beta: f64) -> Result<Self> {
        Self::new(Family::Polynomial { alpha, beta })
    }

    pub fn exponential(alpha: f64, beta: f64) -> Result<Self> {
        Self::new(Family::Exponential { alpha, beta })
    }

    pub fn stretched_exp(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        Self::new(Family::StretchedExp { alpha, beta, gamma })
    }

    pub fn log_linear(alpha: f64, beta: f64) -> Result<Self> {
        Self::new(Family::LogLinear { alpha, beta })
    }

    pub fn log(alpha: f64) -> Result<Self> {
        Self::new(Family::Log { alpha })
    }

    pub fn constant(alpha: f64) -> Result<Self> {
        Self::new(Family::Constant { alpha })
    }

    fn validate(&self) -> Result<()> {
        let params: Vec<f64> = match &self.family {
            Family::Polynomial { alpha, beta } => vec![*alpha, *beta],
            Family::Exponential { alpha, beta } => vec![*alpha, *beta],
            Family::StretchedExp { alpha, beta, gamma } => {
                if *beta <= 0.0 || *gamma <= 0.0 {
                    return Err(UrnError::Config("stretched exponential needs beta > 0 and gamma > 0".into()));
                }
                vec![*alpha, *beta, *gamma]
            }
            Family::LogLinear { alpha, beta } => vec![*alpha, *beta],
            Family::Log { alpha } | Family::Constant { alpha } => vec![*alpha],
            Family::Custom { .. } => vec![1.0],
        };
        if params.iter().any(|p| !p.is_finite()) || params[0] <= 0.0 {
            return Err(UrnError::Config(format!("invalid parameters for {}", self.label)));
        }
        for k in 1..=64u64 {
            let lv = self.ln_f(k as f64);
            if lv.is_nan() || lv == f64::NEG_INFINITY {
                return Err(UrnError::Domain {
                    k: k as f64,
                    msg: format!("feedback '{}' is not positive", self.label),
                });
            }
        }
        Ok(())
    }

    pub fn is_custom(&self) -> bool {
        matches!(self.family, Family::Custom { .. })
    }

    /// `ln F(x)` for real `x > 0`, finite wherever the log is representable.
    pub fn ln_f(&self, x: f64) -> f64 {
        match &self.family {
            Family::Polynomial { alpha, beta } => alpha.ln() + beta * x.ln(),
            Family::Exponential { alpha, beta } => alpha.ln() + beta * x,
            Family::StretchedExp { alpha, beta, gamma } => alpha.ln() + beta * x.powf(*gamma),
            Family::LogLinear { alpha, beta } => alpha.ln() + x.ln() + beta * x.ln_1p().ln(),
            Family::Log { alpha } => alpha.ln() + x.ln_1p().ln(),
            Family::Constant { alpha } => alpha.ln(),
            Family::Custom { expr } => expr.ln_eval(x),
        }
    }

    /// `ln F(e^u)`, usable for `u` far beyond the float range of `e^u`.
    pub fn ln_f_at_log(&self, u: f64) -> f64 {
        use crate::numeric::ln_1p_exp;
        match &self.family {
            Family::Polynomial { alpha, beta } => alpha.ln() + beta * u,
            Family::Exponential { alpha, beta } => alpha.ln() + beta * u.exp(),
            Family::StretchedExp { alpha, beta, gamma } => alpha.ln() + beta * (gamma * u).exp(),
            Family::LogLinear { alpha, beta } => alpha.ln() + u + beta * ln_1p_exp(u).ln(),
            Family::Log { alpha } => alpha.ln() + ln_1p_exp(u).ln(),
            Family::Constant { alpha } => alpha.ln(),
            Family::Custom { expr } => expr.ln_eval(u.exp()),
        }
    }

    /// `ln(e^u F(e^u)^(-p))`: the integrand of `int F(x)^(-p) dx` after
    /// `x = e^u`, with the leading `u` terms cancelled symbolically.
    pub fn ln_integrand_at_log(&self, u: f64, p: f64) -> f64 {
        use crate::numeric::ln_1p_exp;
        match &self.family {
            Family::Polynomial { alpha, beta } => u * (1.0 - p * beta) - p * alpha.ln(),
            Family::Exponential { alpha, beta } => u - p * alpha.ln() - p * beta * u.exp(),
            Family::StretchedExp { alpha, beta, gamma } => {
                u - p * alpha.ln() - p * beta * (gamma * u).exp()
            }
            Family::LogLinear { alpha, beta } => {
                u * (1.0 - p) - p * alpha.ln() - p * beta * ln_1p_exp(u).ln()
            }
            Family::Log { alpha } => u - p * alpha.ln() - p * ln_1p_exp(u).ln(),
            Family::Constant { alpha } => u - p * alpha.ln(),
            Family::Custom { .. } => u - p * self.ln_f_at_log(u),
        }
    }

    /// `F(x)` for real `x`; may be `inf`.
    pub fn eval_real(&self, x: f64) -> f64 {
        match &self.family {
            Family::Polynomial { alpha, beta } => alpha * x.powf(*beta),
            Family::Exponential { alpha, beta } => alpha * (beta * x).exp(),
            Family::StretchedExp { alpha, beta, gamma } => alpha * (beta * x.powf(*gamma)).exp(),
            Family::LogLinear { alpha, beta } => alpha * x * x.ln_1p().powf(*beta),
            Family::Log { alpha } => alpha * x.ln_1p(),
            Family::Constant { alpha } => *alpha,
            Family::Custom { expr } => expr.eval(x),
        }
    }

    /// Canonical expression text that parses back to the same family.
    pub fn expression(&self) -> String {
        self.family.expression()
    }

    /// Short family name.
    pub fn family_name(&self) -> &'static str {
        match self.family {
            Family::Polynomial { .. } => "Polynomial",
            Family::Exponential { .. } => "Exponential",
            Family::StretchedExp { .. } => "StretchedExp",
            Family::LogLinear { .. } => "LogLinear",
            Family::Log { .. } => "Log",
            Family::Constant { .. } => "Constant",
            Family::Custom { .. } => "Custom",
        }
    }

    /// Numeric parameters in declaration order (empty for custom).
    pub fn params(&self) -> Vec<f64> {
        match &self.family {
            Family::Polynomial { alpha, beta }
            | Family::Exponential { alpha, beta }
            | Family::LogLinear { alpha, beta } => vec![*alpha, *beta],
            Family::StretchedExp { alpha, beta, gamma } => vec![*alpha, *beta, *gamma],
            Family::Log { alpha } | Family::Constant { alpha } => vec![*alpha],
            Family::Custom { .. } => vec![],
        }
    }

    /// `F` with every value multiplied by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        let family = match &self.family {
            Family::Polynomial { alpha, beta } => Family::Polynomial { alpha: alpha * c, beta: *beta },
            Family::Exponential { alpha, beta } => Family::Exponential { alpha: alpha * c, beta: *beta },
            Family::StretchedExp { alpha, beta, gamma } => Family::StretchedExp {
                alpha: alpha * c,
                beta: *beta,
                gamma: *gamma,
            },
            Family::LogLinear { alpha, beta } => Family::LogLinear { alpha: alpha * c, beta: *beta },
            Family::Log { alpha } => Family::Log { alpha: alpha * c },
            Family::Constant { alpha } => Family::Constant { alpha: alpha * c },
            Family::Custom { expr } => Family::Custom {
                expr: Expr::Mul(Box::new(Expr::Num(c)), Box::new(expr.clone())),
            },
        };
        FeedbackSpec::new(family)
    }
}

impl Family {
    pub fn expression(&self) -> String {
        match self {
            Family::Polynomial { alpha, beta } => format!("{alpha}*k^{}", signed(*beta)),
            Family::Exponential { alpha, beta } => format!("{alpha}*exp({}*k)", signed(*beta)),
            Family::StretchedExp { alpha, beta, gamma } => format!("{alpha}*exp({beta}*k^{gamma})"),
            Family::LogLinear { alpha, beta } => format!("{alpha}*k*log(k+1)^{}", signed(*beta)),
            Family::Log { alpha } => format!("{alpha}*log(k+1)"),
            Family::Constant { alpha } => format!("{alpha}"),
            Family::Custom { expr } => expr.to_string(),
        }
    }
}

fn signed(x: f64) -> String {
    if x < 0.0 {
        format!("({x})")
    } else {
        format!("{x}")
    }
}

/// `F(k)`; fails when the value is not a positive finite float.
pub fn evaluate(spec: &FeedbackSpec, k: u64) -> Result<f64> {
    let x = k as f64;
    let v = spec.eval_real(x);
    if v.is_nan() || v <= 0.0 {
        return Err(UrnError::Domain {
            k: x,
            msg: format!("feedback '{}' is not positive", spec.label),
        });
    }
    if v.is_infinite() {
        return Err(UrnError::Overflow { k: x });
    }
    Ok(v)
}

/// `d/dx log F(x)` of the continuum extension.
pub fn log_derivative(spec: &FeedbackSpec, x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(UrnError::Domain {
            k: x,
            msg: "log derivative needs x > 0".into(),
        });
    }
    let d = match &spec.family {
        Family::Polynomial { beta, .. } => beta / x,
        Family::Exponential { beta, .. } => *beta,
        Family::StretchedExp { beta, gamma, .. } => beta * gamma * x.powf(gamma - 1.0),
        Family::LogLinear { beta, .. } => 1.0 / x + beta / ((x + 1.0) * x.ln_1p()),
        Family::Log { .. } => 1.0 / ((x + 1.0) * x.ln_1p()),
        Family::Constant { .. } => 0.0,
        Family::Custom { .. } => {
            let h = 1e-5 * x.max(1e-3);
            let lo = (x - h).max(0.5 * x);
            let hi = x + h;
            (spec.ln_f(hi) - spec.ln_f(lo)) / (hi - lo)
        }
    };
    if d.is_finite() {
        Ok(d)
    } else {
        Err(UrnError::Domain {
            k: x,
            msg: "log derivative is not finite".into(),
        })
    }
}
