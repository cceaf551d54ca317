use serde::{Deserialize, Serialize};

use super::tail::converges;
use super::{log_derivative, tail_sum, Family, FeedbackSpec};
use crate::error::Result;
use crate::numeric::{trend, KahanSum, Trend};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TriState {
    Holds,
    Fails,
    Indeterminate,
}

impl TriState {
    pub(crate) fn from_opt(b: Option<bool>) -> Self {
        match b {
            Some(true) => TriState::Holds,
            Some(false) => TriState::Fails,
            None => TriState::Indeterminate,
        }
    }
}

/// Type P: `F(k) * sum_{l>=k} 1/F(l) -> inf`; type E: bounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PeType {
    TypeP,
    TypeE,
    NotApplicable,
    Indeterminate,
}

/// Behaviour of `F(k)/k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GrowthClass {
    SublinearToZero,
    LinearWithConstant(f64),
    Superlinear,
    Indeterminate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeClass {
    /// `sum 1/F(k) < inf`.
    pub monopoly: TriState,
    pub pe_type: PeType,
    pub growth: GrowthClass,
    /// `limsup (1/k) F(k) sum_{l<=k} 1/F(l) < inf`.
    pub sublin: TriState,
    /// `liminf k^(-p) F(k) sum_{l<=k} 1/F(l) > 0` for some `p > 1/2`.
    pub sublin2: TriState,
    pub sublin2_witness: Option<f64>,
    /// `sum 1/F = inf` and `sum 1/F^2 < inf`.
    pub square_summable: TriState,
    pub sigma2: Option<f64>,
}

const WITNESSES: [f64; 3] = [1.0, 0.75, 0.55];

pub fn classify(spec: &FeedbackSpec) -> Result<RegimeClass> {
    let monopoly = TriState::from_opt(converges(spec, 1));
    let pe_type = match monopoly {
        TriState::Fails => PeType::NotApplicable,
        TriState::Indeterminate => PeType::Indeterminate,
        TriState::Holds => pe_type(spec),
    };
    let growth = growth(spec);
    let sublin = sublin(spec);
    let (sublin2, sublin2_witness) = sublin2(spec);
    let sq = converges(spec, 2);
    let square_summable = match (monopoly, sq) {
        (TriState::Fails, Some(true)) => TriState::Holds,
        (TriState::Holds, _) | (_, Some(false)) => TriState::Fails,
        _ => TriState::Indeterminate,
    };
    let sigma2 = match sq {
        Some(true) => tail_sum(spec, 1, 2, 1e-12).ok().and_then(|t| t.value()),
        _ => None,
    };
    Ok(RegimeClass {
        monopoly,
        pe_type,
        growth,
        sublin,
        sublin2,
        sublin2_witness,
        square_summable,
        sigma2,
    })
}

fn pe_type(spec: &FeedbackSpec) -> PeType {
    match &spec.family {
        Family::Polynomial { .. } | Family::LogLinear { .. } => PeType::TypeP,
        Family::Exponential { .. } => PeType::TypeE,
        Family::StretchedExp { gamma, .. } => {
            if *gamma >= 1.0 {
                PeType::TypeE
            } else {
                PeType::TypeP
            }
        }
        Family::Log { .. } | Family::Constant { .. } => PeType::NotApplicable,
        Family::Custom { .. } => {
            // Log-derivative criterion along a geometric grid.
            let d: Vec<f64> = (2..40)
                .map_while(|j| log_derivative(spec, 2f64.powi(j)).ok())
                .collect();
            if d.len() < 7 {
                return PeType::Indeterminate;
            }
            match trend(&d) {
                Trend::ToZero => PeType::TypeP,
                Trend::Converges(v) if v > 1e-3 => PeType::TypeE,
                Trend::ToInfinity => PeType::TypeE,
                _ => {
                    // Fall back to the defining product on moderate k.
                    let q: Vec<f64> = (3..20)
                        .filter_map(|j| {
                            let k = 1u64 << j;
                            let t = tail_sum(spec, k, 1, 1e-9 * spec.eval_real(k as f64).recip()).ok()?;
                            Some(spec.eval_real(k as f64) * t.value()?)
                        })
                        .collect();
                    match trend(&q) {
                        Trend::ToInfinity => PeType::TypeP,
                        Trend::Converges(_) => PeType::TypeE,
                        _ => PeType::Indeterminate,
                    }
                }
            }
        }
    }
}

fn growth(spec: &FeedbackSpec) -> GrowthClass {
    match &spec.family {
        Family::Polynomial { alpha, beta } => {
            if *beta < 1.0 {
                GrowthClass::SublinearToZero
            } else if *beta == 1.0 {
                GrowthClass::LinearWithConstant(*alpha)
            } else {
                GrowthClass::Superlinear
            }
        }
        Family::Exponential { beta, .. } => {
            if *beta > 0.0 {
                GrowthClass::Superlinear
            } else {
                GrowthClass::SublinearToZero
            }
        }
        Family::StretchedExp { .. } => GrowthClass::Superlinear,
        Family::LogLinear { alpha, beta } => {
            if *beta > 0.0 {
                GrowthClass::Superlinear
            } else if *beta == 0.0 {
                GrowthClass::LinearWithConstant(*alpha)
            } else {
                GrowthClass::SublinearToZero
            }
        }
        Family::Log { .. } | Family::Constant { .. } => GrowthClass::SublinearToZero,
        Family::Custom { .. } => {
            let r: Vec<f64> = (2..50)
                .map(|j| {
                    let u = j as f64 * std::f64::consts::LN_2;
                    (spec.ln_f_at_log(u) - u).exp()
                })
                .collect();
            match trend(&r) {
                Trend::ToZero => GrowthClass::SublinearToZero,
                Trend::ToInfinity => GrowthClass::Superlinear,
                Trend::Converges(c) => GrowthClass::LinearWithConstant(c),
                Trend::Unclear => GrowthClass::Indeterminate,
            }
        }
    }
}

/// `F(k) * sum_{l<=k} 1/F(l)` at `k = 2^j`, `j = 1..=max_j`.
fn cumulative_probe(spec: &FeedbackSpec, max_j: u32) -> Vec<(f64, f64)> {
    let mut acc = KahanSum::new();
    let mut out = Vec::new();
    let mut next = 2u64;
    let last = 1u64 << max_j;
    for l in 1..=last {
        acc.add((-spec.ln_f(l as f64)).exp());
        if l == next {
            let k = l as f64;
            out.push((k, spec.eval_real(k) * acc.value()));
            next *= 2;
        }
    }
    out
}

fn sublin(spec: &FeedbackSpec) -> TriState {
    match &spec.family {
        Family::Polynomial { beta, .. } => TriState::from_opt(Some(*beta < 1.0)),
        Family::Exponential { beta, .. } => TriState::from_opt(Some(*beta <= 0.0)),
        Family::StretchedExp { .. } | Family::LogLinear { .. } => TriState::Fails,
        Family::Log { .. } | Family::Constant { .. } => TriState::Holds,
        Family::Custom { .. } => {
            let v: Vec<f64> = cumulative_probe(spec, 22).into_iter().map(|(k, s)| s / k).collect();
            match trend(&v) {
                Trend::Converges(_) | Trend::ToZero => TriState::Holds,
                Trend::ToInfinity => TriState::Fails,
                Trend::Unclear => TriState::Indeterminate,
            }
        }
    }
}

fn sublin2(spec: &FeedbackSpec) -> (TriState, Option<f64>) {
    match &spec.family {
        Family::Exponential { beta, .. } if *beta < 0.0 => (TriState::Fails, None),
        Family::Custom { .. } => {
            let probe = cumulative_probe(spec, 22);
            let mut any_unclear = false;
            for p in WITNESSES {
                let v: Vec<f64> = probe.iter().map(|(k, s)| s / k.powf(p)).collect();
                match trend(&v) {
                    Trend::ToZero => {}
                    Trend::Converges(c) if c <= 0.0 => {}
                    Trend::Unclear => any_unclear = true,
                    _ => return (TriState::Holds, Some(p)),
                }
            }
            if any_unclear {
                (TriState::Indeterminate, None)
            } else {
                (TriState::Fails, None)
            }
        }
        // Eventually non-decreasing F gives F(k) sum_{l<=k} 1/F(l) >= c k.
        _ => (TriState::Holds, Some(1.0)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feedback::parse_feedback;

    #[test]
    fn polynomial_regimes() {
        let c = classify(&FeedbackSpec::polynomial(1.0, 2.0).unwrap()).unwrap();
        assert_eq!(c.monopoly, TriState::Holds);
        assert_eq!(c.pe_type, PeType::TypeP);
        assert_eq!(c.growth, GrowthClass::Superlinear);
        let c = classify(&FeedbackSpec::polynomial(1.0, 0.5).unwrap()).unwrap();
        assert_eq!(c.monopoly, TriState::Fails);
        assert_eq!(c.growth, GrowthClass::SublinearToZero);
        assert_eq!(c.sublin, TriState::Holds);
        assert_eq!(c.sublin2, TriState::Holds);
        let c = classify(&FeedbackSpec::polynomial(2.0, 1.0).unwrap()).unwrap();
        assert_eq!(c.growth, GrowthClass::LinearWithConstant(2.0));
        assert_eq!(c.sublin, TriState::Fails);
    }

    #[test]
    fn exponential_and_loglinear_regimes() {
        let c = classify(&FeedbackSpec::exponential(1.0, 1.0).unwrap()).unwrap();
        assert_eq!((c.monopoly, c.pe_type), (TriState::Holds, PeType::TypeE));
        let c = classify(&FeedbackSpec::log_linear(1.0, 1.0).unwrap()).unwrap();
        assert_eq!(c.monopoly, TriState::Fails);
        assert_eq!(c.growth, GrowthClass::Superlinear);
        assert_eq!(c.sublin, TriState::Fails);
        assert_eq!(c.square_summable, TriState::Holds);
        assert!(c.sigma2.unwrap() > 0.0);
        let c = classify(&FeedbackSpec::log_linear(1.0, 2.0).unwrap()).unwrap();
        assert_eq!((c.monopoly, c.pe_type), (TriState::Holds, PeType::TypeP));
        let c = classify(&FeedbackSpec::exponential(1.0, -1.0).unwrap()).unwrap();
        assert_eq!(c.sublin2, TriState::Fails);
        assert_eq!(c.sublin, TriState::Holds);
    }

    #[test]
    fn stretched_exponential_type_follows_log_derivative() {
        let c = classify(&FeedbackSpec::stretched_exp(1.0, 1.0, 0.5).unwrap()).unwrap();
        assert_eq!(c.pe_type, PeType::TypeP);
        let c = classify(&FeedbackSpec::stretched_exp(1.0, 1.0, 1.5).unwrap()).unwrap();
        assert_eq!(c.pe_type, PeType::TypeE);
    }

    #[test]
    fn log_feedback_is_sublinear() {
        let c = classify(&FeedbackSpec::log(1.0).unwrap()).unwrap();
        assert_eq!(c.monopoly, TriState::Fails);
        assert_eq!(c.sublin, TriState::Holds);
        assert_eq!(c.sublin2, TriState::Holds);
        assert_eq!(c.growth, GrowthClass::SublinearToZero);
    }

    #[test]
    fn custom_probes_agree_with_builtins() {
        let c = classify(&parse_feedback("k^2+k").unwrap()).unwrap();
        assert_eq!(c.monopoly, TriState::Holds);
        assert_eq!(c.pe_type, PeType::TypeP);
        assert_eq!(c.growth, GrowthClass::Superlinear);
        let c = classify(&parse_feedback("sqrt(k)+1").unwrap()).unwrap();
        assert_eq!(c.monopoly, TriState::Fails);
        assert_eq!(c.growth, GrowthClass::SublinearToZero);
        assert_eq!(c.sublin, TriState::Holds);
        assert_eq!(c.sublin2, TriState::Holds);
        let c = classify(&parse_feedback("exp(k)+k").unwrap()).unwrap();
        assert_eq!(c.pe_type, PeType::TypeE);
        let c = classify(&parse_feedback("2*k+1").unwrap()).unwrap();
        assert!(matches!(c.growth, GrowthClass::LinearWithConstant(a) if (a - 2.0).abs() < 1e-2));
    }
}
