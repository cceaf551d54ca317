//! Scaling limits of the share process: the mean-field ODE, its fixed
//! points, the fluctuation diffusion `M`, the drift correction `H`, the
//! quadratic variation of `M`, and the `N^beta` time-scale limits.

mod fclt;
mod field;
mod ode;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub use fclt::{beta_scaling, simulate_fclt, BetaRegime, BetaRow, BetaScaling, FcltPlan};
pub use field::{
    fixed_points, vector_field, FixedPoint, FixedPointReport, Jacobian, LimitField, Stability, VectorFieldEval,
};
pub use ode::{integrate_mean_ode, quadratic_variation, QuadraticVariation};

/// A discretized solution on the grid `t_0 = 0 < ... < t_M = T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingPath {
    pub t: Vec<f64>,
    pub z: Vec<Vec<f64>>,
    /// `Y(log(1 + t_n))` from the time-homogeneous equation.
    pub y: Option<Vec<Vec<f64>>>,
    pub m: Vec<Vec<f64>>,
    pub h_path: Vec<Vec<f64>>,
    pub ztilde: Vec<Vec<f64>>,
    pub qvar: Vec<Vec<f64>>,
    pub step: f64,
    pub seed: Option<u64>,
    pub max_clamp: f64,
    pub reparam_error: f64,
}

impl ScalingPath {
    pub fn agents(&self) -> usize {
        self.z.first().map_or(0, |r| r.len())
    }
}

/// CSV with header `t,Z_1..Z_A,M_1..M_A,H_1..H_A,qvar_1..qvar_A`.
pub fn write_path_csv<W: Write>(out: &mut W, path: &ScalingPath) -> Result<()> {
    let a = path.agents();
    let mut header = String::from("t");
    for name in ["Z", "M", "H", "qvar"] {
        for i in 1..=a {
            header.push_str(&format!(",{name}_{i}"));
        }
    }
    writeln!(out, "{header}")?;
    for n in 0..path.t.len() {
        let mut line = format!("{}", path.t[n]);
        for block in [&path.z, &path.m, &path.h_path, &path.qvar] {
            for v in &block[n] {
                line.push_str(&format!(",{v}"));
            }
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}
