//! Generalized Polya urns with feedback.
//!
//! `A` agents hold counts `X_i(n)`; at each step agent `i` gains one unit
//! with probability `F_i(X_i) / sum_j F_j(X_j)`. The crate simulates the
//! process directly and through its exponential embedding, classifies the
//! long-run regime of a feedback configuration, and integrates the
//! mean-field ODE and fluctuation limits of the share process.

pub mod asymptotics;
pub mod error;
pub mod feedback;
pub mod harness;
pub mod numeric;
pub mod rng;
pub mod scaling;
pub mod stats;
pub mod urn;

pub use error::{Result, UrnError};
