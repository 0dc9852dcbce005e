//! Generalized Poland-Scheraga pinning model: kernels, the exponential
//! tilt, the constrained free energy and its phase diagram, exact
//! finite-size partition functions, path sampling and validation of the
//! sharp asymptotics.

// Negated comparisons reject NaN along with out-of-range values; index
// loops mirror the recurrences.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

#[cfg(feature = "cli")]
pub mod cli;
pub mod error;
pub mod exact_dp;
pub mod kernels;
pub mod ldp;
pub mod phase;
pub mod roots;
pub mod sampler;
pub(crate) mod series;
pub mod tilt;
pub mod validation;
