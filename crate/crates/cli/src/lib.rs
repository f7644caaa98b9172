//! Experiment layer over the `heavytail` library: JSON configuration
//! schemas, displacement-sweep runners with CSV emission, and the
//! analytic-identity diagnostics suite. The `heavytail` binary is a thin
//! clap wrapper over these modules; they are exported as a library so
//! integration tests can drive the exact code paths the binary runs.

// `!(x > 0.0)` is used deliberately so that NaN takes the rejection branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod diagnostics;
pub mod sweep;
