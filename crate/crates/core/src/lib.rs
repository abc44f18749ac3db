//! Pinned integer heights and the dual neutral Coulomb gas on an N x N
//! torus.
//!
//! The height model weighs a pinned field `x` (zero at the origin) by
//! `exp(-beta sum_edges (x_i - x_j)^2)`; the charge model weighs a
//! neutral integer field `m` by `exp(-pi^2 beta* m^t G m)` with `G` the
//! torus Green's function and `beta* = 1/(4 beta)`. The crate computes
//! `G` spectrally ([`greens`]), enumerates both partition sums on tiny
//! boxes ([`exact`]), decomposes height level sets into dual contours
//! with torus homology ([`contours`]), samples both models by Metropolis
//! dynamics ([`mc_dg`], [`mc_cg`]), and bundles the numbered checks that
//! tie it all together ([`verify`]).
//!
//! Floating-point kernels are generic over [`scalar::Real`]; the aliases
//! below fix `f64`, which is what every stated tolerance assumes.

pub mod contours;
pub mod error;
pub mod exact;
pub mod greens;
pub mod lattice;
mod linalg;
pub mod mc_cg;
pub mod mc_dg;
pub mod scalar;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
pub use scalar::Real;

/// Concrete `f64` aliases for the generic numeric types.
pub type GreenTable64 = greens::GreenTable<f64>;
pub type DualityReport64 = exact::DualityReport<f64>;
pub type CrossIdentityReport64 = exact::CrossIdentityReport<f64>;
pub type DgChain64 = mc_dg::DgChain<f64>;
pub type CgChain64 = mc_cg::CgChain<f64>;
pub type DgEstimates64 = mc_dg::DgEstimates<f64>;
pub type VarianceReport64 = mc_cg::VarianceReport<f64>;
