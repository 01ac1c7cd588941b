//! Numerical laboratory for the nonlinear Fokker-Planck equation
//!
//! ```text
//! u_t - Δβ(u) + div(D b(u) u) = 0
//! ```
//!
//! on a truncated box with zero-flux faces. The crate provides the
//! coefficient profiles and their regularizations, a conservative monotone
//! finite-volume resolvent `J_λ = (I + λA)^{-1}`, implicit-Euler chaining of
//! resolvents (the mild solution), bounded-measure initial data, closed-form
//! reference solutions, exponent algebra for the L¹-L∞ smoothing rate, a
//! particle harness for the associated McKean-Vlasov SDE, and a registry of
//! runnable checks.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod diagnostics;
mod error;
pub mod grid;
pub mod linalg;
pub mod measures;
pub mod oracles;
pub mod particles;
pub mod profiles;
pub mod quad;
pub mod resolvent;
pub mod semigroup;
pub mod sum;

pub use error::{Error, Hypothesis, Result};
pub use grid::{Field, GridSpec};
pub use measures::MeasureSpec;
pub use particles::{ParticleEnsemble, SdeConfig};
pub use profiles::{Beta, Drift, Mobility, Profile, RegularizedProfile};
pub use resolvent::{ResolventConfig, ResolventReport};
pub use semigroup::{EvolveConfig, StepDiagnostics, Trajectory};
