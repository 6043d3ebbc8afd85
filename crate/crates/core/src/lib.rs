//! Data preconditioning for regularized loss minimization with linear models.
//!
//! The preconditioner `H^{-1/2}` with `H = (λ/β) I + (1/n) X Xᵀ` rewrites
//! `min_w (1/n) Σ ℓ(wᵀx_i, y_i) + (λ/2)‖w‖²` as an equivalent problem over
//! `x̂_i = H^{-1/2} x_i` whose condition number no longer scales with `1/λ`.
//! A sampled variant builds the same operator from `m ≪ n` columns.

pub mod datagen;
pub mod error;
pub(crate) mod linalg;
pub mod losses;
pub mod precond;
pub mod rng;
pub mod solvers;
pub mod spectral;
pub mod trace;

#[cfg(test)]
mod testutil;

pub use datagen::{Dataset, Decay, LoadOptions, Provenance, SynthParams, Task};
pub use error::{Error, Result};
pub use losses::{LossKind, LossModel};
pub use precond::{PrecondMode, Preconditioner};
pub use solvers::{Algorithm, Formulation, Problem, Run, SolverConfig, StepRule};
pub use spectral::{ConditionReport, ReportMode, Spectrum};
pub use trace::{Trace, TraceMeta, TraceRow};
