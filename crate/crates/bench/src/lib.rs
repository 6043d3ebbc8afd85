//! Shared fixtures for the criterion benches.

use std::sync::Arc;

use nalgebra::DMatrix;
use rlm_precond::datagen::synth;
use rlm_precond::{Dataset, Decay, LossModel, Preconditioner, Problem, SynthParams, Task};

pub const LAMBDA: f64 = 1e-4;
pub const BETA: f64 = 0.99;

/// Polynomially decaying regression data, `σ_i² = i^{-1}`.
pub fn poly_regression(n: usize, d: usize, seed: u64) -> Dataset {
    synth(&SynthParams::new(n, d, Decay::Poly(0.5), Task::Regression), seed).expect("synthetic data")
}

pub fn full_preconditioner(x: &DMatrix<f64>) -> Arc<Preconditioner> {
    Arc::new(Preconditioner::build_full(x, LAMBDA, BETA).expect("full preconditioner"))
}

pub fn sampled_preconditioner(x: &DMatrix<f64>, m: usize) -> Arc<Preconditioner> {
    Arc::new(Preconditioner::build_sampled(x, LAMBDA, BETA, m, 1).expect("sampled preconditioner"))
}

pub fn original_problem(ds: &Dataset) -> Problem {
    let form = rlm_precond::Formulation::Original { lambda: LAMBDA };
    Problem::new(ds.x.clone(), ds.y.clone(), LossModel::square(), form).expect("problem")
}

pub fn preconditioned_problem(ds: &Dataset, p: &Arc<Preconditioner>) -> Problem {
    Problem::from_preconditioner(&ds.x, ds.y.clone(), LossModel::square(), p, false).expect("problem")
}
