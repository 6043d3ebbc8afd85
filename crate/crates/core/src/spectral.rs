//! Spectral analysis of the data: covariance spectrum, numerical rank, generalized
//! incoherence, leverage scores and the condition-number report.
//!
//! With `X/√n = U Σ Vᵀ` the sample covariance is `C = (1/n) X Xᵀ = U Σ² Uᵀ`. For a
//! smoothing parameter `ρ > 0`:
//!
//! * numerical rank `γ(C, ρ) = Σ_j σ_j² / (σ_j² + ρ) = tr(H⁻¹ C)` with `H = ρI + C`,
//! * leverage `x_iᵀ H⁻¹ x_i = n Σ_j σ_j²/(σ_j² + ρ) V_ij²`,
//! * incoherence `μ(ρ) = max_i leverage_i / γ(C, ρ)`.

use std::fmt;

use nalgebra::DMatrix;

use crate::error::{input, Error, Result};
use crate::linalg::{self, column, dot};
use crate::losses::LossModel;

/// Eigenvalues below this fraction of the largest are treated as exact zeros.
pub const EIGEN_CLAMP_RELATIVE: f64 = 1e-12;

/// Floor applied to reported condition numbers.
pub const KAPPA_FLOOR: f64 = 1e-12;

/// Spectrum of the sample covariance `C = (1/n) X Xᵀ`.
#[derive(Debug, Clone)]
pub struct Spectrum {
    /// `σ_i²`, descending, nonnegative.
    pub eigenvalues: Vec<f64>,
    /// `U`, `d × k` with orthonormal columns.
    pub left_basis: DMatrix<f64>,
    /// `V`, `n × k` with orthonormal columns, when materialized.
    pub right_factors: Option<DMatrix<f64>>,
    pub n: usize,
    pub d: usize,
}

/// Thin decomposition of the covariance of `x` (`d × n`, one sample per column).
///
/// Uses a symmetric eigendecomposition of `(1/n) X Xᵀ` when `d ≤ n` and a thin
/// SVD of `X/√n` otherwise. `V` is not materialized.
pub fn covariance_spectrum(x: &DMatrix<f64>) -> Result<Spectrum> {
    decompose(x, false)
}

/// Like [`covariance_spectrum`] but also materializes the right factors `V`.
pub fn covariance_spectrum_with_factors(x: &DMatrix<f64>) -> Result<Spectrum> {
    decompose(x, true)
}

fn decompose(x: &DMatrix<f64>, want_v: bool) -> Result<Spectrum> {
    let (d, n) = x.shape();
    if d == 0 || n == 0 {
        return input(format!("data matrix must be non-empty, got {d}×{n}"));
    }
    linalg::ensure_finite(x, "data matrix")?;

    let inv_n = 1.0 / n as f64;
    if d <= n {
        let gram = (x * x.transpose()) * inv_n;
        let (mut values, basis) = linalg::sym_eig_desc(gram);
        clamp_eigenvalues(&mut values);
        let mut spec = Spectrum {
            eigenvalues: values,
            left_basis: basis,
            right_factors: None,
            n,
            d,
        };
        if want_v {
            spec.right_factors = Some(right_factors_from_left(x, &spec));
        }
        Ok(spec)
    } else {
        let scaled = x * inv_n.sqrt();
        let svd = scaled.svd(true, want_v);
        let u = svd.u.expect("requested U");
        let k = svd.singular_values.len();
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        let mut values: Vec<f64> = order
            .iter()
            .map(|&i| svd.singular_values[i] * svd.singular_values[i])
            .collect();
        clamp_eigenvalues(&mut values);
        let left_basis = DMatrix::from_fn(d, k, |r, c| u[(r, order[c])]);
        let right_factors = svd
            .v_t
            .map(|vt| DMatrix::from_fn(n, k, |r, c| vt[(order[c], r)]));
        Ok(Spectrum {
            eigenvalues: values,
            left_basis,
            right_factors,
            n,
            d,
        })
    }
}

fn clamp_eigenvalues(values: &mut [f64]) {
    let top = values.first().copied().unwrap_or(0.0).max(0.0);
    let floor = EIGEN_CLAMP_RELATIVE * top;
    for v in values.iter_mut() {
        if *v < floor || *v <= 0.0 {
            *v = 0.0;
        }
    }
}

/// `V = Xᵀ U Σ⁻¹ / √n` on the nonzero part of the spectrum, completed to an
/// orthonormal `n × k` matrix.
fn right_factors_from_left(x: &DMatrix<f64>, spec: &Spectrum) -> DMatrix<f64> {
    let n = spec.n as f64;
    let mut v = x.tr_mul(&spec.left_basis);
    for (j, &s2) in spec.eigenvalues.iter().enumerate() {
        if s2 > 0.0 {
            v.column_mut(j).scale_mut(1.0 / (n * s2).sqrt());
        } else {
            v.column_mut(j).fill(0.0);
        }
    }
    let needs_completion = spec.eigenvalues.iter().any(|&s| s == 0.0);
    if needs_completion || linalg::orthonormality_error(&v) > 1e-10 {
        linalg::orthonormalize_columns(&mut v);
    }
    v
}

impl Spectrum {
    /// Number of retained components, `min(n, d)`.
    pub fn k(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn top_eigenvalue(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    /// Number of strictly positive eigenvalues after clamping.
    pub fn rank(&self) -> usize {
        self.eigenvalues.iter().filter(|&&s| s > 0.0).count()
    }

    /// Materialize `V` for a spectrum computed without it.
    pub fn with_right_factors(mut self, x: &DMatrix<f64>) -> Result<Self> {
        if x.shape() != (self.d, self.n) {
            return input(format!(
                "data is {}×{}, spectrum was computed for {}×{}",
                x.nrows(),
                x.ncols(),
                self.d,
                self.n
            ));
        }
        if self.right_factors.is_none() {
            self.right_factors = Some(right_factors_from_left(x, &self));
        }
        Ok(self)
    }

    /// Weights `σ_j² / (σ_j² + ρ)`.
    pub fn shrinkage_weights(&self, rho: f64) -> Result<Vec<f64>> {
        check_rho(rho)?;
        Ok(self.eigenvalues.iter().map(|&s| s / (s + rho)).collect())
    }

    /// Numerical rank `γ(C, ρ) = Σ_i σ_i² / (σ_i² + ρ)`.
    pub fn numerical_rank(&self, rho: f64) -> Result<f64> {
        Ok(self.shrinkage_weights(rho)?.iter().sum())
    }

    /// Leverage scores `x_iᵀ H⁻¹ x_i = n Σ_j σ_j²/(σ_j²+ρ) V_ij²` for every sample.
    pub fn leverage_scores(&self, rho: f64) -> Result<Vec<f64>> {
        let v = self.right_factors.as_ref().ok_or_else(|| {
            Error::State("leverage scores need the right factors V".into())
        })?;
        let w = self.shrinkage_weights(rho)?;
        let n = self.n as f64;
        let mut scores = vec![0.0; self.n];
        for (j, &wj) in w.iter().enumerate() {
            if wj == 0.0 {
                continue;
            }
            for (s, &vij) in scores.iter_mut().zip(v.column(j).iter()) {
                *s += wj * vij * vij;
            }
        }
        scores.iter_mut().for_each(|s| *s *= n);
        Ok(scores)
    }

    /// Generalized incoherence `μ(ρ) = max_i (n/γ) Σ_j σ_j²/(σ_j²+ρ) V_ij²`.
    pub fn coherence(&self, rho: f64) -> Result<f64> {
        let gamma = self.numerical_rank(rho)?;
        if gamma <= 0.0 {
            return Err(Error::State(
                "coherence is undefined for a spectrum without positive eigenvalues".into(),
            ));
        }
        let scores = self.leverage_scores(rho)?;
        Ok(scores.iter().copied().fold(0.0, f64::max) / gamma)
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if rho.is_finite() && rho > 0.0 {
        Ok(())
    } else {
        input(format!("smoothing parameter rho must be positive, got {rho}"))
    }
}

/// Leverage scores computed from the data and `U` alone, without `V`:
/// `x_iᵀ H⁻¹ x_i = Σ_j (u_jᵀ x_i)² / (σ_j² + ρ)` (the columns of `X` lie in the
/// span of `U`). Useful when `n` is too large to hold `V`.
pub fn leverage_scores_from_data(x: &DMatrix<f64>, spec: &Spectrum, rho: f64) -> Result<Vec<f64>> {
    check_rho(rho)?;
    if x.nrows() != spec.d {
        return input(format!(
            "data has {} features, spectrum has {}",
            x.nrows(),
            spec.d
        ));
    }
    let proj = spec.left_basis.tr_mul(x);
    let inv: Vec<f64> = spec.eigenvalues.iter().map(|&s| 1.0 / (s + rho)).collect();
    Ok((0..x.ncols())
        .map(|i| {
            proj.column(i)
                .iter()
                .zip(&inv)
                .map(|(p, w)| p * p * w)
                .sum()
        })
        .collect())
}

/// Squared data-norm bound `R² = max_i ‖x_i‖²`.
pub fn max_sq_norm(x: &DMatrix<f64>) -> f64 {
    (0..x.ncols())
        .map(|i| {
            let c = column(x, i);
            dot(c, c)
        })
        .fold(0.0, f64::max)
}

/// Classical incoherence `max_ij √n |V_ij|` of an `n × k` orthonormal matrix.
pub fn classical_incoherence(v: &DMatrix<f64>) -> f64 {
    (v.nrows() as f64).sqrt() * v.amax()
}

/// Which preconditioned problem a [`ConditionReport`] describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportMode {
    /// No preconditioning; the "preconditioned" condition number is the original one.
    Identity,
    /// `H = ρI + C` with `ρ = λ/β`.
    Full,
    /// `Ĥ` built from `m` samples, `ρ̂ = nλ/(mβ)`, `β̂ = mβ/n`.
    Sampled { m: usize },
}

impl fmt::Display for ReportMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReportMode::Identity => f.write_str("identity"),
            ReportMode::Full => f.write_str("full"),
            ReportMode::Sampled { m } => write!(f, "sampled({m})"),
        }
    }
}

/// Condition numbers of the original and preconditioned problems together with
/// the data quantities that determine them.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub mode: ReportMode,
    pub lambda: f64,
    pub beta: f64,
    /// Strong convexity of the preconditioned problem: `β`, or `β̂` when sampled.
    pub effective_beta: f64,
    /// Smoothing parameter used for `γ` and `μ` (`ρ` or `ρ̂`).
    pub rho: f64,
    /// Prediction bound used in the Lipschitz-case formulas.
    pub r: f64,
    pub lipschitz: f64,
    pub smooth: bool,
    pub r_sq: f64,
    pub gamma: f64,
    pub mu: f64,
    pub kappa_original: f64,
    pub kappa_precond: f64,
    /// `λ(L+βr)²/(βL²) < R²/(μγ)`.
    pub cond1_holds: bool,
    /// `λ/β − λ/L < R²/(μγ)`.
    pub cond2_holds: bool,
    /// A condition number hit [`KAPPA_FLOOR`] (e.g. smooth loss with `β = L`).
    pub degenerate: bool,
}

impl ConditionReport {
    pub fn reduction(&self) -> f64 {
        self.kappa_original / self.kappa_precond
    }

    pub const CSV_HEADER: &'static str = "mode,lambda,beta,effective_beta,rho,r,L,smooth,R_sq,gamma,mu,kappa_original,kappa_precond,cond1,cond2,degenerate";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.mode,
            self.lambda,
            self.beta,
            self.effective_beta,
            self.rho,
            self.r,
            self.lipschitz,
            self.smooth,
            self.r_sq,
            self.gamma,
            self.mu,
            self.kappa_original,
            self.kappa_precond,
            self.cond1_holds,
            self.cond2_holds,
            self.degenerate
        )
    }
}

/// Build a [`ConditionReport`].
///
/// `spec` must carry `V`. `r` defaults to `R/√λ`. For smooth losses `β` may not
/// exceed the smoothness constant `L`.
pub fn condition_report(
    x: &DMatrix<f64>,
    spec: &Spectrum,
    loss: &LossModel,
    lambda: f64,
    beta: f64,
    r: Option<f64>,
    mode: ReportMode,
) -> Result<ConditionReport> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return input(format!("lambda must be positive, got {lambda}"));
    }
    if !(beta.is_finite() && beta > 0.0) {
        return input(format!("beta must be positive, got {beta}"));
    }
    let l = loss.lipschitz;
    if loss.smooth && beta > l {
        return input(format!(
            "beta = {beta} exceeds the smoothness constant L = {l} of the {} loss",
            loss.kind
        ));
    }
    if x.shape() != (spec.d, spec.n) {
        return input("data and spectrum dimensions differ");
    }
    let n = spec.n;
    let (rho, effective_beta) = match mode {
        ReportMode::Identity | ReportMode::Full => (lambda / beta, beta),
        ReportMode::Sampled { m } => {
            if m == 0 || m > n {
                return input(format!("sample size m = {m} must be in 1..={n}"));
            }
            let ratio = m as f64 / n as f64;
            (lambda / (ratio * beta), ratio * beta)
        }
    };

    let r_sq = max_sq_norm(x);
    let r = match r {
        Some(r) if r.is_finite() && r > 0.0 => r,
        Some(r) => return input(format!("prediction bound r must be positive, got {r}")),
        None => r_sq.sqrt() / lambda.sqrt(),
    };
    let gamma = spec.numerical_rank(rho)?;
    let mu = spec.coherence(rho)?;
    let mu_gamma = mu * gamma;

    let kappa_original_raw = if loss.smooth {
        l * r_sq / lambda
    } else {
        l * l * r_sq / lambda
    };
    let lipschitz_factor = (l + beta * r) * (l + beta * r);
    let kappa_precond_raw = match mode {
        ReportMode::Identity => kappa_original_raw,
        ReportMode::Full if loss.smooth => (l - beta) * mu_gamma / beta,
        ReportMode::Full => lipschitz_factor * mu_gamma / beta,
        ReportMode::Sampled { .. } if loss.smooth => l * mu_gamma / effective_beta,
        ReportMode::Sampled { .. } => lipschitz_factor * mu_gamma / effective_beta,
    };
    let degenerate = !(kappa_original_raw > KAPPA_FLOOR && kappa_precond_raw > KAPPA_FLOOR);
    if degenerate {
        log::warn!(
            "condition number floored at {KAPPA_FLOOR:e} (L = {l}, beta = {beta}, lambda = {lambda})"
        );
    }

    let data_ratio = r_sq / mu_gamma;
    let cond1_holds = lambda * lipschitz_factor / (beta * l * l) < data_ratio;
    let cond2_holds = lambda / beta - lambda / l < data_ratio;

    Ok(ConditionReport {
        mode,
        lambda,
        beta,
        effective_beta,
        rho,
        r,
        lipschitz: l,
        smooth: loss.smooth,
        r_sq,
        gamma,
        mu,
        kappa_original: kappa_original_raw.max(KAPPA_FLOOR),
        kappa_precond: kappa_precond_raw.max(KAPPA_FLOOR),
        cond1_holds,
        cond2_holds,
        degenerate,
    })
}
