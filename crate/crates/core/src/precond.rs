//! The data preconditioner `H^{-1/2}` with `H = ρI + C`, its sampled variant
//! `Ĥ^{-1/2}` built from `m` columns, and the sample-size bound that makes the
//! sampled variant safe.
//!
//! Both are applied in closed form from a thin decomposition of the
//! (sub)sampled data:
//!
//! ```text
//! H^{-1/2} x = ρ^{-1/2} x − U (S (Uᵀ x)),   s_i = ρ^{-1/2} − (σ_i² + ρ)^{-1/2}
//! ```
//!
//! which costs `O(kd)` per vector.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::datagen::{load_matrix_binary, save_matrix_binary};
use crate::error::{input, Error, Result};
use crate::linalg;
use crate::rng;
use crate::spectral::covariance_spectrum;

/// Columns per block when preconditioning a whole dataset.
const APPLY_BLOCK: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PrecondMode {
    Identity,
    /// `H^{-1/2}` on all data.
    Full,
    /// `Ĥ^{-1/2}` from a uniform sample of `m` columns.
    Sampled,
    /// `H^{-1/2}` used as a plain change of variables, keeping the original loss
    /// and the regularizer `(λ/2) uᵀ H⁻¹ u`.
    Naive,
}

impl PrecondMode {
    pub fn name(&self) -> &'static str {
        match self {
            PrecondMode::Identity => "identity",
            PrecondMode::Full => "full",
            PrecondMode::Sampled => "sampled",
            PrecondMode::Naive => "naive",
        }
    }
}

impl fmt::Display for PrecondMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PrecondMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" | "none" => Ok(PrecondMode::Identity),
            "full" => Ok(PrecondMode::Full),
            "sampled" => Ok(PrecondMode::Sampled),
            "naive" => Ok(PrecondMode::Naive),
            other => input(format!("unknown preconditioner mode `{other}`")),
        }
    }
}

/// An immutable preconditioner. See the module docs for the closed form.
#[derive(Debug, Clone)]
pub struct Preconditioner {
    pub mode: PrecondMode,
    pub lambda: f64,
    pub beta: f64,
    /// `ρ = λ/β` (full, naive) or `ρ̂ = nλ/(mβ)` (sampled).
    pub rho: f64,
    /// `d × k` orthonormal basis (`U` or `Û`).
    pub basis: DMatrix<f64>,
    /// `s_i = ρ^{-1/2} − (σ_i² + ρ)^{-1/2}`.
    pub shifts: Vec<f64>,
    pub sigma_sq: Vec<f64>,
    /// `β` (full, naive) or `β̂ = mβ/n` (sampled).
    pub eff_strong_convexity: f64,
    /// Number of columns the preconditioner was built from.
    pub m: usize,
    pub n: usize,
    pub d: usize,
    /// Sorted sample indices (sampled mode only).
    pub sample: Option<Vec<usize>>,
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        input(format!("{name} must be positive, got {v}"))
    }
}

/// `ρ^{-1/2} − (σ² + ρ)^{-1/2}`, written to avoid cancellation for small `σ²`.
fn shift(sigma_sq: f64, rho: f64) -> f64 {
    let a = rho.sqrt();
    let b = (sigma_sq + rho).sqrt();
    sigma_sq / (a * b * (a + b))
}

impl Preconditioner {
    /// The identity map on `d`-vectors.
    pub fn identity(d: usize) -> Self {
        Self {
            mode: PrecondMode::Identity,
            lambda: f64::NAN,
            beta: f64::NAN,
            rho: 1.0,
            basis: DMatrix::zeros(d, 0),
            shifts: Vec::new(),
            sigma_sq: Vec::new(),
            eff_strong_convexity: f64::NAN,
            m: 0,
            n: 0,
            d,
            sample: None,
        }
    }

    /// `H^{-1/2}` with `H = (λ/β) I + (1/n) X Xᵀ`.
    pub fn build_full(x: &DMatrix<f64>, lambda: f64, beta: f64) -> Result<Self> {
        Self::build_over_all(x, lambda, beta, PrecondMode::Full)
    }

    /// Same operator as [`build_full`](Self::build_full), tagged for the naive
    /// change-of-variables formulation.
    pub fn build_naive(x: &DMatrix<f64>, lambda: f64, beta: f64) -> Result<Self> {
        Self::build_over_all(x, lambda, beta, PrecondMode::Naive)
    }

    fn build_over_all(x: &DMatrix<f64>, lambda: f64, beta: f64, mode: PrecondMode) -> Result<Self> {
        check_positive("lambda", lambda)?;
        check_positive("beta", beta)?;
        let spec = covariance_spectrum(x)?;
        let rho = lambda / beta;
        let n = x.ncols();
        Ok(Self {
            mode,
            lambda,
            beta,
            rho,
            shifts: spec.eigenvalues.iter().map(|&s| shift(s, rho)).collect(),
            sigma_sq: spec.eigenvalues,
            basis: spec.left_basis,
            eff_strong_convexity: beta,
            m: n,
            n,
            d: x.nrows(),
            sample: None,
        })
    }

    /// `Ĥ^{-1/2}` from `m` columns drawn uniformly without replacement.
    pub fn build_sampled(x: &DMatrix<f64>, lambda: f64, beta: f64, m: usize, seed: u64) -> Result<Self> {
        let n = x.ncols();
        if m == 0 || m > n {
            return input(format!("sample size m = {m} must be in 1..={n}"));
        }
        let indices = sample_indices(n, m, seed);
        Self::build_sampled_from_indices(x, lambda, beta, &indices)
    }

    /// `Ĥ^{-1/2}` from an explicit set of distinct column indices.
    pub fn build_sampled_from_indices(
        x: &DMatrix<f64>,
        lambda: f64,
        beta: f64,
        indices: &[usize],
    ) -> Result<Self> {
        check_positive("lambda", lambda)?;
        check_positive("beta", beta)?;
        let (d, n) = x.shape();
        let m = indices.len();
        if m == 0 || m > n {
            return input(format!("sample size m = {m} must be in 1..={n}"));
        }
        let mut sorted = indices.to_vec();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return input("sample indices must be distinct");
        }
        if let Some(&bad) = sorted.last().filter(|&&i| i >= n) {
            return input(format!("sample index {bad} out of range for {n} columns"));
        }
        let sub = x.select_columns(sorted.iter());
        let spec = covariance_spectrum(&sub)?;
        let ratio = m as f64 / n as f64;
        let beta_hat = ratio * beta;
        let rho_hat = lambda / beta_hat;
        Ok(Self {
            mode: PrecondMode::Sampled,
            lambda,
            beta,
            rho: rho_hat,
            shifts: spec.eigenvalues.iter().map(|&s| shift(s, rho_hat)).collect(),
            sigma_sq: spec.eigenvalues,
            basis: spec.left_basis,
            eff_strong_convexity: beta_hat,
            m,
            n,
            d,
            sample: Some(sorted),
        })
    }

    /// Per-sample membership in the set that built the preconditioner.
    pub fn membership(&self) -> Option<Vec<bool>> {
        self.sample.as_ref().map(|idx| {
            let mut mask = vec![false; self.n];
            for &i in idx {
                mask[i] = true;
            }
            mask
        })
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len == self.d {
            Ok(())
        } else {
            input(format!("vector has length {len}, preconditioner expects {}", self.d))
        }
    }

    /// `ρ^{-1/2} x − U (S (Uᵀ x))`; the identity in identity mode.
    pub fn apply(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dim(x.len())?;
        let mut out = x.clone();
        self.apply_in_place(out.as_mut_slice());
        Ok(out)
    }

    pub(crate) fn apply_in_place(&self, x: &mut [f64]) {
        if self.mode == PrecondMode::Identity {
            return;
        }
        let scale = self.rho.sqrt().recip();
        self.subtract_basis_term(x, &self.shifts, scale);
    }

    /// `x ← scale·x − U diag(coef) Uᵀ x`.
    fn subtract_basis_term(&self, x: &mut [f64], coef: &[f64], scale: f64) {
        let d = self.d;
        let basis = self.basis.as_slice();
        let proj: Vec<f64> = coef
            .iter()
            .enumerate()
            .map(|(j, &c)| c * linalg::dot(&basis[j * d..(j + 1) * d], x))
            .collect();
        x.iter_mut().for_each(|v| *v *= scale);
        for (j, &p) in proj.iter().enumerate() {
            if p != 0.0 {
                linalg::axpy(-p, &basis[j * d..(j + 1) * d], x);
            }
        }
    }

    /// `H⁻¹ u = ρ⁻¹ u − U diag(ρ⁻¹ − (σ² + ρ)⁻¹) Uᵀ u` (full and naive modes).
    pub fn apply_h_inv(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        if !matches!(self.mode, PrecondMode::Full | PrecondMode::Naive) {
            return Err(Error::State(format!(
                "H⁻¹ is only available for full or naive preconditioners, not {}",
                self.mode
            )));
        }
        self.check_dim(u.len())?;
        let mut out = u.clone();
        self.apply_h_inv_in_place(out.as_mut_slice());
        Ok(out)
    }

    pub(crate) fn apply_h_inv_in_place(&self, u: &mut [f64]) {
        let rho = self.rho;
        let coef: Vec<f64> = self.sigma_sq.iter().map(|&s| s / (rho * (s + rho))).collect();
        self.subtract_basis_term(u, &coef, rho.recip());
    }

    /// Apply to every column of `x`. Column `i` of the result is `apply(x_i)`.
    pub fn precondition_dataset(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_dim(x.nrows())?;
        if self.mode == PrecondMode::Identity {
            return Ok(x.clone());
        }
        let d = self.d;
        let mut out = x.clone();
        let scale = self.rho.sqrt().recip();
        let shifted_basis = {
            let mut b = self.basis.clone();
            for (j, &s) in self.shifts.iter().enumerate() {
                b.column_mut(j).scale_mut(s);
            }
            b
        };
        out.as_mut_slice()
            .par_chunks_mut(APPLY_BLOCK * d.max(1))
            .for_each(|chunk| {
                let cols = chunk.len() / d.max(1);
                let block = DMatrix::from_column_slice(d, cols, chunk);
                let proj = self.basis.tr_mul(&block);
                let result = block * scale - &shifted_basis * proj;
                chunk.copy_from_slice(result.as_slice());
            });
        Ok(out)
    }

    /// Convert a solution `v` of the preconditioned problem back to `w = H^{-1/2} v`.
    pub fn map_back(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        if self.mode == PrecondMode::Identity {
            return Err(Error::State("map_back is undefined for the identity preconditioner".into()));
        }
        self.apply(v)
    }

    /// Persist to `path` (text, `key=value`) plus `path.basis` (binary matrix).
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path)?;
        let join = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",");
        writeln!(f, "mode={}", self.mode)?;
        writeln!(f, "lambda={:?}", self.lambda)?;
        writeln!(f, "beta={:?}", self.beta)?;
        writeln!(f, "rho={:?}", self.rho)?;
        writeln!(f, "eff_strong_convexity={:?}", self.eff_strong_convexity)?;
        writeln!(f, "m={}", self.m)?;
        writeln!(f, "n={}", self.n)?;
        writeln!(f, "d={}", self.d)?;
        writeln!(f, "sigma_sq={}", join(&self.sigma_sq))?;
        writeln!(f, "shifts={}", join(&self.shifts))?;
        if let Some(sample) = &self.sample {
            let s: Vec<String> = sample.iter().map(|i| i.to_string()).collect();
            writeln!(f, "sample={}", s.join(","))?;
        }
        save_matrix_binary(&self.basis, &basis_path(path))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let kv = crate::trace::parse_key_values(&text)?;
        let get = |k: &str| {
            kv.get(k)
                .ok_or_else(|| Error::Format(format!("preconditioner file lacks `{k}`")))
        };
        let num = |k: &str| -> Result<f64> {
            get(k)?
                .parse::<f64>()
                .map_err(|e| Error::Format(format!("bad `{k}`: {e}")))
        };
        let int = |k: &str| -> Result<usize> {
            get(k)?
                .parse::<usize>()
                .map_err(|e| Error::Format(format!("bad `{k}`: {e}")))
        };
        let floats = |k: &str| -> Result<Vec<f64>> {
            let s = get(k)?;
            if s.is_empty() {
                return Ok(Vec::new());
            }
            s.split(',')
                .map(|t| t.parse::<f64>().map_err(|e| Error::Format(format!("bad `{k}`: {e}"))))
                .collect()
        };
        let mode: PrecondMode = get("mode")?.parse()?;
        let sample = match kv.get("sample") {
            Some(s) if !s.is_empty() => Some(
                s.split(',')
                    .map(|t| t.parse::<usize>().map_err(|e| Error::Format(format!("bad `sample`: {e}"))))
                    .collect::<Result<Vec<_>>>()?,
            ),
            _ => None,
        };
        let basis = load_matrix_binary(&basis_path(path))?;
        let p = Self {
            mode,
            lambda: num("lambda")?,
            beta: num("beta")?,
            rho: num("rho")?,
            eff_strong_convexity: num("eff_strong_convexity")?,
            m: int("m")?,
            n: int("n")?,
            d: int("d")?,
            sigma_sq: floats("sigma_sq")?,
            shifts: floats("shifts")?,
            basis,
            sample,
        };
        if p.basis.nrows() != p.d || p.basis.ncols() != p.shifts.len() || p.shifts.len() != p.sigma_sq.len() {
            return Err(Error::Format("preconditioner basis and shifts disagree".into()));
        }
        Ok(p)
    }
}

fn basis_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".basis");
    s.into()
}

/// `m` distinct indices from `0..n`, uniformly without replacement, sorted.
pub fn sample_indices(n: usize, m: usize, seed: u64) -> Vec<usize> {
    let mut r = rng::stream(seed, rng::STREAM_SAMPLING);
    let mut idx = rand::seq::index::sample(&mut r, n, m).into_vec();
    idx.sort_unstable();
    idx
}

/// Minimal sample size for the sampled preconditioner:
/// `⌈(2/δ²)(μγ + 1)(t + log d)⌉`, valid for `0 < δ ≤ 1/2`, with probability
/// `1 − e^{−t}`.
pub fn sample_size_bound(delta: f64, t: f64, mu: f64, gamma: f64, d: usize) -> Result<usize> {
    if !(delta > 0.0 && delta <= 0.5) {
        return input(format!("delta must lie in (0, 1/2], got {delta}"));
    }
    if !(t.is_finite() && t > 0.0) {
        return input(format!("t must be positive, got {t}"));
    }
    if !(mu.is_finite() && gamma.is_finite() && mu >= 0.0 && gamma >= 0.0) || d == 0 {
        return input("mu and gamma must be finite and nonnegative, d positive");
    }
    let bound = 2.0 / (delta * delta) * (mu * gamma + 1.0) * (t + (d as f64).ln());
    Ok(bound.ceil() as usize)
}

/// Smallest `m` satisfying the sample-size bound when `μ` and `γ` are taken at
/// `ρ̂ = nλ/(mβ)`, which itself depends on `m`. Iterates `m ← bound(m)` from
/// `m = 1`; the bound is nondecreasing in `m`, so this reaches the least fixed
/// point. Returns `None` if no `m ≤ n` satisfies it.
pub fn self_consistent_sample_size(
    spec: &crate::spectral::Spectrum,
    lambda: f64,
    beta: f64,
    delta: f64,
    t: f64,
) -> Result<Option<usize>> {
    check_positive("lambda", lambda)?;
    check_positive("beta", beta)?;
    let n = spec.n;
    let mut m = 1usize;
    for _ in 0..10_000 {
        let rho_hat = n as f64 * lambda / (m as f64 * beta);
        let gamma = spec.numerical_rank(rho_hat)?;
        let mu = spec.coherence(rho_hat)?;
        let next = sample_size_bound(delta, t, mu, gamma, spec.d)?;
        if next <= m {
            return Ok(Some(m));
        }
        if next > n {
            return Ok(None);
        }
        m = next;
    }
    Ok(None)
}
