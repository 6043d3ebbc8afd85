//! First-order stochastic solvers (SGD, ASG, SAG, SVRG) for linear models under
//! four formulations: the original problem, full preconditioning (`φ` losses),
//! naive change of variables, and sampled preconditioning (`ψ` losses).
//!
//! Every formulation has the shape
//!
//! ```text
//! F(v) = (1/n) Σ_i [ℓ(vᵀx_i, y_i) − (s_i/2)(vᵀx_i)²] + R(v)
//! ```
//!
//! where the per-sample shift `s_i` is `0` (original, naive), `β` (full), `β` on
//! the sampled set and `0` elsewhere (sampled), and `R` is `(α/2)‖v‖²` or, for
//! the naive formulation, `(λ/2) vᵀH⁻¹v`.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::datagen::content_digest;
use crate::error::{input, Error, Result};
use crate::linalg::{self, axpy, column, dot};
use crate::losses::LossModel;
use crate::precond::{PrecondMode, Preconditioner};
use crate::rng;
use crate::spectral::max_sq_norm;
use crate::trace::{Trace, TraceMeta, TraceRow};

/// Objective values above this abort a run.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

/// Gradient-norm target for the reference optimum.
pub const REFERENCE_GRAD_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub enum Formulation {
    /// `(1/n) Σ ℓ(wᵀx_i) + (λ/2)‖w‖²`
    Original { lambda: f64 },
    /// `(1/n) Σ φ(vᵀx̂_i) + (β/2)‖v‖²`
    PrecondFull { beta: f64 },
    /// `(1/n) Σ ℓ(uᵀx̂_i) + (λ/2) uᵀH⁻¹u`
    PrecondNaive {
        lambda: f64,
        precond: Arc<Preconditioner>,
    },
    /// `(1/n) Σ ψ(vᵀx̂_i) + (β̂/2)‖v‖²` with `ψ = φ` on the sampled set.
    PrecondSampled {
        beta: f64,
        beta_hat: f64,
        in_sample: Arc<Vec<bool>>,
    },
    /// Ablation: `φ` with `β̂` on every sample. Not equivalent to the original problem.
    SampledUniformPhi { beta_hat: f64 },
}

impl Formulation {
    pub fn name(&self) -> &'static str {
        match self {
            Formulation::Original { .. } => "original",
            Formulation::PrecondFull { .. } => "precond_full",
            Formulation::PrecondNaive { .. } => "precond_naive",
            Formulation::PrecondSampled { .. } => "precond_sampled",
            Formulation::SampledUniformPhi { .. } => "precond_sampled_uniform",
        }
    }

    /// Coefficient of the quadratic regularizer (`λ` for the naive form).
    pub fn reg_strength(&self) -> f64 {
        match self {
            Formulation::Original { lambda } | Formulation::PrecondNaive { lambda, .. } => *lambda,
            Formulation::PrecondFull { beta } => *beta,
            Formulation::PrecondSampled { beta_hat, .. } | Formulation::SampledUniformPhi { beta_hat } => {
                *beta_hat
            }
        }
    }

    fn cache_key(&self) -> String {
        match self {
            Formulation::Original { lambda } => format!("original:{:x}", lambda.to_bits()),
            Formulation::PrecondFull { beta } => format!("full:{:x}", beta.to_bits()),
            Formulation::PrecondNaive { lambda, precond } => format!(
                "naive:{:x}:{:x}",
                lambda.to_bits(),
                precond.rho.to_bits()
            ),
            Formulation::PrecondSampled { beta, beta_hat, in_sample } => {
                let members: Vec<String> = in_sample
                    .iter()
                    .enumerate()
                    .filter(|(_, &b)| b)
                    .map(|(i, _)| i.to_string())
                    .collect();
                format!(
                    "sampled:{:x}:{:x}:{}",
                    beta.to_bits(),
                    beta_hat.to_bits(),
                    members.join(",")
                )
            }
            Formulation::SampledUniformPhi { beta_hat } => format!("uniform:{:x}", beta_hat.to_bits()),
        }
    }
}

/// A regularized linear-model problem over a fixed `d × n` design.
#[derive(Debug, Clone)]
pub struct Problem {
    data: DMatrix<f64>,
    targets: Vec<f64>,
    loss: LossModel,
    formulation: Formulation,
    r_sq: f64,
    digest: OnceLock<u64>,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        input(format!("{name} must be positive, got {v}"))
    }
}

impl Problem {
    pub fn new(data: DMatrix<f64>, targets: Vec<f64>, loss: LossModel, formulation: Formulation) -> Result<Self> {
        let (d, n) = data.shape();
        if d == 0 || n == 0 {
            return Err(Error::EmptyDataset);
        }
        if targets.len() != n {
            return input(format!("{} targets for {n} samples", targets.len()));
        }
        linalg::ensure_finite(&data, "problem data")?;
        loss.validate_labels(&targets)?;
        match &formulation {
            Formulation::Original { lambda } => positive("lambda", *lambda)?,
            Formulation::PrecondFull { beta } => positive("beta", *beta)?,
            Formulation::PrecondNaive { lambda, precond } => {
                positive("lambda", *lambda)?;
                if precond.d != d || !matches!(precond.mode, PrecondMode::Full | PrecondMode::Naive) {
                    return input("naive formulation needs a full-data preconditioner of matching dimension");
                }
            }
            Formulation::PrecondSampled { beta, beta_hat, in_sample } => {
                positive("beta", *beta)?;
                positive("beta_hat", *beta_hat)?;
                if in_sample.len() != n {
                    return input(format!("membership mask has {} entries for {n} samples", in_sample.len()));
                }
                if !in_sample.iter().any(|&b| b) {
                    return input("membership set is empty");
                }
            }
            Formulation::SampledUniformPhi { beta_hat } => positive("beta_hat", *beta_hat)?,
        }
        let r_sq = max_sq_norm(&data);
        Ok(Self {
            data,
            targets,
            loss,
            formulation,
            r_sq,
            digest: OnceLock::new(),
        })
    }

    /// Build the preconditioned problem for `p` from original data `x`.
    /// `uniform_phi` selects the ablation variant for sampled preconditioners.
    pub fn from_preconditioner(
        x: &DMatrix<f64>,
        targets: Vec<f64>,
        loss: LossModel,
        p: &Arc<Preconditioner>,
        uniform_phi: bool,
    ) -> Result<Self> {
        let formulation = match p.mode {
            PrecondMode::Identity => {
                return Err(Error::State("identity preconditioner has no preconditioned formulation".into()))
            }
            PrecondMode::Full => Formulation::PrecondFull { beta: p.beta },
            PrecondMode::Naive => Formulation::PrecondNaive {
                lambda: p.lambda,
                precond: Arc::clone(p),
            },
            PrecondMode::Sampled if uniform_phi => Formulation::SampledUniformPhi {
                beta_hat: p.eff_strong_convexity,
            },
            PrecondMode::Sampled => Formulation::PrecondSampled {
                beta: p.beta,
                beta_hat: p.eff_strong_convexity,
                in_sample: Arc::new(p.membership().expect("sampled preconditioner stores its sample")),
            },
        };
        if p.n != x.ncols() {
            return input(format!(
                "preconditioner was built for {} samples, data has {}",
                p.n,
                x.ncols()
            ));
        }
        let data = p.precondition_dataset(x)?;
        Self::new(data, targets, loss, formulation)
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn loss(&self) -> &LossModel {
        &self.loss
    }

    pub fn formulation(&self) -> &Formulation {
        &self.formulation
    }

    pub fn n(&self) -> usize {
        self.data.ncols()
    }

    pub fn d(&self) -> usize {
        self.data.nrows()
    }

    /// `max_i ‖x_i‖²` of the problem's data.
    pub fn r_sq(&self) -> f64 {
        self.r_sq
    }

    pub fn digest(&self) -> u64 {
        *self
            .digest
            .get_or_init(|| content_digest(&self.data, &self.targets, 0))
    }

    /// Per-sample quadratic shift `s_i`.
    #[inline]
    fn shift(&self, i: usize) -> f64 {
        match &self.formulation {
            Formulation::Original { .. } | Formulation::PrecondNaive { .. } => 0.0,
            Formulation::PrecondFull { beta } => *beta,
            Formulation::PrecondSampled { beta, in_sample, .. } => {
                if in_sample[i] {
                    *beta
                } else {
                    0.0
                }
            }
            Formulation::SampledUniformPhi { beta_hat } => *beta_hat,
        }
    }

    /// `d/dz` of sample `i`'s loss at margin `z`.
    #[inline]
    pub fn sample_coefficient(&self, i: usize, z: f64) -> f64 {
        self.loss.grad(z, self.targets[i]) - self.shift(i) * z
    }

    #[inline]
    fn sample_value(&self, i: usize, z: f64) -> f64 {
        self.loss.value(z, self.targets[i]) - 0.5 * self.shift(i) * z * z
    }

    #[inline]
    fn sample_curvature(&self, i: usize, z: f64) -> f64 {
        self.loss.curvature(z, self.targets[i]) - self.shift(i)
    }

    fn check_dim(&self, w: &[f64]) -> Result<()> {
        if w.len() == self.d() {
            Ok(())
        } else {
            input(format!("iterate has length {}, problem has d = {}", w.len(), self.d()))
        }
    }

    fn naive_precond(&self) -> Option<&Preconditioner> {
        match &self.formulation {
            Formulation::PrecondNaive { precond, .. } => Some(precond),
            _ => None,
        }
    }

    fn reg_value(&self, w: &[f64]) -> f64 {
        let a = self.formulation.reg_strength();
        match self.naive_precond() {
            None => 0.5 * a * dot(w, w),
            Some(p) => {
                let mut h = w.to_vec();
                p.apply_h_inv_in_place(&mut h);
                0.5 * a * dot(w, &h)
            }
        }
    }

    /// `out += ∇R(w)`
    fn add_reg_grad(&self, w: &[f64], out: &mut [f64]) {
        let a = self.formulation.reg_strength();
        match self.naive_precond() {
            None => axpy(a, w, out),
            Some(p) => {
                let mut h = w.to_vec();
                p.apply_h_inv_in_place(&mut h);
                axpy(a, &h, out);
            }
        }
    }

    /// `w ← w − η ∇R(w)`, using `scratch` for the naive form.
    #[inline]
    fn reg_step(&self, w: &mut [f64], eta: f64, scratch: &mut [f64]) {
        let a = self.formulation.reg_strength();
        match self.naive_precond() {
            None => {
                let f = 1.0 - eta * a;
                w.iter_mut().for_each(|v| *v *= f);
            }
            Some(p) => {
                scratch.copy_from_slice(w);
                p.apply_h_inv_in_place(scratch);
                axpy(-eta * a, scratch, w);
            }
        }
    }

    fn margins(&self, w: &[f64]) -> Vec<f64> {
        (0..self.n()).map(|i| dot(column(&self.data, i), w)).collect()
    }

    fn objective_unchecked(&self, w: &[f64]) -> f64 {
        let n = self.n();
        let mut s = 0.0;
        for i in 0..n {
            s += self.sample_value(i, dot(column(&self.data, i), w));
        }
        s / n as f64 + self.reg_value(w)
    }

    /// Exact full-batch objective.
    pub fn objective(&self, w: &[f64]) -> Result<f64> {
        self.check_dim(w)?;
        Ok(self.objective_unchecked(w))
    }

    fn gradient_unchecked(&self, w: &[f64]) -> Vec<f64> {
        let n = self.n();
        let mut g = vec![0.0; self.d()];
        for i in 0..n {
            let x = column(&self.data, i);
            let c = self.sample_coefficient(i, dot(x, w));
            axpy(c / n as f64, x, &mut g);
        }
        self.add_reg_grad(w, &mut g);
        g
    }

    pub fn full_gradient(&self, w: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(w)?;
        Ok(self.gradient_unchecked(w))
    }

    /// Gradient of the `i`-th stochastic component `f_i(w) + R(w)`.
    pub fn sample_gradient(&self, i: usize, w: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(w)?;
        if i >= self.n() {
            return input(format!("sample {i} out of range"));
        }
        let x = column(&self.data, i);
        let mut g = vec![0.0; self.d()];
        axpy(self.sample_coefficient(i, dot(x, w)), x, &mut g);
        self.add_reg_grad(w, &mut g);
        Ok(g)
    }

    /// Strong convexity of the regularizer: `λ`, `β`, `β̂`, or `λ/(σ₁² + ρ)` (naive).
    pub fn strong_convexity(&self) -> f64 {
        match &self.formulation {
            Formulation::PrecondNaive { lambda, precond } => {
                let top = precond.sigma_sq.first().copied().unwrap_or(0.0);
                lambda / (top + precond.rho)
            }
            f => f.reg_strength(),
        }
    }

    /// Smoothness of the regularizer: as [`strong_convexity`](Self::strong_convexity)
    /// except `λ/ρ` for the naive form.
    fn reg_smoothness(&self) -> f64 {
        match &self.formulation {
            Formulation::PrecondNaive { lambda, precond } => lambda / precond.rho,
            f => f.reg_strength(),
        }
    }

    /// `L̃ = L·max_i‖x_i‖² + (regularizer smoothness)`.
    pub fn ltilde(&self) -> f64 {
        self.loss.lipschitz * self.r_sq + self.reg_smoothness()
    }

    fn hessian(&self, z: &[f64]) -> DMatrix<f64> {
        let n = self.n();
        let d = self.d();
        let mut scaled = self.data.clone();
        for i in 0..n {
            let c = self.sample_curvature(i, z[i]) / n as f64;
            scaled.column_mut(i).scale_mut(c);
        }
        let mut h = scaled * self.data.transpose();
        let a = self.formulation.reg_strength();
        match self.naive_precond() {
            None => {
                for j in 0..d {
                    h[(j, j)] += a;
                }
            }
            Some(p) => {
                for j in 0..d {
                    let mut e = vec![0.0; d];
                    e[j] = 1.0;
                    p.apply_h_inv_in_place(&mut e);
                    for (r, v) in e.iter().enumerate() {
                        h[(r, j)] += a * v;
                    }
                }
            }
        }
        h
    }
}

/// Minimizer found by [`reference_optimum`].
#[derive(Debug, Clone)]
pub struct Optimum {
    pub w: Vec<f64>,
    pub objective: f64,
    pub grad_norm: f64,
    pub iterations: usize,
}

type OptimumCache = Mutex<HashMap<(u64, String), Optimum>>;

fn optimum_cache() -> &'static OptimumCache {
    static CACHE: OnceLock<OptimumCache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// High-accuracy batch minimizer, cached per (data digest, formulation, loss).
///
/// Damped Newton with Armijo backtracking, run until the gradient norm is at
/// most [`REFERENCE_GRAD_TOL`] or no further decrease is possible.
pub fn reference_optimum(problem: &Problem) -> Result<Optimum> {
    let key = (
        problem.digest(),
        format!(
            "{}|{}|{:x}|{}",
            problem.formulation.cache_key(),
            problem.loss.kind,
            problem.loss.lipschitz.to_bits(),
            problem.d()
        ),
    );
    if let Some(hit) = optimum_cache().lock().expect("cache lock").get(&key) {
        return Ok(hit.clone());
    }
    let opt = newton(problem)?;
    optimum_cache()
        .lock()
        .expect("cache lock")
        .insert(key, opt.clone());
    Ok(opt)
}

fn newton(problem: &Problem) -> Result<Optimum> {
    let d = problem.d();
    let mut w = vec![0.0; d];
    let mut f = problem.objective_unchecked(&w);
    let mut g = problem.gradient_unchecked(&w);
    let mut gn = dot(&g, &g).sqrt();
    let mut it = 0;
    while gn > REFERENCE_GRAD_TOL && it < 200 {
        it += 1;
        let z = problem.margins(&w);
        let h = problem.hessian(&z);
        let gv = DVector::from_column_slice(&g);
        let dir: Vec<f64> = match h.cholesky() {
            Some(ch) => (-ch.solve(&gv)).as_slice().to_vec(),
            None => g.iter().map(|v| -v).collect(),
        };
        let slope = dot(&g, &dir);
        let mut t = 1.0;
        let mut accepted = None;
        while t > 1e-20 {
            let trial: Vec<f64> = w.iter().zip(&dir).map(|(a, b)| a + t * b).collect();
            let ft = problem.objective_unchecked(&trial);
            if ft.is_finite() && ft <= f + 1e-4 * t * slope {
                accepted = Some((trial, ft));
                break;
            }
            t *= 0.5;
        }
        let Some((trial, ft)) = accepted else { break };
        let gt = problem.gradient_unchecked(&trial);
        let gnt = dot(&gt, &gt).sqrt();
        let stalled = ft >= f && gnt >= gn;
        w = trial;
        f = ft;
        g = gt;
        gn = gnt;
        if stalled {
            break;
        }
    }
    if !f.is_finite() {
        return Err(Error::State("reference solve produced a non-finite objective".into()));
    }
    log::debug!("reference optimum: f = {f:e}, |g| = {gn:e} after {it} Newton steps");
    Ok(Optimum {
        w,
        objective: f,
        grad_norm: gn,
        iterations: it,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Sgd,
    Asg,
    Sag,
    Svrg,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Sgd => "sgd",
            Algorithm::Asg => "asg",
            Algorithm::Sag => "sag",
            Algorithm::Svrg => "svrg",
        }
    }

    pub fn default_step(&self) -> StepRule {
        match self {
            Algorithm::Sgd => StepRule::InverseT,
            Algorithm::Asg => StepRule::COverRsq(1.0),
            Algorithm::Sag => StepRule::OverLtilde(1.0),
            Algorithm::Svrg => StepRule::OverLtilde(0.1),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(Algorithm::Sgd),
            "asg" => Ok(Algorithm::Asg),
            "sag" => Ok(Algorithm::Sag),
            "svrg" => Ok(Algorithm::Svrg),
            other => input(format!("unknown algorithm `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    /// `η_t = 1/(μ t)` with `μ` the formulation's strong convexity.
    InverseT,
    Constant(f64),
    /// `η = scale / L̃`.
    OverLtilde(f64),
    /// `η = c / R²`.
    COverRsq(f64),
}

impl fmt::Display for StepRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepRule::InverseT => f.write_str("inverse_t"),
            StepRule::Constant(e) => write!(f, "constant({e})"),
            StepRule::OverLtilde(s) => write!(f, "over_ltilde({s})"),
            StepRule::COverRsq(c) => write!(f, "c_over_rsq({c})"),
        }
    }
}

impl FromStr for StepRule {
    type Err = Error;

    /// `inverse_t`, `constant:0.1`, `ltilde`, `ltilde:0.1`, `c_over_rsq:3`
    /// (parenthesized forms as printed by `Display` are accepted too).
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, arg) = if let Some((n, rest)) = s.split_once('(') {
            (n, Some(rest.trim_end_matches(')')))
        } else if let Some((n, a)) = s.split_once(':') {
            (n, Some(a))
        } else {
            (s, None)
        };
        let num = |a: Option<&str>| -> Result<f64> {
            let a = a.ok_or_else(|| Error::Input(format!("step rule `{s}` needs a value")))?;
            a.parse::<f64>()
                .map_err(|_| Error::Input(format!("bad step parameter in `{s}`")))
        };
        match name {
            "inverse_t" => Ok(StepRule::InverseT),
            "constant" => Ok(StepRule::Constant(num(arg)?)),
            "ltilde" | "over_ltilde" | "one_over_ltilde" => {
                Ok(StepRule::OverLtilde(if arg.is_some() { num(arg)? } else { 1.0 }))
            }
            "c_over_rsq" => Ok(StepRule::COverRsq(num(arg)?)),
            other => input(format!("unknown step rule `{other}`")),
        }
    }
}

/// How the SAG table average is normalized before every index is visited.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SagInit {
    /// Zero table, divide by the number of distinct indices seen so far.
    SeenCount,
    /// Zero table, always divide by `n`.
    DivideByN,
}

/// SVRG snapshot after each inner loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SvrgSnapshot {
    Last,
    Average,
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub algorithm: Algorithm,
    /// Passes over the data. Zero records only the starting point `w = 0`.
    pub epochs: usize,
    pub seed: u64,
    pub step: StepRule,
    /// Inner iterations per SVRG outer round; `None` means `2n`.
    pub svrg_inner: Option<usize>,
    /// Epochs between objective evaluations.
    pub eval_every: f64,
    /// Known optimum; fills the suboptimality column.
    pub reference: Option<f64>,
    /// Stop once suboptimality reaches this (requires `reference`).
    pub tolerance: Option<f64>,
    pub sag_init: SagInit,
    pub svrg_snapshot: SvrgSnapshot,
    /// Warn when a margin exceeds this bound.
    pub r_audit: Option<f64>,
}

impl SolverConfig {
    pub fn new(algorithm: Algorithm, epochs: usize, seed: u64) -> Self {
        Self {
            algorithm,
            epochs,
            seed,
            step: algorithm.default_step(),
            svrg_inner: None,
            eval_every: 1.0,
            reference: None,
            tolerance: None,
            sag_init: SagInit::SeenCount,
            svrg_snapshot: SvrgSnapshot::Last,
            r_audit: None,
        }
    }

    pub fn with_step(mut self, step: StepRule) -> Self {
        self.step = step;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eval_every.is_finite() && self.eval_every > 0.0) {
            return input(format!("eval_every must be positive, got {}", self.eval_every));
        }
        match self.step {
            StepRule::InverseT => {
                if self.algorithm != Algorithm::Sgd {
                    return input(format!("the inverse_t step rule applies to sgd, not {}", self.algorithm));
                }
            }
            StepRule::Constant(v) | StepRule::OverLtilde(v) | StepRule::COverRsq(v) => {
                positive("step parameter", v)?;
            }
        }
        if let Some(t) = self.tolerance {
            positive("tolerance", t)?;
        }
        Ok(())
    }
}

/// A finished run: its trace and final reported iterate.
#[derive(Debug, Clone)]
pub struct Run {
    pub trace: Trace,
    pub w: Vec<f64>,
}

/// Constant step size implied by `rule` (`None` for `inverse_t`).
pub fn step_size(problem: &Problem, rule: StepRule) -> Option<f64> {
    match rule {
        StepRule::InverseT => None,
        StepRule::Constant(e) => Some(e),
        StepRule::OverLtilde(s) => Some(s / problem.ltilde()),
        StepRule::COverRsq(c) => Some(c / problem.r_sq()),
    }
}

/// Run the configured algorithm.
pub fn solve(problem: &Problem, config: &SolverConfig) -> Result<Run> {
    match config.algorithm {
        Algorithm::Sgd => sgd(problem, config),
        Algorithm::Asg => asg(problem, config),
        Algorithm::Sag => sag(problem, config),
        Algorithm::Svrg => svrg(problem, config),
    }
}

struct Recorder<'a> {
    problem: &'a Problem,
    config: &'a SolverConfig,
    trace: Trace,
    start: Instant,
    next_eval: f64,
    max_abs_z: f64,
}

impl<'a> Recorder<'a> {
    fn new(problem: &'a Problem, config: &'a SolverConfig) -> Result<Self> {
        config.validate()?;
        if config.algorithm != Algorithm::Sgd && !problem.loss.smooth {
            return input(format!("{} requires a smooth loss", config.algorithm));
        }
        let beta = match &problem.formulation {
            Formulation::Original { .. } => None,
            Formulation::PrecondNaive { precond, .. } => Some(precond.beta),
            Formulation::PrecondFull { beta } | Formulation::PrecondSampled { beta, .. } => Some(*beta),
            Formulation::SampledUniformPhi { beta_hat } => Some(*beta_hat),
        };
        let lambda = match &problem.formulation {
            Formulation::Original { lambda } | Formulation::PrecondNaive { lambda, .. } => Some(*lambda),
            _ => None,
        };
        let m = match &problem.formulation {
            Formulation::PrecondSampled { in_sample, .. } => Some(in_sample.iter().filter(|&&b| b).count()),
            _ => None,
        };
        let meta = TraceMeta {
            algorithm: config.algorithm.name().into(),
            formulation: problem.formulation.name().into(),
            seed: config.seed,
            step_rule: config.step.to_string(),
            step_size: step_size(problem, config.step),
            lambda,
            beta,
            m,
            data_digest: Some(problem.digest()),
            max_abs_margin: None,
            reference_objective: config.reference,
        };
        Ok(Self {
            problem,
            config,
            trace: Trace::new(meta),
            start: Instant::now(),
            next_eval: 0.0,
            max_abs_z: 0.0,
        })
    }

    #[inline]
    fn observe(&mut self, z: f64) {
        let a = z.abs();
        if a > self.max_abs_z {
            self.max_abs_z = a;
        }
    }

    fn due(&self, epoch: f64) -> bool {
        epoch + 1e-9 >= self.next_eval
    }

    /// Record a row; returns true when the run should stop early.
    fn record(&mut self, epoch: f64, w: &[f64]) -> Result<bool> {
        let objective = self.problem.objective_unchecked(w);
        if !objective.is_finite() || objective > DIVERGENCE_THRESHOLD {
            self.trace.meta.max_abs_margin = Some(self.max_abs_z);
            return Err(Error::Diverged {
                epoch,
                objective,
                trace: Box::new(std::mem::take(&mut self.trace)),
            });
        }
        let suboptimality = self.config.reference.map(|f| objective - f);
        self.trace.push(TraceRow {
            epoch,
            objective,
            suboptimality,
            wall_seconds: self.start.elapsed().as_secs_f64(),
        });
        while self.next_eval <= epoch + 1e-9 {
            self.next_eval += self.config.eval_every;
        }
        Ok(match (suboptimality, self.config.tolerance) {
            (Some(s), Some(t)) => s <= t,
            _ => false,
        })
    }

    fn finish(mut self, w: Vec<f64>) -> Run {
        self.trace.meta.max_abs_margin = Some(self.max_abs_z);
        if let Some(r) = self.config.r_audit {
            if self.max_abs_z > r {
                log::warn!(
                    "largest observed margin {:.4e} exceeds the assumed bound r = {r:.4e}",
                    self.max_abs_z
                );
            }
        }
        Run { trace: self.trace, w }
    }
}

/// Driver for algorithms that take one stochastic step at a time. `step` gets
/// the 1-based step counter and the drawn index and returns the margin it saw.
fn run_stepwise<'a, F>(
    problem: &'a Problem,
    config: &'a SolverConfig,
    mut step: F,
    report: &dyn Fn(&[f64], &[f64]) -> Vec<f64>,
    w: &mut Vec<f64>,
    aux: &mut Vec<f64>,
) -> Result<Recorder<'a>>
where
    F: FnMut(u64, usize, &mut Vec<f64>, &mut Vec<f64>) -> f64,
{
    let mut rec = Recorder::new(problem, config)?;
    let n = problem.n();
    let total = config.epochs as u64 * n as u64;
    let mut r = rng::stream(config.seed, rng::STREAM_SOLVER);
    if rec.record(0.0, &report(w, aux))? {
        return Ok(rec);
    }
    let eval_steps = ((config.eval_every * n as f64).round() as u64).max(1);
    for t in 1..=total {
        let i = r.random_range(0..n);
        let z = step(t, i, w, aux);
        rec.observe(z);
        if (t % eval_steps == 0 || t == total) && rec.record(t as f64 / n as f64, &report(w, aux))? {
            break;
        }
    }
    Ok(rec)
}

fn plain_report(w: &[f64], _aux: &[f64]) -> Vec<f64> {
    w.to_vec()
}

/// Plain SGD, `w ← w − η_t (ℓ′(wᵀx_i) x_i + ∇R(w))`, uniform sampling with replacement.
pub fn sgd(problem: &Problem, config: &SolverConfig) -> Result<Run> {
    let mu = problem.strong_convexity();
    let fixed = step_size(problem, config.step);
    let mut scratch = vec![0.0; problem.d()];
    let mut w = vec![0.0; problem.d()];
    let mut aux = Vec::new();
    let rec = run_stepwise(
        problem,
        config,
        |t, i, w, _| {
            let eta = fixed.unwrap_or_else(|| 1.0 / (mu * t as f64));
            let x = column(&problem.data, i);
            let z = dot(x, w);
            let c = problem.sample_coefficient(i, z);
            problem.reg_step(w, eta, &mut scratch);
            axpy(-eta * c, x, w);
            z
        },
        &plain_report,
        &mut w,
        &mut aux,
    )?;
    Ok(rec.finish(w))
}

/// Constant-step SGD reporting the uniform average of the iterates.
pub fn asg(problem: &Problem, config: &SolverConfig) -> Result<Run> {
    let eta = match step_size(problem, config.step) {
        Some(e) => e,
        None => return input("asg needs a constant step rule"),
    };
    let mut scratch = vec![0.0; problem.d()];
    let mut w = vec![0.0; problem.d()];
    // running average of w_1..w_t
    let mut avg = vec![0.0; problem.d()];
    let rec = run_stepwise(
        problem,
        config,
        |t, i, w, avg| {
            let x = column(&problem.data, i);
            let z = dot(x, w);
            let c = problem.sample_coefficient(i, z);
            problem.reg_step(w, eta, &mut scratch);
            axpy(-eta * c, x, w);
            let k = 1.0 / t as f64;
            for (a, v) in avg.iter_mut().zip(w.iter()) {
                *a += k * (v - *a);
            }
            z
        },
        &|_w, avg| avg.to_vec(),
        &mut w,
        &mut avg,
    )?;
    Ok(rec.finish(avg))
}

/// SAG for linear models: the table stores scalar `ℓ′` values, the running sum
/// `Σ g_i x_i` is kept as a vector, and the regularizer gradient is exact.
pub fn sag(problem: &Problem, config: &SolverConfig) -> Result<Run> {
    let eta = match step_size(problem, config.step) {
        Some(e) => e,
        None => return input("sag needs a constant step rule"),
    };
    let n = problem.n();
    let d = problem.d();
    let mut table = vec![0.0; n];
    let mut seen = vec![false; n];
    let mut seen_count = 0usize;
    let mut scratch = vec![0.0; d];
    let mut w = vec![0.0; d];
    // sum of table entries times samples
    let mut sum = vec![0.0; d];
    let init = config.sag_init;
    let rec = run_stepwise(
        problem,
        config,
        |_, i, w, sum| {
            let x = column(&problem.data, i);
            let z = dot(x, w);
            let c = problem.sample_coefficient(i, z);
            axpy(c - table[i], x, sum);
            table[i] = c;
            if !seen[i] {
                seen[i] = true;
                seen_count += 1;
            }
            let denom = match init {
                SagInit::SeenCount => seen_count,
                SagInit::DivideByN => n,
            } as f64;
            problem.reg_step(w, eta, &mut scratch);
            axpy(-eta / denom, sum, w);
            z
        },
        &plain_report,
        &mut w,
        &mut sum,
    )?;
    Ok(rec.finish(w))
}

/// SVRG: each outer round evaluates the full gradient at the snapshot (one
/// epoch) and runs `svrg_inner` variance-reduced steps.
pub fn svrg(problem: &Problem, config: &SolverConfig) -> Result<Run> {
    let eta = match step_size(problem, config.step) {
        Some(e) => e,
        None => return input("svrg needs a constant step rule"),
    };
    let mut rec = Recorder::new(problem, config)?;
    let n = problem.n();
    let d = problem.d();
    let inner = config.svrg_inner.unwrap_or(2 * n);
    let round_cost = 1.0 + inner as f64 / n as f64;
    let rounds = match config.epochs {
        0 => 0,
        e => ((e as f64 / round_cost + 1e-9).floor() as usize).max(1),
    };
    let mut r = rng::stream(config.seed, rng::STREAM_SOLVER);

    let mut w = vec![0.0; d];
    let mut snap_coef = vec![0.0; n];
    let mut mu_loss = vec![0.0; d];
    let mut scratch = vec![0.0; d];
    let mut avg = vec![0.0; d];
    let mut epoch = 0.0;
    if rec.record(0.0, &w)? {
        return Ok(rec.finish(w));
    }
    for round in 1..=rounds {
        // full gradient of the loss part at the snapshot
        mu_loss.iter_mut().for_each(|v| *v = 0.0);
        for (i, sc) in snap_coef.iter_mut().enumerate() {
            let x = column(&problem.data, i);
            *sc = problem.sample_coefficient(i, dot(x, &w));
            axpy(*sc / n as f64, x, &mut mu_loss);
        }
        if inner == 0 {
            problem.reg_step(&mut w, eta, &mut scratch);
            axpy(-eta, &mu_loss, &mut w);
        } else {
            avg.iter_mut().for_each(|v| *v = 0.0);
            for k in 1..=inner {
                let i = r.random_range(0..n);
                let x = column(&problem.data, i);
                let z = dot(x, &w);
                rec.observe(z);
                let c = problem.sample_coefficient(i, z);
                problem.reg_step(&mut w, eta, &mut scratch);
                axpy(-eta * (c - snap_coef[i]), x, &mut w);
                axpy(-eta, &mu_loss, &mut w);
                if config.svrg_snapshot == SvrgSnapshot::Average {
                    let f = 1.0 / k as f64;
                    for (a, v) in avg.iter_mut().zip(&w) {
                        *a += f * (v - *a);
                    }
                }
            }
            if config.svrg_snapshot == SvrgSnapshot::Average {
                w.copy_from_slice(&avg);
            }
        }
        epoch = round as f64 * round_cost;
        if (rec.due(epoch) || round == rounds) && rec.record(epoch, &w)? {
            break;
        }
    }
    log::debug!("svrg finished after {epoch} epochs");
    Ok(rec.finish(w))
}
