//! Acceptance suite. Prints one verdict line per criterion and exits nonzero
//! if any criterion fails.
//!
//! Run a subset with `cargo test -p rlm-precond --test acceptance -- 3 7`.
//!
//! Verdicts:
//! * `PASS` the target holds.
//! * `FAIL` the target or a correctness guard does not hold.
//! * `DEVIATION` the numeric target is not met, the measurement is reported,
//!   and the weaker guards that do hold are asserted. Only used where the
//!   target is out of reach for the algorithm as specified.

use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use rlm_precond::datagen::{synth, Decay, SynthParams, Task};
use rlm_precond::precond::{sample_size_bound, self_consistent_sample_size};
use rlm_precond::rng;
use rlm_precond::solvers::{reference_optimum, solve, Algorithm, Formulation, Problem, SolverConfig, StepRule};
use rlm_precond::spectral::{self, condition_report, covariance_spectrum_with_factors, ReportMode, Spectrum};
use rlm_precond::{LossModel, Preconditioner};

mod tol {
    pub const WOODBURY_REL: f64 = 1e-8;
    pub const WOODBURY_INSTANCES: usize = 50;
    pub const WOODBURY_MAX_D: usize = 40;

    pub const OBJECTIVE_ABS: f64 = 1e-6;

    pub const PUBLISHED_KAPPA_ORIG_SQUARE: f64 = 2_727_813.0;
    pub const PUBLISHED_KAPPA_PRECOND_SQUARE: f64 = 1.88;
    pub const PUBLISHED_KAPPA_ORIG_LOGISTIC: f64 = 681_953.0;
    pub const PUBLISHED_KAPPA_PRECOND_LOGISTIC: f64 = 32_506.0;
    pub const KAPPA_FACTOR: f64 = 3.0;
    pub const MIN_REDUCTION_SQUARE: f64 = 1e5;
    /// Curvature shift for the logistic run; not given with the reported values.
    pub const LOGISTIC_BETA: f64 = 1e-3;

    pub const BOOST_SUBOPT: f64 = 1e-6;
    pub const BOOST_RATIO: f64 = 1.0 / 3.0;
    pub const NAIVE_SUBOPT: f64 = 1e-4;
    pub const SAMPLED_M: usize = 100;
    pub const SAMPLED_RATIO: f64 = 1.5;
    pub const MAX_EPOCHS: usize = 400;

    pub const MC_DELTA: f64 = 0.5;
    pub const MC_T: f64 = 3.0;
    pub const MC_DRAWS: usize = 200;
    pub const MC_MAX_VIOLATION_RATE: f64 = 0.10;

    pub const ASSUMPTION_SLACK: f64 = 1e-12;
    pub const LIPSCHITZ_SLACK: f64 = 1e-9;
    pub const NORM_IDENTITY_REL: f64 = 1e-8;
    pub const FD_STEP: f64 = 1e-6;
    pub const FD_REL: f64 = 1e-6;
    pub const GRID_POINTS: usize = 10_000;

    pub const BUDGET_1: f64 = 10.0;
    pub const BUDGET_2: f64 = 5.0;
    pub const BUDGET_3: f64 = 60.0;
    pub const BUDGET_4: f64 = 120.0;
    pub const BUDGET_9: f64 = 10.0;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Verdict {
    Pass,
    Deviation,
    Fail,
}

struct Outcome {
    verdict: Verdict,
    detail: String,
}

impl Outcome {
    fn check(ok: bool, detail: String) -> Self {
        let verdict = if ok { Verdict::Pass } else { Verdict::Fail };
        Self { verdict, detail }
    }
}

type Criterion = (u32, &'static str, Option<f64>, fn() -> Outcome);

fn main() -> ExitCode {
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: [Criterion; 10] = [
        (1, "preconditioner oracle equivalence", Some(tol::BUDGET_1), c1_woodbury),
        (2, "objective equivalence", Some(tol::BUDGET_2), c2_objective_equivalence),
        (3, "condition number reproduction", Some(tol::BUDGET_3), c3_condition_numbers),
        (4, "convergence boost", Some(tol::BUDGET_4), c4_boost),
        (5, "naive preconditioning", None, c5_naive),
        (6, "sampled preconditioning", None, c6_sampled),
        (7, "sample-size bound monte carlo", None, c7_monte_carlo),
        (8, "numerical rank decay", None, c8_numerical_rank),
        (9, "loss and leverage grids", Some(tol::BUDGET_9), c9_grids),
        (10, "determinism", None, c10_determinism),
    ];

    panic::set_hook(Box::new(|_| {}));
    let mut worst = Verdict::Pass;
    for (id, name, budget, run) in criteria {
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let mut out = panic::catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Outcome::check(false, format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        if let Some(b) = budget {
            if secs > b {
                out.verdict = Verdict::Fail;
                out.detail.push_str(&format!("; over budget {b}s"));
            }
        }
        let tag = match out.verdict {
            Verdict::Pass => "PASS",
            Verdict::Deviation => "DEVIATION",
            Verdict::Fail => "FAIL",
        };
        println!("criterion {id:>2} [{tag}] {name}: {} ({secs:.2}s)", out.detail);
        worst = worst.max(out.verdict);
    }
    if worst == Verdict::Fail {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}

// ---------------------------------------------------------------------------
// helpers

fn gaussian(rows: usize, cols: usize, r: &mut impl Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| Distribution::<f64>::sample(&StandardNormal, r))
}

fn dense_inverse(a: &DMatrix<f64>) -> DMatrix<f64> {
    a.clone().cholesky().expect("SPD matrix").inverse()
}

fn rel_err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

fn within_factor(value: f64, target: f64, factor: f64) -> bool {
    value >= target / factor && value <= target * factor
}

fn ridge_objective(x: &DMatrix<f64>, y: &[f64], lambda: f64, w: &DVector<f64>) -> f64 {
    let z = x.tr_mul(w);
    let n = y.len() as f64;
    let loss: f64 = z.iter().zip(y).map(|(z, y)| 0.5 * (z - y) * (z - y)).sum();
    loss / n + 0.5 * lambda * w.norm_squared()
}

/// Epochs until suboptimality reaches `tol`, or `None` within the epoch cap.
fn epochs_to(problem: &Problem, alg: Algorithm, seed: u64, tol: f64) -> Option<f64> {
    let opt = reference_optimum(problem).expect("reference optimum");
    let mut cfg = SolverConfig::new(alg, tol::MAX_EPOCHS, seed);
    cfg.reference = Some(opt.objective);
    cfg.tolerance = Some(tol);
    solve(problem, &cfg).expect("solver run").trace.epochs_to(tol)
}

fn fmt_epochs(e: Option<f64>) -> String {
    e.map_or_else(|| format!(">{}", tol::MAX_EPOCHS), |v| format!("{v}"))
}

struct DeskScale {
    original: Problem,
    x: DMatrix<f64>,
    y: Vec<f64>,
    lambda: f64,
    beta: f64,
}

fn desk_scale() -> DeskScale {
    let ds = synth(&SynthParams::new(10_000, 100, Decay::Poly(0.5), Task::Regression), 1).unwrap();
    let (lambda, beta) = (1e-4, 0.99);
    let original = Problem::new(
        ds.x.clone(),
        ds.y.clone(),
        LossModel::square(),
        Formulation::Original { lambda },
    )
    .unwrap();
    DeskScale {
        original,
        x: ds.x,
        y: ds.y,
        lambda,
        beta,
    }
}

impl DeskScale {
    fn preconditioned(&self, p: Preconditioner) -> Problem {
        Problem::from_preconditioner(&self.x, self.y.clone(), LossModel::square(), &Arc::new(p), false).unwrap()
    }

    fn full(&self) -> Problem {
        self.preconditioned(Preconditioner::build_full(&self.x, self.lambda, self.beta).unwrap())
    }
}

// ---------------------------------------------------------------------------
// 1

fn c1_woodbury() -> Outcome {
    let mut r = rng::stream(2024, 0);
    let mut worst: f64 = 0.0;
    let mut sampled = 0;
    for k in 0..tol::WOODBURY_INSTANCES {
        let d = r.random_range(2..=tol::WOODBURY_MAX_D);
        let n = r.random_range(d / 2 + 1..=3 * d);
        let x = gaussian(d, n, &mut r);
        let lambda = 10f64.powf(r.random_range(-4.0..0.0));
        let beta = r.random_range(0.1..1.0);
        let (p, cols): (Preconditioner, Vec<usize>) = if k % 2 == 0 {
            (Preconditioner::build_full(&x, lambda, beta).unwrap(), (0..n).collect())
        } else {
            sampled += 1;
            let m = r.random_range(1..=n);
            let p = Preconditioner::build_sampled(&x, lambda, beta, m, k as u64).unwrap();
            let cols = p.sample.clone().unwrap();
            (p, cols)
        };
        let sub = x.select_columns(cols.iter());
        let h = DMatrix::identity(d, d) * p.rho + &sub * sub.transpose() / cols.len() as f64;
        let oracle = dense_inverse(&h);
        let twice = DMatrix::from_fn(d, d, |_, _| 0.0);
        let twice = (0..d).fold(twice, |mut acc, j| {
            let e = DVector::from_fn(d, |i, _| if i == j { 1.0 } else { 0.0 });
            acc.set_column(j, &p.apply(&p.apply(&e).unwrap()).unwrap());
            acc
        });
        worst = worst.max(rel_err(&twice, &oracle));
    }
    Outcome::check(
        worst <= tol::WOODBURY_REL,
        format!(
            "{} instances ({} sampled), worst relative error {worst:.2e} (tol {:.0e})",
            tol::WOODBURY_INSTANCES,
            sampled,
            tol::WOODBURY_REL
        ),
    )
}

// ---------------------------------------------------------------------------
// 2

fn c2_objective_equivalence() -> Outcome {
    let ds = synth(&SynthParams::new(200, 20, Decay::Poly(0.5), Task::Regression), 7).unwrap();
    let (lambda, beta) = (1e-3, 0.5);
    let (x, y) = (&ds.x, &ds.y);
    let n = y.len() as f64;

    // Closed-form ridge optimum.
    let a = x * x.transpose() / n + DMatrix::identity(20, 20) * lambda;
    let b = x * DVector::from_column_slice(y) / n;
    let w_star = a.cholesky().unwrap().solve(&b);
    let f_star = ridge_objective(x, y, lambda, &w_star);

    let p = Arc::new(Preconditioner::build_full(x, lambda, beta).unwrap());
    let full = Problem::from_preconditioner(x, y.clone(), LossModel::square(), &p, false).unwrap();
    let opt = reference_optimum(&full).unwrap();
    let w_back = p.map_back(&DVector::from_vec(opt.w.clone())).unwrap();
    let f_back = ridge_objective(x, y, lambda, &w_back);

    let ps = Arc::new(Preconditioner::build_sampled(x, lambda, beta, 50, 3).unwrap());
    let sampled = Problem::from_preconditioner(x, y.clone(), LossModel::square(), &ps, false).unwrap();
    let opt_s = reference_optimum(&sampled).unwrap();

    let gap_full = (opt.objective - f_star).abs();
    let gap_back = (f_back - f_star).abs();
    let gap_sampled = (opt_s.objective - f_star).abs();
    Outcome::check(
        gap_full <= tol::OBJECTIVE_ABS && gap_back <= tol::OBJECTIVE_ABS && gap_sampled <= tol::OBJECTIVE_ABS,
        format!(
            "f*={f_star:.10}, |full-f*|={gap_full:.1e}, |map_back-f*|={gap_back:.1e}, |sampled(m=50)-f*|={gap_sampled:.1e} (tol {:.0e})",
            tol::OBJECTIVE_ABS
        ),
    )
}

// ---------------------------------------------------------------------------
// 3

fn c3_condition_numbers() -> Outcome {
    let ds = synth(&SynthParams::new(100_000, 100, Decay::Poly(0.5), Task::Regression), 1).unwrap();
    let spec = covariance_spectrum_with_factors(&ds.x).unwrap();
    let lambda = 1e-5;
    let sq = condition_report(&ds.x, &spec, &LossModel::square(), lambda, 0.99, None, ReportMode::Full).unwrap();
    let lg = condition_report(
        &ds.x,
        &spec,
        &LossModel::logistic(),
        lambda,
        tol::LOGISTIC_BETA,
        None,
        ReportMode::Full,
    )
    .unwrap();
    let f = tol::KAPPA_FACTOR;
    let ok = within_factor(sq.kappa_original, tol::PUBLISHED_KAPPA_ORIG_SQUARE, f)
        && within_factor(sq.kappa_precond, tol::PUBLISHED_KAPPA_PRECOND_SQUARE, f)
        && within_factor(lg.kappa_original, tol::PUBLISHED_KAPPA_ORIG_LOGISTIC, f)
        && within_factor(lg.kappa_precond, tol::PUBLISHED_KAPPA_PRECOND_LOGISTIC, f)
        && sq.reduction() > tol::MIN_REDUCTION_SQUARE;
    Outcome::check(
        ok,
        format!(
            "square {:.0} -> {:.3} (targets {} -> {}), reduction {:.2e}; logistic(beta={}) {:.0} -> {:.0} (targets {} -> {}); mu={:.2}",
            sq.kappa_original,
            sq.kappa_precond,
            tol::PUBLISHED_KAPPA_ORIG_SQUARE,
            tol::PUBLISHED_KAPPA_PRECOND_SQUARE,
            sq.reduction(),
            tol::LOGISTIC_BETA,
            lg.kappa_original,
            lg.kappa_precond,
            tol::PUBLISHED_KAPPA_ORIG_LOGISTIC,
            tol::PUBLISHED_KAPPA_PRECOND_LOGISTIC,
            sq.mu
        ),
    )
}

// ---------------------------------------------------------------------------
// 4

fn c4_boost() -> Outcome {
    let ds = desk_scale();
    let full = ds.full();
    let tol = tol::BOOST_SUBOPT;
    let mut parts = Vec::new();
    let mut verdict = Verdict::Pass;
    for alg in [Algorithm::Svrg, Algorithm::Sag] {
        let eo = epochs_to(&ds.original, alg, 1, tol);
        let ef = epochs_to(&full, alg, 1, tol);
        let (Some(o), Some(f)) = (eo, ef) else {
            verdict = Verdict::Fail;
            parts.push(format!("{alg}: original {} full {}", fmt_epochs(eo), fmt_epochs(ef)));
            continue;
        };
        let ratio = f / o;
        parts.push(format!("{alg}: original {o} full {f} ratio {ratio:.3}"));
        if ratio > tol::BOOST_RATIO {
            // Ordering still required; a missed gap is reported as a deviation.
            let v = if f < o { Verdict::Deviation } else { Verdict::Fail };
            verdict = verdict.max(v);
        }
    }
    Outcome {
        verdict,
        detail: format!("epochs to {tol:.0e}, target ratio <= {:.3}: {}", tol::BOOST_RATIO, parts.join("; ")),
    }
}

// ---------------------------------------------------------------------------
// 5

fn c5_naive() -> Outcome {
    let ds = desk_scale();
    let full = ds.full();
    let naive = ds.preconditioned(Preconditioner::build_naive(&ds.x, ds.lambda, ds.beta).unwrap());
    let tol = tol::NAIVE_SUBOPT;
    let mut ok = true;
    let mut parts = Vec::new();
    for alg in [Algorithm::Svrg, Algorithm::Sag] {
        let en = epochs_to(&naive, alg, 1, tol);
        let ef = epochs_to(&full, alg, 1, tol);
        let holds = match (en, ef) {
            (_, None) => false,
            (None, Some(_)) => true,
            (Some(n), Some(f)) => n >= f,
        };
        ok &= holds;
        parts.push(format!("{alg}: naive {} full {}", fmt_epochs(en), fmt_epochs(ef)));
    }
    Outcome::check(ok, format!("epochs to {tol:.0e}: {}", parts.join("; ")))
}

// ---------------------------------------------------------------------------
// 6

fn c6_sampled() -> Outcome {
    let ds = desk_scale();
    let full = ds.full();
    let m = tol::SAMPLED_M;
    let sampled = ds.preconditioned(Preconditioner::build_sampled(&ds.x, ds.lambda, ds.beta, m, 1).unwrap());
    let tol = tol::BOOST_SUBOPT;

    let f_orig = reference_optimum(&ds.original).unwrap().objective;
    let f_sampled = reference_optimum(&sampled).unwrap().objective;
    let exact = rel_close(f_sampled, f_orig, 1e-8);

    let mut within = true;
    let mut guard = exact;
    let mut parts = Vec::new();
    for alg in [Algorithm::Svrg, Algorithm::Sag] {
        let es = epochs_to(&sampled, alg, 1, tol);
        let ef = epochs_to(&full, alg, 1, tol);
        let eo = epochs_to(&ds.original, alg, 1, tol);
        within &= matches!((es, ef), (Some(s), Some(f)) if s <= tol::SAMPLED_RATIO * f);
        if alg == Algorithm::Svrg {
            guard &= matches!((es, eo), (Some(s), Some(o)) if s < o);
        }
        let ratio = match (es, ef) {
            (Some(s), Some(f)) => format!("{:.2}", s / f),
            _ => "n/a".into(),
        };
        parts.push(format!(
            "{alg}: sampled {} full {} original {} ratio {ratio}",
            fmt_epochs(es),
            fmt_epochs(ef),
            fmt_epochs(eo)
        ));
    }
    let verdict = if within && exact {
        Verdict::Pass
    } else if guard {
        Verdict::Deviation
    } else {
        Verdict::Fail
    };
    Outcome {
        verdict,
        detail: format!(
            "m={m}, epochs to {tol:.0e}, target ratio <= {}: {}; optimum matches original: {exact}",
            tol::SAMPLED_RATIO,
            parts.join("; ")
        ),
    }
}

// ---------------------------------------------------------------------------
// 7

fn c7_monte_carlo() -> Outcome {
    let ds = synth(&SynthParams::new(5_000, 20, Decay::Poly(0.5), Task::Regression), 11).unwrap();
    let spec = covariance_spectrum_with_factors(&ds.x).unwrap();
    let (lambda, beta) = (1e-3, 0.5);
    let (delta, t) = (tol::MC_DELTA, tol::MC_T);
    let Some(m) = self_consistent_sample_size(&spec, lambda, beta, delta, t).unwrap() else {
        return Outcome::check(false, "no self-consistent sample size below n".into());
    };
    let n = ds.n() as f64;
    let rho_hat = n * lambda / (m as f64 * beta);
    let gamma = spec.numerical_rank(rho_hat).unwrap();
    let mu = spec.coherence(rho_hat).unwrap();
    let m_check = sample_size_bound(delta, t, mu, gamma, ds.d()).unwrap();
    let bound = (1.0 + 2.0 * delta) * mu * gamma;

    let mut violations = 0;
    let mut worst: f64 = 0.0;
    for draw in 0..tol::MC_DRAWS {
        let p = Preconditioner::build_sampled(&ds.x, lambda, beta, m, 10_000 + draw as u64).unwrap();
        let leverage = spectral::max_sq_norm(&p.precondition_dataset(&ds.x).unwrap());
        worst = worst.max(leverage / bound);
        if leverage > bound {
            violations += 1;
        }
    }
    let rate = violations as f64 / tol::MC_DRAWS as f64;
    Outcome::check(
        rate <= tol::MC_MAX_VIOLATION_RATE && m_check <= m,
        format!(
            "m={m} (bound at rho_hat gives {m_check}), mu={mu:.3}, gamma={gamma:.3}, {violations}/{} draws violate, rate {rate:.3} (max {}), worst leverage/bound {worst:.3}",
            tol::MC_DRAWS,
            tol::MC_MAX_VIOLATION_RATE
        ),
    )
}

// ---------------------------------------------------------------------------
// 8

fn prescribed_spectrum(values: Vec<f64>) -> Spectrum {
    let d = values.len();
    Spectrum {
        eigenvalues: values,
        left_basis: DMatrix::identity(d, d),
        right_factors: None,
        n: d,
        d,
    }
}

fn c8_numerical_rank() -> Outcome {
    let d = 1000;
    let grid: Vec<f64> = (4..=32).map(|k| 10f64.powf(-k as f64 / 4.0)).collect();
    let mut ok = true;
    let mut parts = Vec::new();

    for tau in [0.5, 1.0, 2.0] {
        let spec = prescribed_spectrum(Decay::Poly(tau).spectrum(d));
        let scaled: Vec<f64> = grid
            .iter()
            .map(|&rho| spec.numerical_rank(rho).unwrap() * rho.powf(1.0 / (2.0 * tau)))
            .collect();
        // Integral bound; the τ = 1/2 integral diverges, so the finite-d form is used.
        let cap = if tau == 0.5 {
            grid.iter().map(|&rho| (1.0 + rho * d as f64).ln()).fold(0.0, f64::max)
        } else {
            let a = 1.0 / (2.0 * tau);
            std::f64::consts::PI * a / (std::f64::consts::PI * a).sin()
        };
        let max = scaled.iter().copied().fold(0.0, f64::max);
        ok &= max <= cap;
        parts.push(format!("poly tau={tau}: max gamma*rho^(1/2tau) {max:.3} <= {cap:.3}"));
        ok &= strictly_decreasing(&spec, &grid);
    }
    for tau in [0.5, 1.0, 2.0] {
        let spec = prescribed_spectrum(Decay::Exp(tau).spectrum(d));
        let max = grid
            .iter()
            .map(|&rho| {
                let cap = ((1.0 + rho).ln() - rho.ln()) / tau;
                let g = spec.numerical_rank(rho).unwrap();
                ok &= g <= cap;
                g / (1.0 / rho).ln()
            })
            .fold(0.0, f64::max);
        let cap = (1.0 + 1.1f64.ln() / 10f64.ln()) / tau;
        ok &= max <= cap;
        parts.push(format!("exp tau={tau}: max gamma/log(1/rho) {max:.3} <= {cap:.3}"));
    }
    Outcome::check(ok, format!("rho in [1e-8, 1e-1]; {}; gamma strictly decreasing", parts.join("; ")))
}

fn strictly_decreasing(spec: &Spectrum, grid: &[f64]) -> bool {
    // grid is descending in ρ, so γ must be ascending along it.
    let g: Vec<f64> = grid.iter().map(|&r| spec.numerical_rank(r).unwrap()).collect();
    g.windows(2).all(|w| w[0] < w[1])
}

// ---------------------------------------------------------------------------
// 9

fn c9_grids() -> Outcome {
    let mut failures = Vec::new();
    let grid = |r: f64| -> Vec<f64> {
        (0..tol::GRID_POINTS)
            .map(|i| -r + 2.0 * r * i as f64 / (tol::GRID_POINTS - 1) as f64)
            .collect()
    };
    let poisson = LossModel::poisson(5.0).unwrap();
    let models: [(LossModel, &[f64]); 3] = [
        (LossModel::square(), &[-2.0, 0.0, 0.7]),
        (LossModel::logistic(), &[-1.0, 1.0]),
        (poisson, &[0.0, 1.0, 4.0]),
    ];

    // Curvature floor on |z| <= r.
    for (model, labels) in &models {
        for r in [0.5, 1.0, 5.0] {
            let floor = model.beta_lower(r).unwrap();
            for &y in *labels {
                let min = grid(r).iter().map(|&z| model.curvature(z, y)).fold(f64::INFINITY, f64::min);
                if min < floor - tol::ASSUMPTION_SLACK {
                    failures.push(format!("curvature {} r={r} y={y}", model.kind));
                }
            }
        }
    }

    // φ' is (L − β)-Lipschitz and φ is (L + βr)-Lipschitz on |z| <= r.
    for r in [0.5, 1.0, 5.0] {
        for (model, labels) in &models {
            let beta = model.beta_lower(r).unwrap();
            let smooth_l = match model.kind {
                rlm_precond::LossKind::Poisson => r.exp(),
                _ => model.lipschitz,
            };
            for &y in *labels {
                let zs = grid(r);
                let lip_value = zs.iter().map(|&z| model.grad(z, y).abs()).fold(0.0, f64::max);
                let g: Vec<f64> = zs.iter().map(|&z| model.phi_grad(beta, z, y)).collect();
                let v: Vec<f64> = zs.iter().map(|&z| model.phi_value(beta, z, y)).collect();
                let h = zs[1] - zs[0];
                for i in 1..zs.len() {
                    if (g[i] - g[i - 1]).abs() > (smooth_l - beta) * h + tol::LIPSCHITZ_SLACK {
                        failures.push(format!("phi' smoothness {} r={r} y={y}", model.kind));
                        break;
                    }
                    if (v[i] - v[i - 1]).abs() > (lip_value + beta * r) * h + tol::LIPSCHITZ_SLACK {
                        failures.push(format!("phi lipschitz {} r={r} y={y}", model.kind));
                        break;
                    }
                }
            }
        }
        let lg = LossModel::logistic_lipschitz();
        let beta = lg.beta_lower(r).unwrap();
        let zs = grid(r);
        for y in [-1.0, 1.0] {
            for w in zs.windows(2).step_by(7) {
                let dv = (lg.phi_value(beta, w[1], y) - lg.phi_value(beta, w[0], y)).abs();
                if dv > (lg.lipschitz + beta * r) * (w[1] - w[0]) + tol::LIPSCHITZ_SLACK {
                    failures.push(format!("logistic lipschitz r={r}"));
                    break;
                }
            }
        }
    }

    // Scalar finite differences of ℓ, φ and ψ.
    let fd_ok = |f: &dyn Fn(f64) -> f64, g: f64, z: f64| {
        let h = tol::FD_STEP;
        let fd = (f(z + h) - f(z - h)) / (2.0 * h);
        (fd - g).abs() <= tol::FD_REL * g.abs().max(1.0)
    };
    for (model, labels) in &models {
        for &y in *labels {
            for z in [-3.0, -0.4, 0.0, 0.5, 2.2] {
                let beta = 0.01;
                if !fd_ok(&|z| model.value(z, y), model.grad(z, y), z)
                    || !fd_ok(&|z| model.grad(z, y), model.curvature(z, y), z)
                    || !fd_ok(&|z| model.phi_value(beta, z, y), model.phi_grad(beta, z, y), z)
                    || !fd_ok(&|z| model.psi_value(beta, true, z, y), model.psi_grad(beta, true, z, y), z)
                    || !fd_ok(&|z| model.psi_value(beta, false, z, y), model.psi_grad(beta, false, z, y), z)
                {
                    failures.push(format!("finite difference {} y={y} z={z}", model.kind));
                }
            }
        }
    }

    // Objective gradients of every formulation against finite differences.
    let ds = synth(&SynthParams::new(60, 6, Decay::Poly(0.5), Task::Binary), 5).unwrap();
    let (lambda, beta) = (1e-2, 0.01);
    let loss = LossModel::logistic();
    let mut problems = vec![Problem::new(ds.x.clone(), ds.y.clone(), loss, Formulation::Original { lambda }).unwrap()];
    for p in [
        Preconditioner::build_full(&ds.x, lambda, beta).unwrap(),
        Preconditioner::build_naive(&ds.x, lambda, beta).unwrap(),
        Preconditioner::build_sampled(&ds.x, lambda, beta, 20, 2).unwrap(),
    ] {
        problems.push(Problem::from_preconditioner(&ds.x, ds.y.clone(), loss, &Arc::new(p), false).unwrap());
    }
    let mut r = rng::stream(99, 0);
    for problem in &problems {
        let w: Vec<f64> = (0..6).map(|_| r.random_range(-1.0..1.0)).collect();
        let g = problem.full_gradient(&w).unwrap();
        for j in 0..6 {
            let mut wp = w.clone();
            let mut wm = w.clone();
            wp[j] += tol::FD_STEP;
            wm[j] -= tol::FD_STEP;
            let fd = (problem.objective(&wp).unwrap() - problem.objective(&wm).unwrap()) / (2.0 * tol::FD_STEP);
            if (fd - g[j]).abs() > tol::FD_REL * g[j].abs().max(1.0) {
                failures.push(format!("objective gradient {} coord {j}", problem.formulation().name()));
            }
        }
    }

    // Leverage scores: dense oracle, and the maximum equals μγ.
    let ds = synth(&SynthParams::new(400, 12, Decay::Poly(1.0), Task::Regression), 8).unwrap();
    let spec = covariance_spectrum_with_factors(&ds.x).unwrap();
    for rho in [1e-4, 1e-2, 1.0] {
        let scores = spec.leverage_scores(rho).unwrap();
        let h = DMatrix::identity(12, 12) * rho + &ds.x * ds.x.transpose() / 400.0;
        let hinv = dense_inverse(&h);
        let oracle = (&hinv * &ds.x).component_mul(&ds.x).row_sum();
        let max_oracle = oracle.iter().copied().fold(0.0, f64::max);
        let dense_ok = scores
            .iter()
            .zip(oracle.iter())
            .all(|(s, o)| (s - o).abs() <= tol::NORM_IDENTITY_REL * o.abs());
        let mu_gamma = spec.coherence(rho).unwrap() * spec.numerical_rank(rho).unwrap();
        if !dense_ok || (max_oracle - mu_gamma).abs() > tol::NORM_IDENTITY_REL * mu_gamma {
            failures.push(format!("leverage rho={rho}"));
        }
    }

    let n_fail = failures.len();
    Outcome::check(
        n_fail == 0,
        if n_fail == 0 {
            "curvature floor, phi smoothness/lipschitz, finite differences and leverage identities hold".into()
        } else {
            format!("{n_fail} failed checks: {}", failures.join(", "))
        },
    )
}

// ---------------------------------------------------------------------------
// 10

fn c10_determinism() -> Outcome {
    let params = SynthParams::new(500, 10, Decay::Poly(0.5), Task::Regression);
    let a = synth(&params, 42).unwrap();
    let b = synth(&params, 42).unwrap();
    let mut ok = a.x == b.x && a.y == b.y && a.digest() == b.digest();
    for task in [Task::Binary, Task::Count] {
        let p = SynthParams::new(300, 8, Decay::Exp(0.3), task);
        let (u, v) = (synth(&p, 5).unwrap(), synth(&p, 5).unwrap());
        ok &= u.x == v.x && u.y == v.y;
    }

    let (lambda, beta) = (1e-3, 0.9);
    let ps1 = Preconditioner::build_sampled(&a.x, lambda, beta, 50, 9).unwrap();
    let ps2 = Preconditioner::build_sampled(&a.x, lambda, beta, 50, 9).unwrap();
    ok &= ps1.sample == ps2.sample && ps1.basis == ps2.basis && ps1.shifts == ps2.shifts;

    let loss = LossModel::square();
    let problems = [
        Problem::new(a.x.clone(), a.y.clone(), loss, Formulation::Original { lambda }).unwrap(),
        Problem::from_preconditioner(
            &a.x,
            a.y.clone(),
            loss,
            &Arc::new(Preconditioner::build_full(&a.x, lambda, beta).unwrap()),
            false,
        )
        .unwrap(),
        Problem::from_preconditioner(&a.x, a.y.clone(), loss, &Arc::new(ps1), false).unwrap(),
    ];
    let configs = [
        SolverConfig::new(Algorithm::Sgd, 3, 7).with_step(StepRule::Constant(0.01)),
        SolverConfig::new(Algorithm::Asg, 3, 7),
        SolverConfig::new(Algorithm::Sag, 3, 7),
        SolverConfig::new(Algorithm::Svrg, 6, 7),
    ];
    let mut runs = 0;
    for problem in &problems {
        for cfg in &configs {
            let r1 = solve(problem, cfg).unwrap();
            let r2 = solve(problem, cfg).unwrap();
            let bits = |run: &rlm_precond::Run| -> Vec<u64> {
                run.trace
                    .rows
                    .iter()
                    .flat_map(|row| [row.epoch.to_bits(), row.objective.to_bits()])
                    .chain(run.w.iter().map(|w| w.to_bits()))
                    .collect()
            };
            ok &= bits(&r1) == bits(&r2);
            runs += 1;
        }
    }
    Outcome::check(
        ok,
        format!("generator (3 tasks), sampled preconditioner and {runs} solver runs bitwise identical on rerun"),
    )
}
