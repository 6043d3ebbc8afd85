use std::path::PathBuf;

use clap::{Args, ValueEnum};
use rlm_precond::solvers::{reference_optimum, solve, SagInit, SvrgSnapshot};
use rlm_precond::{Algorithm, Error, Problem, SolverConfig, StepRule, Trace};

use crate::args::{build_problem, DataArgs, FormSpec, LossArgs, OutDirArgs};
use crate::exit::{self, CliError, CliResult};

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SagInitArg {
    Seen,
    N,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SnapshotArg {
    Last,
    Average,
}

/// Solver settings shared by `solve` and `compare`.
#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,

    /// Step rule: inverse_t, constant:η, ltilde:s (s/L̃), c_over_rsq:c. Defaults per algorithm.
    #[arg(long)]
    pub step: Option<StepRule>,

    /// SVRG inner iterations per outer round (default 2n).
    #[arg(long)]
    pub svrg_inner: Option<usize>,

    #[arg(long, value_enum, default_value = "last")]
    pub svrg_snapshot: SnapshotArg,

    /// SAG average normalization before every index is seen.
    #[arg(long, value_enum, default_value = "seen")]
    pub sag_init: SagInitArg,

    /// Epochs between objective evaluations.
    #[arg(long, default_value_t = 1.0)]
    pub eval_every: f64,

    /// Stop once suboptimality reaches this.
    #[arg(long)]
    pub tol: Option<f64>,

    /// Warn when a margin |⟨v, x_i⟩| exceeds this bound.
    #[arg(long)]
    pub r_audit: Option<f64>,

    /// Skip the reference optimum; the suboptimality column stays empty.
    #[arg(long)]
    pub no_reference: bool,
}

impl SolverArgs {
    pub fn config(&self, alg: Algorithm, seed: u64, reference: Option<f64>) -> SolverConfig {
        let mut c = SolverConfig::new(alg, self.epochs, seed);
        if let Some(s) = self.step {
            c.step = s;
        }
        c.svrg_inner = self.svrg_inner;
        c.svrg_snapshot = match self.svrg_snapshot {
            SnapshotArg::Last => SvrgSnapshot::Last,
            SnapshotArg::Average => SvrgSnapshot::Average,
        };
        c.sag_init = match self.sag_init {
            SagInitArg::Seen => SagInit::SeenCount,
            SagInitArg::N => SagInit::DivideByN,
        };
        c.eval_every = self.eval_every;
        c.reference = reference;
        c.tolerance = self.tol;
        c.r_audit = self.r_audit;
        c
    }

    pub fn reference(&self, problem: &Problem) -> CliResult<Option<f64>> {
        if self.no_reference {
            return Ok(None);
        }
        let opt = reference_optimum(problem)?;
        log::info!(
            "reference optimum {} for {} (|g| = {:.2e}, {} iterations)",
            opt.objective,
            problem.formulation().name(),
            opt.grad_norm,
            opt.iterations
        );
        Ok(Some(opt.objective))
    }
}

/// Outcome of one run: the trace to write and the exit code it implies.
pub struct RunOutcome {
    pub trace: Trace,
    pub code: u8,
    pub error: Option<String>,
}

pub fn execute(problem: &Problem, config: &SolverConfig) -> CliResult<RunOutcome> {
    match solve(problem, config) {
        Ok(run) => Ok(RunOutcome { trace: run.trace, code: exit::OK, error: None }),
        Err(Error::Diverged { epoch, objective, trace }) => Ok(RunOutcome {
            trace: *trace,
            code: exit::DIVERGED,
            error: Some(format!("diverged at epoch {epoch} (objective {objective:e})")),
        }),
        Err(e) => Err(e.into()),
    }
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct SolveArgs {
    #[command(flatten)]
    pub data: DataArgs,

    #[command(flatten)]
    pub loss: LossArgs,

    /// original, full, naive, sampled[:m] or sampled_uniform[:m].
    #[arg(long, default_value = "full")]
    pub formulation: FormSpec,

    /// sgd, asg, sag or svrg.
    #[arg(long, default_value = "svrg")]
    pub algorithm: Algorithm,

    /// Sample size for sampled formulations.
    #[arg(long)]
    pub m: Option<usize>,

    #[arg(long, default_value_t = 1)]
    pub sample_seed: u64,

    /// Solver seed.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,

    #[command(flatten)]
    pub solver: SolverArgs,

    /// Trace CSV; metadata goes to `<out>.meta`.
    #[arg(long, short)]
    pub out: Option<PathBuf>,

    #[command(flatten)]
    pub dir: OutDirArgs,
}

pub fn run(a: SolveArgs) -> CliResult<u8> {
    let ds = a.data.load()?;
    let model = a.loss.model(ds.task)?;
    let beta = a.loss.beta(&model);
    let form = a.formulation.with_default_m(a.m);
    if a.algorithm != Algorithm::Sgd && !model.smooth {
        return Err(CliError::usage(format!("{} needs a smooth loss; drop --nonsmooth or use sgd", a.algorithm)));
    }
    let problem = build_problem(&ds, model, a.loss.lambda, beta, form, a.sample_seed)?;
    let reference = a.solver.reference(&problem)?;
    let config = a.solver.config(a.algorithm, a.seed, reference);
    let out = execute(&problem, &config)?;

    let name = format!("trace_{}_{}_s{}.csv", a.algorithm, form, a.seed).replace(':', "-m");
    let path = a.dir.resolve(&a.out, &name)?;
    out.trace.write(&path)?;

    if let Some(last) = out.trace.last() {
        println!("epoch={} objective={:?}", last.epoch, last.objective);
        if let Some(s) = last.suboptimality {
            println!("suboptimality={s:e}");
        }
    }
    if let (Some(t), true) = (a.solver.tol, reference.is_some()) {
        match out.trace.epochs_to(t) {
            Some(e) => println!("epochs_to_tol={e}"),
            None => println!("epochs_to_tol=none"),
        }
    }
    if let Some(m) = out.trace.meta.max_abs_margin {
        println!("max_abs_margin={m:e}");
    }
    println!("wrote {}", path.display());
    if let Some(msg) = &out.error {
        eprintln!("error: {msg}");
    }
    Ok(out.code)
}
