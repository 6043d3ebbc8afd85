use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use rlm_precond::datagen::save_binary;
use rlm_precond::{Dataset, PrecondMode, Preconditioner};

use crate::args::{DataArgs, OutDirArgs};
use crate::exit::{self, CliError, CliResult};

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct PrecondArgs {
    #[command(flatten)]
    pub data: DataArgs,

    #[arg(long, default_value_t = 1e-4)]
    pub lambda: f64,

    #[arg(long, default_value_t = 0.99)]
    pub beta: f64,

    /// full, sampled or naive.
    #[arg(long, default_value = "full")]
    pub mode: PrecondMode,

    /// Sample size for the sampled mode.
    #[arg(long)]
    pub m: Option<usize>,

    #[arg(long, default_value_t = 1)]
    pub sample_seed: u64,

    /// Transformed dataset; the preconditioner goes to `<out>.precond`.
    #[arg(long, short)]
    pub out: Option<PathBuf>,

    #[command(flatten)]
    pub dir: OutDirArgs,
}

pub fn run(a: PrecondArgs) -> CliResult<u8> {
    let ds = a.data.load()?;
    let start = Instant::now();
    let p = match a.mode {
        PrecondMode::Full => Preconditioner::build_full(&ds.x, a.lambda, a.beta)?,
        PrecondMode::Naive => Preconditioner::build_naive(&ds.x, a.lambda, a.beta)?,
        PrecondMode::Sampled => {
            let m = a.m.ok_or_else(|| CliError::usage("sampled mode needs --m"))?;
            if m < 1 {
                return Err(CliError::usage("--m must be at least 1"));
            }
            Preconditioner::build_sampled(&ds.x, a.lambda, a.beta, m, a.sample_seed)?
        }
        PrecondMode::Identity => return Err(CliError::usage("identity mode has nothing to build")),
    };
    let build = start.elapsed().as_secs_f64();
    let x_hat = p.precondition_dataset(&ds.x)?;
    let total = start.elapsed().as_secs_f64();

    let out = Dataset::new(x_hat, ds.y.clone(), ds.task)?;
    let name = format!("precond_{}_{}.prlm", a.mode, out.n());
    let path = a.dir.resolve(&a.out, &name)?;
    save_binary(&out, &path)?;
    let mut side = path.clone().into_os_string();
    side.push(".precond");
    p.save(std::path::Path::new(&side))?;

    let n = out.n() as f64;
    let mean_sq = out.x.column_iter().map(|c| c.norm_squared()).sum::<f64>() / n;
    let gamma: f64 = p.sigma_sq.iter().map(|&s| s / (s + p.rho)).sum();
    println!("p-time={build:.6}");
    println!("total-time={total:.6}");
    println!("mode={} m={} rho={} effective_beta={}", p.mode, p.m, p.rho, p.eff_strong_convexity);
    println!("mean_sq_norm={mean_sq}");
    println!("gamma_build={gamma}");
    println!("wrote {}", path.display());
    println!("wrote {}", PathBuf::from(side).display());
    Ok(exit::OK)
}
