use std::fs;
use std::path::PathBuf;

use clap::Args;
use rlm_precond::datagen::{self, Decay, SynthParams, Task};

use crate::args::OutDirArgs;
use crate::exit::{self, CliResult};

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct GenArgs {
    #[arg(long)]
    pub n: usize,

    #[arg(long)]
    pub d: usize,

    /// `poly:τ` (σ_i² = i^{-2τ}) or `exp:τ` (σ_i² = e^{-τi}).
    #[arg(long, default_value = "poly:0.5")]
    pub decay: Decay,

    /// regression, binary or count.
    #[arg(long, default_value = "regression")]
    pub task: Task,

    #[arg(long, default_value_t = 1)]
    pub seed: u64,

    /// Allow n < d by swapping the roles of the factors.
    #[arg(long)]
    pub allow_wide: bool,

    /// Output file; defaults to a name derived from the parameters.
    #[arg(long, short)]
    pub out: Option<PathBuf>,

    #[command(flatten)]
    pub dir: OutDirArgs,
}

pub fn run(a: GenArgs) -> CliResult<u8> {
    let mut params = SynthParams::new(a.n, a.d, a.decay, a.task);
    params.allow_wide = a.allow_wide;
    let ds = datagen::synth(&params, a.seed)?;
    let default_name = format!("synth_n{}_d{}_{}_{}_s{}.prlm", a.n, a.d, a.decay, a.task, a.seed).replace(':', "-");
    let path = a.dir.resolve(&a.out, &default_name)?;
    datagen::save_binary(&ds, &path)?;
    let mut side = path.clone().into_os_string();
    side.push(".provenance");
    fs::write(&side, ds.provenance_lines())?;
    println!("wrote {}", path.display());
    println!("n={} d={} task={} digest={:016x}", ds.n(), ds.d(), ds.task, ds.digest());
    Ok(exit::OK)
}
