use std::fs;
use std::io::BufWriter;
use std::path::PathBuf;

use clap::Args;
use rayon::prelude::*;
use rlm_precond::trace::{write_long_csv, LabeledTrace};
use rlm_precond::{Algorithm, Problem};

use crate::args::{build_problem, DataArgs, FormSpec, LossArgs, OutDirArgs};
use crate::cmd::solve::{execute, SolverArgs};
use crate::exit::{self, CliError, CliResult};

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct CompareArgs {
    #[command(flatten)]
    pub data: DataArgs,

    #[command(flatten)]
    pub loss: LossArgs,

    /// Formulations; `sampled` expands over --m-list.
    #[arg(long, value_delimiter = ',', action = clap::ArgAction::Set, default_value = "original,full,naive,sampled")]
    pub formulations: Vec<FormSpec>,

    #[arg(long, value_delimiter = ',', action = clap::ArgAction::Set, default_value = "sag,svrg,asg")]
    pub algorithms: Vec<Algorithm>,

    /// Sample sizes for sampled formulations.
    #[arg(long, value_delimiter = ',', action = clap::ArgAction::Set, default_value = "100")]
    pub m_list: Vec<usize>,

    /// Solver seeds.
    #[arg(long, value_delimiter = ',', action = clap::ArgAction::Set, default_value = "1")]
    pub seeds: Vec<u64>,

    #[arg(long, default_value_t = 1)]
    pub sample_seed: u64,

    #[command(flatten)]
    pub solver: SolverArgs,

    /// Worker threads (default: available cores).
    #[arg(long)]
    pub jobs: Option<usize>,

    /// Long-format CSV; per-run traces go to `<out-dir>/runs/`.
    #[arg(long, short)]
    pub out: Option<PathBuf>,

    #[command(flatten)]
    pub dir: OutDirArgs,
}

struct Job {
    id: usize,
    form: usize,
    alg: Algorithm,
    seed: u64,
}

pub fn run(a: CompareArgs) -> CliResult<u8> {
    if a.formulations.is_empty() || a.algorithms.is_empty() || a.seeds.is_empty() {
        return Err(CliError::usage("need at least one formulation, algorithm and seed"));
    }
    let ds = a.data.load()?;
    let model = a.loss.model(ds.task)?;
    let beta = a.loss.beta(&model);
    if !model.smooth {
        if let Some(alg) = a.algorithms.iter().find(|&&g| g != Algorithm::Sgd) {
            return Err(CliError::usage(format!("{alg} needs a smooth loss")));
        }
    }

    let mut forms: Vec<FormSpec> = Vec::new();
    for f in &a.formulations {
        match f {
            FormSpec::Sampled(None) | FormSpec::SampledUniform(None) => {
                forms.extend(a.m_list.iter().map(|&m| f.with_default_m(Some(m))))
            }
            other => forms.push(*other),
        }
    }
    forms.dedup();

    // Problems and reference optima are built once and shared by every run.
    let mut problems: Vec<Problem> = Vec::with_capacity(forms.len());
    let mut references: Vec<Option<f64>> = Vec::with_capacity(forms.len());
    for &f in &forms {
        let p = build_problem(&ds, model, a.loss.lambda, beta, f, a.sample_seed)?;
        references.push(a.solver.reference(&p)?);
        problems.push(p);
    }

    let mut jobs = Vec::new();
    for form in 0..forms.len() {
        for &alg in &a.algorithms {
            for &seed in &a.seeds {
                jobs.push(Job { id: jobs.len(), form, alg, seed });
            }
        }
    }

    let threads = a.jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| CliError::resource(e.to_string()))?;
    let results: Vec<CliResult<_>> = pool.install(|| {
        jobs.par_iter()
            .map(|j| {
                let cfg = a.solver.config(j.alg, j.seed, references[j.form]);
                execute(&problems[j.form], &cfg)
            })
            .collect()
    });

    let out_dir = a.dir.ensure()?.to_path_buf();
    let runs_dir = out_dir.join("runs");
    fs::create_dir_all(&runs_dir).map_err(|e| CliError::io(format!("{}: {e}", runs_dir.display())))?;

    let mut worst = exit::OK;
    let mut labeled = Vec::with_capacity(jobs.len());
    println!("run_id,algorithm,formulation,m,seed,status,final_suboptimality,epochs_to_tol");
    for (j, res) in jobs.iter().zip(results) {
        let form = forms[j.form];
        let m = form.m().map(|m| m.to_string()).unwrap_or_default();
        let out = match res {
            Ok(o) => o,
            Err(e) => {
                worst = worst.max(e.code);
                println!("{},{},{},{m},{},error: {},,", j.id, j.alg, form_name(form), j.seed, e.message);
                continue;
            }
        };
        worst = worst.max(out.code);
        let status = if out.error.is_some() { "diverged" } else { "ok" };
        let sub = out.trace.last().and_then(|r| r.suboptimality).map(|s| format!("{s:e}")).unwrap_or_default();
        let reached = a
            .solver
            .tol
            .and_then(|t| out.trace.epochs_to(t))
            .map(|e| e.to_string())
            .unwrap_or_default();
        println!("{},{},{},{m},{},{status},{sub},{reached}", j.id, j.alg, form_name(form), j.seed);

        let file = runs_dir.join(format!("{:03}_{}_{}_s{}.csv", j.id, j.alg, form, j.seed).replace(':', "-m"));
        out.trace.write(&file)?;
        labeled.push(LabeledTrace { run_id: j.id, trace: out.trace });
    }

    let path = a.dir.resolve(&a.out, "compare.csv")?;
    let f = fs::File::create(&path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
    write_long_csv(BufWriter::new(f), &labeled)?;
    println!("wrote {} ({} runs)", path.display(), labeled.len());
    Ok(worst)
}

fn form_name(f: FormSpec) -> &'static str {
    match f {
        FormSpec::Original => "original",
        FormSpec::Full => "precond_full",
        FormSpec::Naive => "precond_naive",
        FormSpec::Sampled(_) => "precond_sampled",
        FormSpec::SampledUniform(_) => "precond_sampled_uniform",
    }
}
