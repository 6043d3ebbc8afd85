use std::fs;
use std::path::PathBuf;

use clap::Args;
use rlm_precond::precond::{sample_indices, sample_size_bound, self_consistent_sample_size};
use rlm_precond::spectral::{condition_report, covariance_spectrum_with_factors};
use rlm_precond::{ConditionReport, Dataset, ReportMode};

use crate::args::{describe_source, DataArgs, LossArgs};
use crate::exit::{self, CliError, CliResult};

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub data: DataArgs,

    #[command(flatten)]
    pub loss: LossArgs,

    /// Prediction bound r for the Lipschitz-case formulas (default R/√λ).
    #[arg(long)]
    pub r: Option<f64>,

    /// Report the sampled preconditioner built from m columns.
    #[arg(long)]
    pub m: Option<usize>,

    /// Diagnose a uniform sample of this many columns instead of the full data.
    #[arg(long)]
    pub sample_m: Option<usize>,

    #[arg(long, default_value_t = 1)]
    pub sample_seed: u64,

    /// δ for the sample-size bound.
    #[arg(long, default_value_t = 0.5)]
    pub delta: f64,

    /// t for the sample-size bound (failure probability e^{-t}).
    #[arg(long, default_value_t = 3.0)]
    pub t: f64,

    /// Memory budget for the covariance decomposition.
    #[arg(long, default_value_t = 4096)]
    pub mem_budget_mb: u64,

    /// Also write the CSV row (with header) to this file.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

/// Bytes held by the decomposition, including the right factors.
fn decomposition_bytes(d: usize, n: usize) -> u128 {
    let (d, n) = (d as u128, n as u128);
    let k = d.min(n);
    if d <= n {
        8 * (2 * d * d + n * k)
    } else {
        8 * (2 * d * n + n * n)
    }
}

pub fn run(a: DiagnoseArgs) -> CliResult<u8> {
    let full = a.data.load()?;
    let ds = match a.sample_m {
        None => full,
        Some(m) => {
            if m == 0 || m > full.n() {
                return Err(CliError::usage(format!("--sample-m must be in 1..={}", full.n())));
            }
            let idx = sample_indices(full.n(), m, a.sample_seed);
            let x = full.x.select_columns(idx.iter());
            let y = idx.iter().map(|&i| full.y[i]).collect();
            println!("note=diagnosing a uniform sample of {m} of {} columns", full.n());
            Dataset::new(x, y, full.task)?
        }
    };
    let need = decomposition_bytes(ds.d(), ds.n());
    let budget = a.mem_budget_mb as u128 * 1024 * 1024;
    if need > budget {
        return Err(CliError::resource(format!(
            "decomposing a {}x{} dataset needs about {} MiB, above --mem-budget-mb {}; pass --sample-m M to diagnose a uniform sample of M columns",
            ds.d(),
            ds.n(),
            need / (1024 * 1024),
            a.mem_budget_mb
        )));
    }

    let model = a.loss.model(ds.task)?;
    let beta = a.loss.beta(&model);
    let lambda = a.loss.lambda;
    let mode = match a.m {
        Some(m) => ReportMode::Sampled { m },
        None => ReportMode::Full,
    };
    let spec = covariance_spectrum_with_factors(&ds.x)?;
    let rep = condition_report(&ds.x, &spec, &model, lambda, beta, a.r, mode)?;
    let m_min = sample_size_bound(a.delta, a.t, rep.mu, rep.gamma, ds.d())?;
    let m_self = self_consistent_sample_size(&spec, lambda, beta, a.delta, a.t)?;

    println!("source={}", describe_source(&ds));
    println!("n={} d={} loss={} L={} smooth={}", ds.n(), ds.d(), model.kind, model.lipschitz, model.smooth);
    print_report(&rep);
    println!("m_min(delta={},t={})={m_min}", a.delta, a.t);
    match m_self {
        Some(m) => println!("m_self_consistent={m}"),
        None => println!("m_self_consistent=none"),
    }
    println!("{}", ConditionReport::CSV_HEADER);
    println!("{}", rep.csv_row());
    if let Some(path) = &a.out {
        fs::write(path, format!("{}\n{}\n", ConditionReport::CSV_HEADER, rep.csv_row()))
            .map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
    }
    Ok(exit::OK)
}

fn print_report(r: &ConditionReport) {
    println!("mode={}", r.mode);
    println!("lambda={} beta={} effective_beta={}", r.lambda, r.beta, r.effective_beta);
    println!("rho={}", r.rho);
    println!("r={}", r.r);
    println!("R_sq={}", r.r_sq);
    println!("gamma={}", r.gamma);
    println!("mu={}", r.mu);
    println!("kappa_original={}", r.kappa_original);
    println!("kappa_precond={}", r.kappa_precond);
    println!("reduction={}", r.reduction());
    println!("cond1={}", r.cond1_holds);
    println!("cond2={}", r.cond2_holds);
    if r.degenerate {
        println!("degenerate=true");
    }
}
