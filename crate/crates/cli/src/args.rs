//! Flags shared across subcommands and the dataset/problem setup they drive.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use clap::Args;
use rlm_precond::datagen::{self, Provenance};
use rlm_precond::{Dataset, Decay, LoadOptions, LossKind, LossModel, Preconditioner, Problem, SynthParams, Task};

use crate::exit::{CliError, CliResult};

/// Where the data comes from: a file, or synthetic parameters.
#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Dataset file (`.prlm`/`.bin` binary, `.csv` dense, otherwise sparse text).
    #[arg(long, conflicts_with_all = ["n", "d"])]
    pub data: Option<PathBuf>,

    /// Synthetic sample count.
    #[arg(long)]
    pub n: Option<usize>,

    /// Synthetic feature dimension.
    #[arg(long)]
    pub d: Option<usize>,

    /// Eigenvalue decay of the synthetic covariance (`poly:τ` or `exp:τ`).
    #[arg(long, default_value = "poly:0.5")]
    pub decay: Decay,

    /// Task for synthetic data and text loaders: regression, binary, count.
    #[arg(long, default_value = "regression")]
    pub task: Task,

    /// Seed for synthetic data.
    #[arg(long, default_value_t = 1)]
    pub data_seed: u64,

    /// Allow synthetic n < d.
    #[arg(long)]
    pub allow_wide: bool,

    /// Feature dimension for sparse text (inferred when absent).
    #[arg(long)]
    pub dim: Option<usize>,

    /// Map {0, 1} labels to {-1, +1} on load.
    #[arg(long)]
    pub map_binary_labels: bool,

    /// Affinely map targets from `lo:hi` to [0, 1] on load.
    #[arg(long, value_parser = parse_range)]
    pub target_range: Option<(f64, f64)>,
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or("expected lo:hi")?;
    let lo = a.trim().parse::<f64>().map_err(|e| e.to_string())?;
    let hi = b.trim().parse::<f64>().map_err(|e| e.to_string())?;
    Ok((lo, hi))
}

impl DataArgs {
    pub fn load(&self) -> CliResult<Dataset> {
        match (&self.data, self.n, self.d) {
            (Some(path), _, _) => {
                let opts = LoadOptions {
                    task: self.task,
                    dim: self.dim,
                    map_binary_labels: self.map_binary_labels,
                    target_range: self.target_range,
                };
                datagen::load_any(path, &opts).map_err(|e| with_path(e.into(), path))
            }
            (None, Some(n), Some(d)) => {
                let mut params = SynthParams::new(n, d, self.decay, self.task);
                params.allow_wide = self.allow_wide;
                Ok(datagen::synth(&params, self.data_seed)?)
            }
            _ => Err(CliError::usage("give either --data FILE or both --n and --d")),
        }
    }
}

fn with_path(mut e: CliError, path: &Path) -> CliError {
    e.message = format!("{}: {}", path.display(), e.message);
    e
}

/// Loss and regularization flags.
#[derive(Debug, Clone, Args)]
pub struct LossArgs {
    /// Loss: square, logistic, poisson. Defaults by task.
    #[arg(long)]
    pub loss: Option<LossKind>,

    /// Treat the logistic loss as 1-Lipschitz instead of 1/4-smooth.
    #[arg(long)]
    pub nonsmooth: bool,

    /// Prediction bound for the poisson loss (smoothness e^r).
    #[arg(long, default_value_t = 1.0)]
    pub poisson_r: f64,

    /// Regularization strength λ.
    #[arg(long, default_value_t = 1e-4)]
    pub lambda: f64,

    /// Curvature shift β. Defaults: 0.99 square, 1e-3 logistic, e^{-r} poisson.
    #[arg(long)]
    pub beta: Option<f64>,
}

impl LossArgs {
    pub fn model(&self, task: Task) -> CliResult<LossModel> {
        let kind = self.loss.unwrap_or(match task {
            Task::Regression => LossKind::Square,
            Task::Binary => LossKind::Logistic,
            Task::Count => LossKind::Poisson,
        });
        if self.nonsmooth && kind != LossKind::Logistic {
            return Err(CliError::usage("--nonsmooth applies to the logistic loss only"));
        }
        Ok(match kind {
            LossKind::Square => LossModel::square(),
            LossKind::Logistic if self.nonsmooth => LossModel::logistic_lipschitz(),
            LossKind::Logistic => LossModel::logistic(),
            LossKind::Poisson => LossModel::poisson(self.poisson_r)?,
        })
    }

    pub fn beta(&self, model: &LossModel) -> f64 {
        self.beta.unwrap_or(match model.kind {
            LossKind::Square => 0.99,
            LossKind::Logistic => 1e-3,
            LossKind::Poisson => (-self.poisson_r).exp(),
        })
    }
}

/// A formulation name as given on the command line; `sampled:M` carries `m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormSpec {
    Original,
    Full,
    Naive,
    Sampled(Option<usize>),
    SampledUniform(Option<usize>),
}

impl FromStr for FormSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (name, m) = match s.split_once(':') {
            Some((a, b)) => (a, Some(b.parse::<usize>().map_err(|e| format!("bad m in `{s}`: {e}"))?)),
            None => (s, None),
        };
        let f = match (name, m) {
            ("original", None) => FormSpec::Original,
            ("full" | "precond_full", None) => FormSpec::Full,
            ("naive" | "precond_naive", None) => FormSpec::Naive,
            ("sampled" | "precond_sampled", m) => FormSpec::Sampled(m),
            ("sampled_uniform" | "precond_sampled_uniform", m) => FormSpec::SampledUniform(m),
            _ => return Err(format!("unknown formulation `{s}`")),
        };
        Ok(f)
    }
}

impl fmt::Display for FormSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FormSpec::Original => f.write_str("original"),
            FormSpec::Full => f.write_str("full"),
            FormSpec::Naive => f.write_str("naive"),
            FormSpec::Sampled(None) => f.write_str("sampled"),
            FormSpec::Sampled(Some(m)) => write!(f, "sampled:{m}"),
            FormSpec::SampledUniform(None) => f.write_str("sampled_uniform"),
            FormSpec::SampledUniform(Some(m)) => write!(f, "sampled_uniform:{m}"),
        }
    }
}

impl FormSpec {
    pub fn with_default_m(self, m: Option<usize>) -> Self {
        match self {
            FormSpec::Sampled(None) => FormSpec::Sampled(m),
            FormSpec::SampledUniform(None) => FormSpec::SampledUniform(m),
            other => other,
        }
    }

    pub fn m(&self) -> Option<usize> {
        match self {
            FormSpec::Sampled(m) | FormSpec::SampledUniform(m) => *m,
            _ => None,
        }
    }
}

/// Build the problem for `form` on `ds`.
pub fn build_problem(
    ds: &Dataset,
    loss: LossModel,
    lambda: f64,
    beta: f64,
    form: FormSpec,
    sample_seed: u64,
) -> CliResult<Problem> {
    let x = &ds.x;
    let precond = match form {
        FormSpec::Original => {
            return Ok(Problem::new(
                x.clone(),
                ds.y.clone(),
                loss,
                rlm_precond::Formulation::Original { lambda },
            )?)
        }
        FormSpec::Full => Preconditioner::build_full(x, lambda, beta)?,
        FormSpec::Naive => Preconditioner::build_naive(x, lambda, beta)?,
        FormSpec::Sampled(m) | FormSpec::SampledUniform(m) => {
            let m = m.ok_or_else(|| CliError::usage(format!("formulation `{form}` needs --m or sampled:M")))?;
            if m == 0 {
                return Err(CliError::usage("m must be at least 1"));
            }
            Preconditioner::build_sampled(x, lambda, beta, m, sample_seed)?
        }
    };
    let uniform = matches!(form, FormSpec::SampledUniform(_));
    Ok(Problem::from_preconditioner(x, ds.y.clone(), loss, &Arc::new(precond), uniform)?)
}

/// Output directory flag, defaulting to `$RLMP_OUT_DIR` or the working directory.
#[derive(Debug, Clone, Args)]
pub struct OutDirArgs {
    /// Directory for outputs without an explicit path.
    #[arg(long, env = "RLMP_OUT_DIR", default_value = ".")]
    pub out_dir: PathBuf,
}

impl OutDirArgs {
    /// Create the directory if needed and return it.
    pub fn ensure(&self) -> CliResult<&Path> {
        std::fs::create_dir_all(&self.out_dir)
            .map_err(|e| CliError::io(format!("{}: {e}", self.out_dir.display())))?;
        Ok(&self.out_dir)
    }

    /// `explicit`, or `name` under the output directory.
    pub fn resolve(&self, explicit: &Option<PathBuf>, name: &str) -> CliResult<PathBuf> {
        match explicit {
            Some(p) => {
                if let Some(parent) = p.parent().filter(|p| !p.as_os_str().is_empty()) {
                    std::fs::create_dir_all(parent).map_err(|e| CliError::io(format!("{}: {e}", parent.display())))?;
                }
                Ok(p.clone())
            }
            None => Ok(self.ensure()?.join(name)),
        }
    }
}

pub fn describe_source(ds: &Dataset) -> String {
    match &ds.provenance {
        Provenance::Synthetic { seed, params } => format!("synthetic {} seed {seed}", params.decay),
        Provenance::File { path, .. } => path.display().to_string(),
        Provenance::InMemory => "memory".into(),
    }
}
