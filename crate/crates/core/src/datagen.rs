//! Datasets: synthetic generation with a prescribed covariance spectrum, text
//! ingestion (sparse `label idx:val` lines and dense CSV), and a binary format.
//!
//! Binary layout (all little-endian):
//!
//! | bytes | content |
//! |-------|---------|
//! | 4     | magic `PRLM` |
//! | 4     | version `u32` (= 1) |
//! | 8     | `d` as `u64` |
//! | 8     | `n` as `u64` |
//! | 1     | task tag: 0 regression, 1 binary, 2 count, 3 unlabeled |
//! | 8·d·n | `X`, column-major `f64` |
//! | 8·n   | `y` as `f64` (zeros when unlabeled) |

use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::DMatrix;
use rand_distr::{Distribution, Poisson, StandardNormal};
use sha2::{Digest, Sha256};

use crate::error::{input, Error, Result};
use crate::linalg;
use crate::rng;

pub const MAGIC: &[u8; 4] = b"PRLM";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 8 + 8 + 1;
const TAG_UNLABELED: u8 = 3;

/// Densifying sparse input below this density logs a warning.
const DENSITY_WARN: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Task {
    Regression,
    /// Labels in {-1, +1}.
    Binary,
    /// Nonnegative integer counts.
    Count,
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Regression => "regression",
            Task::Binary => "binary",
            Task::Count => "count",
        }
    }

    fn tag(&self) -> u8 {
        match self {
            Task::Regression => 0,
            Task::Binary => 1,
            Task::Count => 2,
        }
    }

    fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(Task::Regression),
            1 => Ok(Task::Binary),
            2 => Ok(Task::Count),
            TAG_UNLABELED => Err(Error::Format("file holds a matrix without targets".into())),
            t => Err(Error::Format(format!("unknown task tag {t}"))),
        }
    }

    pub fn validate_targets(&self, y: &[f64]) -> Result<()> {
        let ok = |v: f64| match self {
            Task::Regression => v.is_finite(),
            Task::Binary => v == 1.0 || v == -1.0,
            Task::Count => v.is_finite() && v >= 0.0 && v.fract() == 0.0,
        };
        match y.iter().position(|&v| !ok(v)) {
            None => Ok(()),
            Some(i) => input(format!(
                "target {} of sample {i} is invalid for a {} task",
                y[i],
                self.name()
            )),
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "regression" => Ok(Task::Regression),
            "binary" | "classification" => Ok(Task::Binary),
            "count" => Ok(Task::Count),
            other => input(format!("unknown task `{other}`")),
        }
    }
}

/// Decay of the prescribed covariance eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Decay {
    /// `σ_i² = i^{-2τ}`
    Poly(f64),
    /// `σ_i² = e^{-τ i}`
    Exp(f64),
}

impl Decay {
    pub fn eigenvalue(&self, i: usize) -> f64 {
        let i = i as f64;
        match *self {
            Decay::Poly(tau) => i.powf(-2.0 * tau),
            Decay::Exp(tau) => (-tau * i).exp(),
        }
    }

    /// The first `k` eigenvalues (1-based index), descending.
    pub fn spectrum(&self, k: usize) -> Vec<f64> {
        (1..=k).map(|i| self.eigenvalue(i)).collect()
    }
}

impl fmt::Display for Decay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Decay::Poly(t) => write!(f, "poly:{t}"),
            Decay::Exp(t) => write!(f, "exp:{t}"),
        }
    }
}

impl FromStr for Decay {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, tau) = s
            .split_once(':')
            .ok_or_else(|| Error::Input(format!("decay `{s}` must look like poly:0.5 or exp:0.5")))?;
        let tau: f64 = tau
            .parse()
            .map_err(|_| Error::Input(format!("bad decay rate in `{s}`")))?;
        match kind {
            "poly" => Ok(Decay::Poly(tau)),
            "exp" => Ok(Decay::Exp(tau)),
            _ => input(format!("unknown decay `{kind}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthParams {
    pub n: usize,
    pub d: usize,
    pub decay: Decay,
    pub task: Task,
    /// Permit `d > n` by swapping the roles of the singular factors; the
    /// spectrum then has only `n` nonzero eigenvalues.
    pub allow_wide: bool,
}

impl SynthParams {
    pub fn new(n: usize, d: usize, decay: Decay, task: Task) -> Self {
        Self {
            n,
            d,
            decay,
            task,
            allow_wide: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    Synthetic { params: SynthParams, seed: u64 },
    File { path: PathBuf, digest: u64 },
    InMemory,
}

/// A dense dataset: `x` is `d × n` with one sample per column.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: DMatrix<f64>,
    pub y: Vec<f64>,
    pub task: Task,
    pub provenance: Provenance,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: Vec<f64>, task: Task) -> Result<Self> {
        let ds = Self {
            x,
            y,
            task,
            provenance: Provenance::InMemory,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn n(&self) -> usize {
        self.x.ncols()
    }

    pub fn d(&self) -> usize {
        self.x.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n() == 0 || self.d() == 0 {
            return Err(Error::EmptyDataset);
        }
        if self.y.len() != self.n() {
            return input(format!(
                "{} targets for {} samples",
                self.y.len(),
                self.n()
            ));
        }
        linalg::ensure_finite(&self.x, "feature matrix")?;
        self.task.validate_targets(&self.y)
    }

    pub fn digest(&self) -> u64 {
        content_digest(&self.x, &self.y, self.task.tag())
    }

    /// `key=value` description of where the data came from.
    pub fn provenance_lines(&self) -> String {
        let mut s = format!(
            "n={}\nd={}\ntask={}\ndigest={:016x}\n",
            self.n(),
            self.d(),
            self.task,
            self.digest()
        );
        match &self.provenance {
            Provenance::Synthetic { params, seed } => {
                s.push_str(&format!(
                    "source=synthetic\ndecay={}\nseed={seed}\nallow_wide={}\n",
                    params.decay, params.allow_wide
                ));
            }
            Provenance::File { path, digest } => {
                s.push_str(&format!(
                    "source=file\npath={}\nfile_digest={digest:016x}\n",
                    path.display()
                ));
            }
            Provenance::InMemory => s.push_str("source=memory\n"),
        }
        s
    }
}

/// Truth used to generate a synthetic dataset.
#[derive(Debug, Clone)]
pub struct SynthFactors {
    /// `d × k` left singular factor.
    pub u: DMatrix<f64>,
    /// `n × k` right singular factor.
    pub v: DMatrix<f64>,
    /// Prescribed covariance eigenvalues, length `k`.
    pub sigma_sq: Vec<f64>,
    /// Generating weight vector, `w_i ~ N(0, 100)`.
    pub w: Vec<f64>,
    /// Noise-free linear predictor `wᵀ x_i`.
    pub signal: Vec<f64>,
}

pub fn synth(params: &SynthParams, seed: u64) -> Result<Dataset> {
    synth_with_factors(params, seed).map(|(ds, _)| ds)
}

/// Generate `X = √n U Σ Vᵀ` where `U`, `V` are the singular factors of a standard
/// Gaussian `d × n` matrix and `Σ² ` follows `params.decay`, so that
/// `(1/n) X Xᵀ = U Σ² Uᵀ` exactly. Targets follow `y = wᵀx + ε` with
/// `w_i ~ N(0, 100)`, `ε ~ N(0, 0.01)` (regression), `sign(wᵀx + ε)` (binary), or
/// `Poisson(exp(z))` with `z` the standardized linear predictor (count).
pub fn synth_with_factors(params: &SynthParams, seed: u64) -> Result<(Dataset, SynthFactors)> {
    let SynthParams { n, d, decay, task, allow_wide } = *params;
    if n == 0 || d == 0 {
        return Err(Error::EmptyDataset);
    }
    if n < d && !allow_wide {
        return input(format!(
            "synthetic generation needs n >= d (got n = {n}, d = {d}); enable allow_wide to swap factor roles"
        ));
    }
    match decay {
        Decay::Poly(tau) if !(tau >= 0.5 && tau.is_finite()) => {
            return input(format!("polynomial decay needs tau >= 1/2, got {tau}"));
        }
        Decay::Exp(tau) if !(tau > 0.0 && tau.is_finite()) => {
            return input(format!("exponential decay needs tau > 0, got {tau}"));
        }
        _ => {}
    }

    let (u, v) = gaussian_singular_factors(n, d, seed);
    let k = n.min(d);
    let sigma_sq = decay.spectrum(k);

    // X = √n (U Σ) Vᵀ
    let mut left = u.clone();
    let sqrt_n = (n as f64).sqrt();
    for (j, &s2) in sigma_sq.iter().enumerate() {
        left.column_mut(j).scale_mut(sqrt_n * s2.sqrt());
    }
    let x = left * v.transpose();

    let mut wr = rng::stream(seed, rng::STREAM_WEIGHTS);
    let w: Vec<f64> = (0..d)
        .map(|_| 10.0 * Distribution::<f64>::sample(&StandardNormal, &mut wr))
        .collect();
    let signal: Vec<f64> = (0..n)
        .map(|i| linalg::dot(linalg::column(&x, i), &w))
        .collect();

    let mut er = rng::stream(seed, rng::STREAM_NOISE);
    let y: Vec<f64> = match task {
        Task::Regression => signal
            .iter()
            .map(|&s| s + 0.1 * Distribution::<f64>::sample(&StandardNormal, &mut er))
            .collect(),
        Task::Binary => signal
            .iter()
            .map(|&s| {
                let noisy: f64 = s + 0.1 * Distribution::<f64>::sample(&StandardNormal, &mut er);
                if noisy >= 0.0 { 1.0 } else { -1.0 }
            })
            .collect(),
        Task::Count => {
            let mean = signal.iter().sum::<f64>() / n as f64;
            let var = signal.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n as f64;
            let sd = var.sqrt().max(f64::MIN_POSITIVE);
            signal
                .iter()
                .map(|&s| {
                    let rate = ((s - mean) / sd).exp();
                    Poisson::new(rate)
                        .map(|p| p.sample(&mut er))
                        .unwrap_or(0.0)
                })
                .collect()
        }
    };

    let ds = Dataset {
        x,
        y,
        task,
        provenance: Provenance::Synthetic {
            params: *params,
            seed,
        },
    };
    ds.validate()?;
    Ok((
        ds,
        SynthFactors {
            u,
            v,
            sigma_sq,
            w,
            signal,
        },
    ))
}

/// Left (`d × k`) and right (`n × k`) singular factors of a seeded standard
/// Gaussian `d × n` matrix, `k = min(n, d)`.
fn gaussian_singular_factors(n: usize, d: usize, seed: u64) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut r = rng::stream(seed, rng::STREAM_MATRIX);
    // column-major fill of M (d × n)
    let m = DMatrix::<f64>::from_fn(d, n, |_, _| StandardNormal.sample(&mut r));

    let tall_is_transpose = n >= d;
    let tall = if tall_is_transpose { m.transpose() } else { m.clone() };
    if let Some((q, rf)) = linalg::cholesky_qr2(&tall) {
        let svd = rf.svd(true, true);
        let p = svd.u.expect("requested U");
        let w = svd.v_t.expect("requested V").transpose();
        let (p, w, _) = sort_by_singular_values(p, w, svd.singular_values.as_slice());
        let qp = q * p;
        return if tall_is_transpose { (w, qp) } else { (qp, w) };
    }
    // ill-conditioned Gaussian draw (n ≈ d): plain SVD
    let svd = m.svd(true, true);
    let u = svd.u.expect("requested U");
    let v = svd.v_t.expect("requested V").transpose();
    let (u, v, _) = sort_by_singular_values(u, v, svd.singular_values.as_slice());
    (u, v)
}

fn sort_by_singular_values(
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    s: &[f64],
) -> (DMatrix<f64>, DMatrix<f64>, Vec<f64>) {
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&i, &j| s[j].total_cmp(&s[i]));
    let a = a.select_columns(order.iter());
    let b = b.select_columns(order.iter());
    (a, b, order.iter().map(|&i| s[i]).collect())
}

/// First 8 bytes (little-endian) of SHA-256 over the shape, task tag, `X` and `y`.
pub fn content_digest(x: &DMatrix<f64>, y: &[f64], tag: u8) -> u64 {
    let mut h = Sha256::new();
    h.update((x.nrows() as u64).to_le_bytes());
    h.update((x.ncols() as u64).to_le_bytes());
    h.update([tag]);
    for v in x.iter() {
        h.update(v.to_le_bytes());
    }
    for v in y {
        h.update(v.to_le_bytes());
    }
    let out = h.finalize();
    u64::from_le_bytes(out[..8].try_into().expect("8 bytes"))
}

/// Options for text ingestion.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadOptions {
    pub task: Task,
    /// Feature dimension; inferred from the largest index when absent.
    pub dim: Option<usize>,
    /// Map labels {0, 1} to {-1, +1} (binary tasks).
    pub map_binary_labels: bool,
    /// Affinely map targets from `[lo, hi]` to `[0, 1]`.
    pub target_range: Option<(f64, f64)>,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            task: Task::Regression,
            dim: None,
            map_binary_labels: false,
            target_range: None,
        }
    }
}

impl LoadOptions {
    pub fn for_task(task: Task) -> Self {
        Self {
            task,
            ..Self::default()
        }
    }

    fn transform_targets(&self, y: &mut [f64]) -> Result<()> {
        if let Some((lo, hi)) = self.target_range {
            if !(hi > lo) {
                return input(format!("target range [{lo}, {hi}] is empty"));
            }
            y.iter_mut().for_each(|v| *v = (*v - lo) / (hi - lo));
        }
        if self.map_binary_labels {
            for v in y.iter_mut() {
                if *v == 0.0 {
                    *v = -1.0;
                }
            }
        }
        Ok(())
    }
}

fn finish_load(x: DMatrix<f64>, mut y: Vec<f64>, opts: &LoadOptions, path: Option<&Path>) -> Result<Dataset> {
    opts.transform_targets(&mut y)?;
    let mut ds = Dataset {
        x,
        y,
        task: opts.task,
        provenance: Provenance::InMemory,
    };
    ds.validate()?;
    if let Some(p) = path {
        ds.provenance = Provenance::File {
            path: p.to_path_buf(),
            digest: ds.digest(),
        };
    }
    Ok(ds)
}

/// Parse sparse `label idx:val ...` lines with 1-based feature indices.
pub fn parse_sparse_text<R: BufRead>(reader: R, opts: &LoadOptions) -> Result<Dataset> {
    let mut labels = Vec::new();
    let mut entries: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut max_index = 0usize;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let label_tok = tokens.next().expect("non-empty line");
        let label: f64 = label_tok.parse().map_err(|_| Error::Parse {
            line: lineno,
            msg: format!("bad label `{label_tok}`"),
        })?;
        let mut row = Vec::new();
        for tok in tokens {
            let (idx, val) = tok.split_once(':').ok_or_else(|| Error::Parse {
                line: lineno,
                msg: format!("expected idx:value, got `{tok}`"),
            })?;
            let idx: usize = idx.parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("bad feature index `{idx}`"),
            })?;
            if idx == 0 {
                return Err(Error::Parse {
                    line: lineno,
                    msg: "feature indices are 1-based".into(),
                });
            }
            let val: f64 = val.parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("bad feature value `{val}`"),
            })?;
            if let Some(dim) = opts.dim {
                if idx > dim {
                    return input(format!(
                        "line {lineno}: feature index {idx} exceeds dimension {dim}"
                    ));
                }
            }
            max_index = max_index.max(idx);
            row.push((idx - 1, val));
        }
        labels.push(label);
        entries.push(row);
    }
    if labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let d = opts.dim.unwrap_or(max_index);
    if d == 0 {
        return Err(Error::EmptyDataset);
    }
    let n = labels.len();
    let mut x = DMatrix::<f64>::zeros(d, n);
    let mut nnz = 0usize;
    for (i, row) in entries.iter().enumerate() {
        for &(j, v) in row {
            x[(j, i)] = v;
            nnz += 1;
        }
    }
    let density = nnz as f64 / (n as f64 * d as f64);
    if density < DENSITY_WARN {
        log::warn!(
            "densifying sparse input: {n} x {d} with density {:.3}% ({} MB dense)",
            100.0 * density,
            (8 * n * d) >> 20
        );
    }
    finish_load(x, labels, opts, None)
}

pub fn load_sparse_text(path: &Path, opts: &LoadOptions) -> Result<Dataset> {
    let f = fs::File::open(path)?;
    let mut ds = parse_sparse_text(BufReader::new(f), opts)?;
    ds.provenance = Provenance::File {
        path: path.to_path_buf(),
        digest: ds.digest(),
    };
    Ok(ds)
}

/// Parse dense CSV: one sample per row, last column is the target, optional header.
pub fn parse_dense_csv<R: BufRead>(reader: R, opts: &LoadOptions) -> Result<Dataset> {
    let mut values: Vec<f64> = Vec::new();
    let mut labels = Vec::new();
    let mut width: Option<usize> = None;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let content = line.trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split(',').map(str::trim).collect();
        let parsed: std::result::Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
        let parsed = match parsed {
            Ok(p) => p,
            Err(_) if width.is_none() && labels.is_empty() && lineno == 1 => continue, // header
            Err(_) => {
                return Err(Error::Parse {
                    line: lineno,
                    msg: "non-numeric field".into(),
                })
            }
        };
        if parsed.len() < 2 {
            return Err(Error::Parse {
                line: lineno,
                msg: "need at least one feature and a target".into(),
            });
        }
        match width {
            None => width = Some(parsed.len()),
            Some(w) if w != parsed.len() => {
                return input(format!(
                    "line {lineno}: {} columns, expected {w}",
                    parsed.len()
                ))
            }
            _ => {}
        }
        let (feat, target) = parsed.split_at(parsed.len() - 1);
        values.extend_from_slice(feat);
        labels.push(target[0]);
    }
    let Some(width) = width else {
        return Err(Error::EmptyDataset);
    };
    let d = width - 1;
    if let Some(dim) = opts.dim {
        if dim != d {
            return input(format!("CSV has {d} features, expected {dim}"));
        }
    }
    let x = DMatrix::from_column_slice(d, labels.len(), &values);
    finish_load(x, labels, opts, None)
}

pub fn load_dense_csv(path: &Path, opts: &LoadOptions) -> Result<Dataset> {
    let f = fs::File::open(path)?;
    let mut ds = parse_dense_csv(BufReader::new(f), opts)?;
    ds.provenance = Provenance::File {
        path: path.to_path_buf(),
        digest: ds.digest(),
    };
    Ok(ds)
}

/// Load by extension: `.bin`/`.prlm` binary, `.csv` dense CSV, anything else sparse text.
pub fn load_any(path: &Path, opts: &LoadOptions) -> Result<Dataset> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("bin") | Some("prlm") => load_binary(path),
        Some("csv") => load_dense_csv(path, opts),
        _ => load_sparse_text(path, opts),
    }
}

fn write_binary(path: &Path, x: &DMatrix<f64>, y: &[f64], tag: u8) -> Result<()> {
    let f = fs::File::create(path)?;
    let mut w = BufWriter::new(f);
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(x.nrows() as u64).to_le_bytes())?;
    w.write_all(&(x.ncols() as u64).to_le_bytes())?;
    w.write_all(&[tag])?;
    for v in x.iter() {
        w.write_all(&v.to_le_bytes())?;
    }
    for v in y {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_binary(ds: &Dataset, path: &Path) -> Result<()> {
    write_binary(path, &ds.x, &ds.y, ds.task.tag())
}

/// Save a bare matrix (targets written as zeros, tagged unlabeled).
pub fn save_matrix_binary(x: &DMatrix<f64>, path: &Path) -> Result<()> {
    write_binary(path, x, &vec![0.0; x.ncols()], TAG_UNLABELED)
}

fn read_binary(path: &Path) -> Result<(DMatrix<f64>, Vec<f64>, u8)> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_binary(&bytes)
}

fn decode_binary(bytes: &[u8]) -> Result<(DMatrix<f64>, Vec<f64>, u8)> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format("truncated header".into()));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Format("bad magic bytes".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let d = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let n = u64::from_le_bytes(bytes[16..24].try_into().expect("8 bytes")) as usize;
    let tag = bytes[24];
    let expected = d
        .checked_mul(n)
        .and_then(|dn| dn.checked_add(n))
        .and_then(|c| c.checked_mul(8))
        .and_then(|c| c.checked_add(HEADER_LEN))
        .ok_or_else(|| Error::Format("dimensions overflow".into()))?;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "expected {expected} bytes for {d}x{n}, found {}",
            bytes.len()
        )));
    }
    let floats: Vec<f64> = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let (xs, ys) = floats.split_at(d * n);
    Ok((DMatrix::from_column_slice(d, n, xs), ys.to_vec(), tag))
}

pub fn load_binary(path: &Path) -> Result<Dataset> {
    let (x, y, tag) = read_binary(path)?;
    let task = Task::from_tag(tag)?;
    let mut ds = Dataset {
        x,
        y,
        task,
        provenance: Provenance::InMemory,
    };
    ds.validate()?;
    ds.provenance = Provenance::File {
        path: path.to_path_buf(),
        digest: ds.digest(),
    };
    Ok(ds)
}

/// Load the matrix part of any binary file, labeled or not.
pub fn load_matrix_binary(path: &Path) -> Result<DMatrix<f64>> {
    read_binary(path).map(|(x, _, _)| x)
}
