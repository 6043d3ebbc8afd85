//! Convergence traces and their on-disk form: a CSV of
//! `epoch,objective,suboptimality,wall_seconds` rows plus a `key=value` sidecar.

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "epoch,objective,suboptimality,wall_seconds";
pub const LONG_CSV_HEADER: &str = "run_id,algorithm,formulation,epoch,objective,suboptimality";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    /// Effective passes over the data.
    pub epoch: f64,
    pub objective: f64,
    /// Objective minus the reference optimum, when one is known.
    pub suboptimality: Option<f64>,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TraceMeta {
    pub algorithm: String,
    pub formulation: String,
    pub seed: u64,
    pub step_rule: String,
    pub step_size: Option<f64>,
    pub lambda: Option<f64>,
    pub beta: Option<f64>,
    pub m: Option<usize>,
    pub data_digest: Option<u64>,
    /// Largest `|⟨v, x̃_i⟩|` seen along the trajectory.
    pub max_abs_margin: Option<f64>,
    pub reference_objective: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub rows: Vec<TraceRow>,
    pub meta: TraceMeta,
}

fn opt_str<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map(|x| x.to_string()).unwrap_or_default()
}

impl Trace {
    pub fn new(meta: TraceMeta) -> Self {
        Self { rows: Vec::new(), meta }
    }

    pub fn push(&mut self, row: TraceRow) {
        self.rows.push(row);
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    /// Fill in suboptimality against `f_star` for every row.
    pub fn set_reference(&mut self, f_star: f64) {
        self.meta.reference_objective = Some(f_star);
        for r in &mut self.rows {
            r.suboptimality = Some(r.objective - f_star);
        }
    }

    /// First recorded epoch whose suboptimality is at most `tol`.
    pub fn epochs_to(&self, tol: f64) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.suboptimality.is_some_and(|s| s <= tol))
            .map(|r| r.epoch)
    }

    /// Epochs strictly increasing, objectives finite.
    pub fn validate(&self) -> Result<()> {
        for (i, r) in self.rows.iter().enumerate() {
            if !r.objective.is_finite() {
                return Err(Error::Format(format!("row {i}: non-finite objective")));
            }
            if !r.epoch.is_finite() || r.epoch < 0.0 {
                return Err(Error::Format(format!("row {i}: bad epoch {}", r.epoch)));
            }
            if i > 0 && r.epoch <= self.rows[i - 1].epoch {
                return Err(Error::Format(format!(
                    "row {i}: epoch {} does not increase",
                    r.epoch
                )));
            }
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            s.push_str(&format!(
                "{:?},{:?},{},{:?}\n",
                r.epoch,
                r.objective,
                r.suboptimality.map(|v| format!("{v:?}")).unwrap_or_default(),
                r.wall_seconds
            ));
        }
        s
    }

    pub fn meta_text(&self) -> String {
        let m = &self.meta;
        format!(
            "algorithm={}\nformulation={}\nseed={}\nstep_rule={}\nstep_size={}\nlambda={}\nbeta={}\nm={}\ndata_digest={}\nmax_abs_margin={}\nreference_objective={}\n",
            m.algorithm,
            m.formulation,
            m.seed,
            m.step_rule,
            opt_str(&m.step_size),
            opt_str(&m.lambda),
            opt_str(&m.beta),
            opt_str(&m.m),
            m.data_digest.map(|d| format!("{d:016x}")).unwrap_or_default(),
            opt_str(&m.max_abs_margin),
            opt_str(&m.reference_objective),
        )
    }

    /// Write `path` (CSV) and `path.meta`.
    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv())?;
        fs::write(meta_path(path), self.meta_text())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let rows = read_csv_rows(BufReader::new(fs::File::open(path)?))?;
        let meta = match fs::read_to_string(meta_path(path)) {
            Ok(text) => parse_meta(&text)?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => TraceMeta::default(),
            Err(e) => return Err(e.into()),
        };
        Ok(Self { rows, meta })
    }
}

pub fn meta_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta");
    s.into()
}

/// Parse `key=value` lines; blank lines and `#` comments are skipped.
pub fn parse_key_values(text: &str) -> Result<HashMap<String, String>> {
    let mut out = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: i + 1,
            msg: format!("expected key=value, got `{line}`"),
        })?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

fn parse_meta(text: &str) -> Result<TraceMeta> {
    let kv = parse_key_values(text)?;
    let s = |k: &str| kv.get(k).cloned().unwrap_or_default();
    fn opt<T: std::str::FromStr>(kv: &HashMap<String, String>, k: &str) -> Result<Option<T>> {
        match kv.get(k) {
            None => Ok(None),
            Some(v) if v.is_empty() => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Format(format!("bad `{k}` in trace metadata"))),
        }
    }
    let data_digest = match kv.get("data_digest") {
        Some(v) if !v.is_empty() => Some(
            u64::from_str_radix(v, 16).map_err(|_| Error::Format("bad `data_digest`".into()))?,
        ),
        _ => None,
    };
    Ok(TraceMeta {
        algorithm: s("algorithm"),
        formulation: s("formulation"),
        seed: opt(&kv, "seed")?.unwrap_or(0),
        step_rule: s("step_rule"),
        step_size: opt(&kv, "step_size")?,
        lambda: opt(&kv, "lambda")?,
        beta: opt(&kv, "beta")?,
        m: opt(&kv, "m")?,
        data_digest,
        max_abs_margin: opt(&kv, "max_abs_margin")?,
        reference_objective: opt(&kv, "reference_objective")?,
    })
}

fn parse_f64(field: &str, line: usize, what: &str) -> Result<f64> {
    field.trim().parse().map_err(|_| Error::Parse {
        line,
        msg: format!("bad {what} `{field}`"),
    })
}

/// Read trace rows from CSV with the standard header.
pub fn read_csv_rows<R: BufRead>(reader: R) -> Result<Vec<TraceRow>> {
    let mut rows = Vec::new();
    let mut lines = reader.lines().enumerate();
    match lines.next() {
        Some((_, Ok(h))) if h.trim() == CSV_HEADER => {}
        Some((_, Ok(h))) => return Err(Error::Format(format!("unexpected trace header `{h}`"))),
        Some((_, Err(e))) => return Err(e.into()),
        None => return Err(Error::Format("empty trace file".into())),
    }
    for (i, line) in lines {
        let line = line?;
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("expected 4 fields, got {}", f.len()),
            });
        }
        let sub = if f[2].trim().is_empty() {
            None
        } else {
            Some(parse_f64(f[2], lineno, "suboptimality")?)
        };
        rows.push(TraceRow {
            epoch: parse_f64(f[0], lineno, "epoch")?,
            objective: parse_f64(f[1], lineno, "objective")?,
            suboptimality: sub,
            wall_seconds: parse_f64(f[3], lineno, "wall time")?,
        });
    }
    Ok(rows)
}

/// One run in a comparison.
#[derive(Debug, Clone)]
pub struct LabeledTrace {
    pub run_id: usize,
    pub trace: Trace,
}

/// Write the long-format comparison CSV, runs in the given order.
pub fn write_long_csv<W: Write>(mut w: W, runs: &[LabeledTrace]) -> Result<()> {
    writeln!(w, "{LONG_CSV_HEADER}")?;
    for run in runs {
        for r in &run.trace.rows {
            writeln!(
                w,
                "{},{},{},{:?},{:?},{}",
                run.run_id,
                run.trace.meta.algorithm,
                run.trace.meta.formulation,
                r.epoch,
                r.objective,
                r.suboptimality.map(|v| format!("{v:?}")).unwrap_or_default()
            )?;
        }
    }
    Ok(())
}
