use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use clap::Args;
use rlm_precond::trace::{read_csv_rows, CSV_HEADER, LONG_CSV_HEADER};
use rlm_precond::{ConditionReport, Trace};

use crate::exit::{self, CliResult};

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// CSV files written by `solve`, `compare` or `diagnose`.
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
}

pub fn run(a: ValidateArgs) -> CliResult<u8> {
    let mut code = exit::OK;
    for path in &a.files {
        match check(path) {
            Ok(summary) => println!("{}: ok ({summary})", path.display()),
            Err(msg) => {
                println!("{}: {msg}", path.display());
                code = exit::IO;
            }
        }
    }
    Ok(code)
}

fn check(path: &Path) -> Result<String, String> {
    let file = fs::File::open(path).map_err(|e| e.to_string())?;
    let mut reader = BufReader::new(file);
    let mut header = String::new();
    reader.read_line(&mut header).map_err(|e| e.to_string())?;
    let header = header.trim_end();
    if header == CSV_HEADER {
        let text = format!("{header}\n{}", read_rest(reader)?);
        let rows = read_csv_rows(text.as_bytes()).map_err(|e| e.to_string())?;
        let trace = Trace { rows, meta: Default::default() };
        trace.validate().map_err(|e| e.to_string())?;
        Ok(format!("trace, {} rows", trace.rows.len()))
    } else if header == LONG_CSV_HEADER {
        check_long(reader)
    } else if header == ConditionReport::CSV_HEADER {
        check_report(reader)
    } else {
        Err(format!("unrecognized header `{header}`"))
    }
}

fn read_rest(mut r: impl BufRead) -> Result<String, String> {
    let mut s = String::new();
    r.read_to_string(&mut s).map_err(|e| e.to_string())?;
    Ok(s)
}

fn num(field: &str, line: usize, what: &str) -> Result<f64, String> {
    field
        .parse::<f64>()
        .map_err(|_| format!("line {line}: bad {what} `{field}`"))
}

fn check_long(reader: impl BufRead) -> Result<String, String> {
    // run_id -> (algorithm, formulation, last epoch)
    let mut runs: HashMap<String, (String, String, f64)> = HashMap::new();
    let mut rows = 0;
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| e.to_string())?;
        let lineno = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(format!("line {lineno}: expected 6 fields, got {}", f.len()));
        }
        f[0].parse::<u64>().map_err(|_| format!("line {lineno}: bad run_id `{}`", f[0]))?;
        let epoch = num(f[3], lineno, "epoch")?;
        let objective = num(f[4], lineno, "objective")?;
        if !objective.is_finite() {
            return Err(format!("line {lineno}: non-finite objective"));
        }
        if !f[5].is_empty() {
            num(f[5], lineno, "suboptimality")?;
        }
        match runs.get_mut(f[0]) {
            Some((alg, form, last)) => {
                if alg != f[1] || form != f[2] {
                    return Err(format!("line {lineno}: run {} changes algorithm or formulation", f[0]));
                }
                if epoch <= *last {
                    return Err(format!("line {lineno}: epoch {epoch} does not increase"));
                }
                *last = epoch;
            }
            None => {
                runs.insert(f[0].to_string(), (f[1].to_string(), f[2].to_string(), epoch));
            }
        }
        rows += 1;
    }
    Ok(format!("long-format, {} runs, {rows} rows", runs.len()))
}

fn check_report(reader: impl BufRead) -> Result<String, String> {
    let fields = ConditionReport::CSV_HEADER.split(',').count();
    let mut rows = 0;
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| e.to_string())?;
        let lineno = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != fields {
            return Err(format!("line {lineno}: expected {fields} fields, got {}", f.len()));
        }
        for (j, v) in f.iter().enumerate().skip(1) {
            let ok = match j {
                7 | 13 | 14 | 15 => v.parse::<bool>().is_ok(),
                _ => v.parse::<f64>().is_ok(),
            };
            if !ok {
                return Err(format!("line {lineno}: bad value `{v}` in column {}", j + 1));
            }
        }
        rows += 1;
    }
    Ok(format!("condition report, {rows} rows"))
}
