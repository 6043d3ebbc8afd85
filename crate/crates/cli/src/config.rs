//! `--config FILE` support. Every `key=value` line becomes `--key value`
//! inserted right after the subcommand name, so explicit flags (which come
//! later and override earlier occurrences) win over the file.

use std::fs;

use clap::CommandFactory;
use rlm_precond::trace::parse_key_values;

use crate::exit::{CliError, CliResult};
use crate::Cli;

pub fn expand(mut raw: Vec<String>) -> CliResult<Vec<String>> {
    if raw.get(1).map(String::as_str) == Some("--validate") {
        raw[1] = "validate".into();
    }

    let mut config_path = None;
    let mut args = Vec::with_capacity(raw.len());
    let mut it = raw.into_iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            let v = it.next().ok_or_else(|| CliError::usage("--config needs a file path"))?;
            config_path = Some(v);
        } else if let Some(v) = a.strip_prefix("--config=") {
            config_path = Some(v.to_string());
        } else {
            args.push(a);
        }
    }
    let Some(path) = config_path else {
        return Ok(args);
    };

    let cmd = Cli::command();
    let Some(pos) = args
        .iter()
        .skip(1)
        .position(|a| cmd.find_subcommand(a).is_some())
        .map(|p| p + 1)
    else {
        return Err(CliError::usage("--config needs a subcommand"));
    };
    let sub = cmd.find_subcommand(&args[pos]).expect("found above");

    let text = fs::read_to_string(&path).map_err(|e| CliError::io(format!("{path}: {e}")))?;
    let kv = parse_key_values(&text).map_err(|e| CliError::usage(format!("{path}: {e}")))?;
    let mut keys: Vec<&String> = kv.keys().collect();
    keys.sort();

    let mut injected = Vec::new();
    for key in keys {
        let value = &kv[key];
        let long = key.replace('_', "-");
        let arg = sub
            .get_arguments()
            .find(|a| a.get_long() == Some(long.as_str()))
            .ok_or_else(|| CliError::usage(format!("{path}: unknown key `{key}` for `{}`", sub.get_name())))?;
        if arg.get_action().takes_values() {
            injected.push(format!("--{long}"));
            injected.push(value.clone());
        } else {
            match value.as_str() {
                "true" | "1" | "yes" => injected.push(format!("--{long}")),
                "false" | "0" | "no" => {}
                other => {
                    return Err(CliError::usage(format!("{path}: `{key}` is a switch, got `{other}`")));
                }
            }
        }
    }
    args.splice(pos + 1..pos + 1, injected);
    Ok(args)
}
