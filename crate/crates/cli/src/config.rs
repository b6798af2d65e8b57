//! `--config file.json`: a JSON object whose keys mirror the command line
//! flags. Flags given on the command line win over the file.

use serde_json::{Map, Value};

use crate::output::{CliResult, Failure};

pub const SUBCOMMANDS: &[&str] = &[
    "exact",
    "exact-general",
    "lattice",
    "trees",
    "verify",
    "phase",
    "figures",
];

/// Path given with `--config`, if any.
fn config_path(args: &[String]) -> Option<String> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some(p.to_string());
        }
    }
    None
}

fn flag_given(args: &[String], flag: &str) -> bool {
    let long = format!("--{flag}");
    let with_value = format!("--{flag}=");
    args.iter().any(|a| *a == long || a.starts_with(&with_value))
}

fn value_arg(flag: &str, v: &Value) -> CliResult<Option<String>> {
    Ok(match v {
        Value::Null => None,
        Value::Bool(_) => unreachable!("handled by the caller"),
        Value::Number(n) => Some(n.to_string()),
        Value::String(s) => Some(s.clone()),
        Value::Object(_) => Some(v.to_string()),
        Value::Array(_) => {
            return Err(Failure::validation(
                "config",
                format!("key {flag:?} holds an array"),
            ))
        }
    })
}

/// Command line arguments with the config file's entries merged in.
pub fn expand(args: Vec<String>) -> CliResult<Vec<String>> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Failure::validation("config", format!("cannot read {path}: {e}")))?;
    let map: Map<String, Value> = match serde_json::from_str(&text) {
        Ok(Value::Object(map)) => map,
        Ok(_) => return Err(Failure::validation("config", "expected a JSON object")),
        Err(e) => return Err(Failure::validation("config", e)),
    };
    merge(args, map)
}

fn merge(args: Vec<String>, map: Map<String, Value>) -> CliResult<Vec<String>> {
    let mut out = args;
    let has_subcommand = out.iter().skip(1).any(|a| SUBCOMMANDS.contains(&a.as_str()));
    if let Some(cmd) = map.get("command") {
        if !has_subcommand {
            let Value::String(cmd) = cmd else {
                return Err(Failure::validation("config", "\"command\" must be a string"));
            };
            out.insert(1.min(out.len()), cmd.clone());
        }
    }
    for (key, value) in map {
        if key == "command" || key == "config" {
            continue;
        }
        let flag = key.replace('_', "-");
        if flag_given(&out, &flag) {
            continue;
        }
        match value {
            Value::Bool(true) => out.push(format!("--{flag}")),
            Value::Bool(false) => {}
            v => {
                if let Some(s) = value_arg(&flag, &v)? {
                    out.push(format!("--{flag}"));
                    out.push(s);
                }
            }
        }
    }
    Ok(out)
}
