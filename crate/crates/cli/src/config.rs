//! `--config` files: turned into flags placed before the command-line ones so
//! that explicit flags win.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::CommandFactory;
use serde_json::Value;

use crate::args::Cli;
use crate::failure::Failure;

/// Global options that consume the following token as their value.
const GLOBAL_VALUED: [&str; 2] = ["--config", "--threads"];

pub fn expand(argv: Vec<OsString>) -> Result<Vec<OsString>, Failure> {
    let Some((path, config_pos)) = find_config(&argv) else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Failure::io(anyhow::Error::new(e).context(format!("reading {}", path.display()))))?;
    let entries = parse(&text, &path)?;

    let sub_pos = find_subcommand(&argv);
    let from_file = entries.get("command").and_then(Value::as_str).map(str::to_owned);
    let command = match (sub_pos.map(|i| argv[i].to_string_lossy().into_owned()), from_file) {
        (Some(cli), Some(file)) if cli != file => {
            return Err(Failure::config(format!(
                "{} configures '{file}' but the command line asks for '{cli}'",
                path.display()
            )))
        }
        (Some(cli), _) => cli,
        (None, Some(file)) => file,
        (None, None) => return Ok(argv),
    };

    let flags = known_flags(&command)
        .ok_or_else(|| Failure::config(format!("unknown command '{command}' in {}", path.display())))?;
    let mut injected = Vec::new();
    for (key, value) in &entries {
        let key = key.replace('_', "-");
        if key == "command" {
            continue;
        }
        let takes_value = *flags
            .get(key.as_str())
            .ok_or_else(|| Failure::config(format!("{}: unknown key '{key}' for {command}", path.display())))?;
        if key == "config" {
            return Err(Failure::config(format!("{}: nested config files are not supported", path.display())));
        }
        match (takes_value, value) {
            (_, Value::Null) => {}
            (false, Value::Bool(true)) => injected.push(OsString::from(format!("--{key}"))),
            (false, Value::Bool(false)) => {}
            (false, other) => {
                return Err(Failure::config(format!(
                    "{}: '{key}' is a switch and needs true or false, got {other}",
                    path.display()
                )))
            }
            (true, v) => injected.push(OsString::from(format!("--{key}={}", scalar(&key, v, &path)?))),
        }
    }

    let mut out = Vec::with_capacity(argv.len() + injected.len() + 1);
    out.push(argv[0].clone());
    out.push(OsString::from(&command));
    out.extend(injected);
    for (i, arg) in argv.iter().enumerate().skip(1) {
        let is_config = i == config_pos || (i == config_pos + 1 && argv[config_pos] == "--config");
        if Some(i) == sub_pos || is_config {
            continue;
        }
        out.push(arg.clone());
    }
    Ok(out)
}

fn find_config(argv: &[OsString]) -> Option<(PathBuf, usize)> {
    for (i, arg) in argv.iter().enumerate().skip(1) {
        let s = arg.to_string_lossy();
        if s == "--" {
            return None;
        }
        if s == "--config" {
            return argv.get(i + 1).map(|p| (PathBuf::from(p), i));
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some((PathBuf::from(p), i));
        }
    }
    None
}

fn find_subcommand(argv: &[OsString]) -> Option<usize> {
    let mut i = 1;
    while i < argv.len() {
        let s = argv[i].to_string_lossy();
        if GLOBAL_VALUED.contains(&s.as_ref()) {
            i += 2;
            continue;
        }
        if !s.starts_with('-') && is_subcommand(&s) {
            return Some(i);
        }
        i += 1;
    }
    None
}

fn is_subcommand(name: &str) -> bool {
    Cli::command().get_subcommands().any(|c| c.get_name() == name)
}

/// Long flag names of `command` (plus the globals) and whether each takes a value.
fn known_flags(command: &str) -> Option<BTreeMap<String, bool>> {
    let mut root = Cli::command();
    root.build();
    let sub = root.find_subcommand(command)?;
    let mut flags = BTreeMap::new();
    for arg in sub.get_arguments().chain(root.get_arguments()) {
        if let Some(long) = arg.get_long() {
            flags.insert(long.to_string(), arg.get_action().takes_values());
        }
    }
    Some(flags)
}

fn scalar(key: &str, value: &Value, path: &Path) -> Result<String, Failure> {
    match value {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        Value::Bool(b) => Ok(b.to_string()),
        Value::Array(items) => items
            .iter()
            .map(|v| scalar(key, v, path))
            .collect::<Result<Vec<_>, _>>()
            .map(|v| v.join(",")),
        Value::Null | Value::Object(_) => Err(Failure::config(format!(
            "{}: '{key}' must be a scalar or a list",
            path.display()
        ))),
    }
}

/// A JSON object (an artifact's `config` member when present) or `key = value` lines.
fn parse(text: &str, path: &Path) -> Result<BTreeMap<String, Value>, Failure> {
    if text.trim_start().starts_with('{') {
        let value: Value = serde_json::from_str(text)
            .map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
        let object = match value.get("config") {
            Some(inner) if inner.is_object() => inner.clone(),
            _ => value,
        };
        return match object {
            Value::Object(map) => Ok(map.into_iter().collect()),
            _ => Err(Failure::config(format!("{}: expected a JSON object", path.display()))),
        };
    }
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Failure::config(format!("{}:{}: expected key = value", path.display(), n + 1))
        })?;
        let value = value.trim().trim_matches('"');
        let value = match value {
            "true" => Value::Bool(true),
            "false" => Value::Bool(false),
            v => Value::String(v.to_string()),
        };
        out.insert(key.trim().to_string(), value);
    }
    Ok(out)
}
