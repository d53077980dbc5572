//! `key=value` config files, expanded into flags placed ahead of the user's
//! own flags so that the command line wins.

use std::ffi::OsString;
use std::path::Path;

use super::{CliError, CliResult};
use crate::error::Error;

#[derive(Debug, PartialEq, Eq)]
pub(crate) struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

pub(crate) fn parse(text: &str) -> CliResult<Vec<Entry>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Usage(format!("config line {}: expected key=value, got {line:?}", i + 1)));
        };
        let key = key.trim();
        if key.is_empty() {
            return Err(CliError::Usage(format!("config line {}: empty key", i + 1)));
        }
        out.push(Entry { key: key.to_string(), value: value.trim().to_string(), line: i + 1 });
    }
    Ok(out)
}

fn config_path(args: &[OsString]) -> Option<OsString> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().cloned();
        }
        if let Some(rest) = a.to_str().and_then(|s| s.strip_prefix("--config=")) {
            return Some(rest.into());
        }
    }
    None
}

fn parse_bool(v: &str) -> Option<bool> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "on" => Some(true),
        "false" | "0" | "no" | "off" => Some(false),
        _ => None,
    }
}

pub(crate) fn expand(cmd: &clap::Command, args: Vec<OsString>) -> CliResult<Vec<OsString>> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let Some(sub_name) = args.get(1).and_then(|s| s.to_str()) else {
        return Ok(args);
    };
    let Some(sub) = cmd.find_subcommand(sub_name) else {
        return Ok(args);
    };
    let path = Path::new(&path);
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Lib(Error::io(path, e)))?;

    let mut injected: Vec<OsString> = Vec::new();
    for entry in parse(&text)? {
        let arg = sub
            .get_arguments()
            .find(|a| a.get_long() == Some(entry.key.as_str()) && entry.key != "config")
            .ok_or_else(|| {
                CliError::Usage(format!(
                    "config line {}: unknown key {:?} for `{sub_name}`",
                    entry.line, entry.key
                ))
            })?;
        let flag = format!("--{}", entry.key);
        if arg.get_action().takes_values() {
            injected.push(flag.into());
            injected.push(entry.value.into());
        } else {
            match parse_bool(&entry.value) {
                Some(true) => injected.push(flag.into()),
                Some(false) => {}
                None => {
                    return Err(CliError::Usage(format!(
                        "config line {}: {:?} expects true or false",
                        entry.line, entry.key
                    )))
                }
            }
        }
    }
    let mut out = args[..2].to_vec();
    out.extend(injected);
    out.extend_from_slice(&args[2..]);
    Ok(out)
}
