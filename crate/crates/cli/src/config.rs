//! `--config` files: flat `key=value` lines named like the long flags.
//! Entries are spliced into the argument list right after the subcommand,
//! so anything given on the command line wins.

use std::ffi::OsString;
use std::fs;

use crate::error::CliError;

/// Flags that set the same quantity; a command-line use of one suppresses
/// file entries for the others.
const ALIASES: &[&[&str]] = &[&["k", "k-db"], &["psi", "psi-db"], &["sigma", "sigma-db"], &["m", "m-real"]];

fn family(key: &str) -> Vec<&str> {
    ALIASES.iter().find(|f| f.contains(&key)).map(|f| f.to_vec()).unwrap_or_else(|| vec![key])
}

fn flag_name(arg: &str) -> Option<&str> {
    let name = arg.strip_prefix("--")?;
    Some(name.split_once('=').map_or(name, |(n, _)| n))
}

fn subcommand_index(args: &[String]) -> Option<usize> {
    let mut i = 1;
    while i < args.len() {
        let a = args[i].as_str();
        if matches!(a, "--format" | "--out" | "--threads") {
            i += 2;
        } else if a.starts_with('-') {
            i += 1;
        } else {
            return Some(i);
        }
    }
    None
}

/// Parses `key=value` lines; `#` starts a comment line.
pub fn parse(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut entries = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Usage(format!("config line {}: expected key=value, got '{line}'", no + 1)));
        };
        let key = key.trim().trim_start_matches("--");
        if key.is_empty() {
            return Err(CliError::Usage(format!("config line {}: empty key", no + 1)));
        }
        entries.push((key.to_string(), value.trim().to_string()));
    }
    Ok(entries)
}

/// Expands `--config <path>` in `argv`.
pub fn splice(argv: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let mut args: Vec<String> = Vec::with_capacity(argv.len());
    for a in argv {
        match a.into_string() {
            Ok(s) => args.push(s),
            Err(bad) => return Err(CliError::Usage(format!("argument is not valid UTF-8: {bad:?}"))),
        }
    }
    let mut path = None;
    let mut rest = Vec::with_capacity(args.len());
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            path = Some(it.next().ok_or_else(|| CliError::Usage("--config needs a path".into()))?);
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        } else {
            rest.push(a);
        }
    }
    let Some(path) = path else {
        return Ok(rest.into_iter().map(OsString::from).collect());
    };
    let text = fs::read_to_string(&path).map_err(|e| CliError::Usage(format!("cannot read config '{path}': {e}")))?;
    let user_flags: Vec<&str> = rest.iter().filter_map(|a| flag_name(a)).collect();
    let mut injected = Vec::new();
    for (key, value) in parse(&text)? {
        if family(&key).iter().any(|k| user_flags.contains(k)) {
            continue;
        }
        match value.as_str() {
            "true" => injected.push(format!("--{key}")),
            "false" => {}
            _ => injected.push(format!("--{key}={value}")),
        }
    }
    let at = subcommand_index(&rest).map_or(rest.len(), |i| i + 1);
    let mut out: Vec<String> = rest[..at].to_vec();
    out.extend(injected);
    out.extend_from_slice(&rest[at..]);
    Ok(out.into_iter().map(OsString::from).collect())
}
