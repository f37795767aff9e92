//! Run configuration: a flat map of string keys to string values, built
//! from command defaults, an optional config file, and command-line flags
//! (in increasing priority).
//!
//! Config files are `key = value` lines. A `[section]` header prefixes the
//! keys below it with `section.`, and keys may also be written dotted
//! directly. For command `c`, `c.key` takes precedence over a bare `key`.
//! A result file can stand in for a config file: its config echo is used.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use super::format::read_records;
use super::CliError;

pub type RunConfig = BTreeMap<String, String>;

/// Parses config file text into dotted keys.
pub fn parse_config_text(text: &str) -> Result<RunConfig, CliError> {
    let mut out = RunConfig::new();
    let mut section = String::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| {
                CliError::Validation(format!("config line {}: unterminated section header", n + 1))
            })?;
            section = name.trim().to_string();
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::Validation(format!("config line {}: expected key = value", n + 1))
        })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(CliError::Validation(format!("config line {}: empty key", n + 1)));
        }
        let key = if section.is_empty() {
            key.to_string()
        } else {
            format!("{section}.{key}")
        };
        out.insert(key, value.trim().to_string());
    }
    Ok(out)
}

/// Reads a config file, or the config echo of the first record in a result file.
pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
    if text.trim_start().starts_with('{') {
        let records = read_records(path)?;
        let first = records
            .into_iter()
            .next()
            .ok_or_else(|| CliError::Validation(format!("{} holds no records", path.display())))?;
        return Ok(first.config);
    }
    parse_config_text(&text)
}

/// Resolves every key in `defaults` for `command`.
pub fn resolve(
    command: &str,
    defaults: &[(&str, &str)],
    file: &RunConfig,
    flags: &[(&str, Option<String>)],
) -> Result<RunConfig, CliError> {
    let known = |k: &str| defaults.iter().any(|(d, _)| *d == k);
    for (key, value) in flags {
        if value.is_some() && !known(key) {
            return Err(CliError::Validation(format!(
                "--{} does not apply to `{command}`",
                key.replace('_', "-")
            )));
        }
    }
    for key in file.keys() {
        let bare = match key.split_once('.') {
            Some((section, rest)) if section == command => rest,
            Some(_) => continue,
            None => key.as_str(),
        };
        if !known(bare) {
            log::warn!("config key `{key}` is not used by `{command}`");
        }
    }
    let mut out = RunConfig::new();
    for (key, default) in defaults {
        let flag = flags
            .iter()
            .find(|(k, _)| k == key)
            .and_then(|(_, v)| v.clone());
        let value = flag
            .or_else(|| file.get(&format!("{command}.{key}")).cloned())
            .or_else(|| file.get(*key).cloned())
            .unwrap_or_else(|| default.to_string());
        out.insert(key.to_string(), value);
    }
    Ok(out)
}

/// Typed lookup with a diagnostic naming the key.
pub fn get<T: FromStr>(cfg: &RunConfig, key: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    let raw = cfg
        .get(key)
        .ok_or_else(|| CliError::Validation(format!("missing value for `{key}`")))?;
    raw.trim()
        .parse()
        .map_err(|e| CliError::Validation(format!("invalid value for `{key}` ({raw:?}): {e}")))
}

/// Like [`get`] but an empty value means absent.
pub fn get_opt<T: FromStr>(cfg: &RunConfig, key: &str) -> Result<Option<T>, CliError>
where
    T::Err: std::fmt::Display,
{
    match cfg.get(key).map(|s| s.trim()) {
        None | Some("") => Ok(None),
        Some(_) => get(cfg, key).map(Some),
    }
}

/// Comma-separated list; empty means an empty list.
pub fn get_list<T: FromStr>(cfg: &RunConfig, key: &str) -> Result<Vec<T>, CliError>
where
    T::Err: std::fmt::Display,
{
    let raw = cfg.get(key).map(|s| s.trim()).unwrap_or("");
    if raw.is_empty() {
        return Ok(Vec::new());
    }
    raw.split(',')
        .map(|item| {
            item.trim().parse().map_err(|e| {
                CliError::Validation(format!("invalid entry {item:?} in `{key}`: {e}"))
            })
        })
        .collect()
}
