//! `key = value` config files and resolved-config echo.

use std::fmt::Display;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

/// Settings for one subcommand: defaults, then a config file, then flags.
pub trait Settings: Default {
    /// Applies one file entry; unknown keys are an error.
    fn set(&mut self, key: &str, value: &str) -> Result<(), String>;

    /// Every key with its resolved value, in a stable order.
    fn entries(&self) -> Vec<(&'static str, String)>;
}

pub fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T, String>
where
    T::Err: Display,
{
    value
        .parse()
        .map_err(|e| format!("{key}: invalid value {value:?}: {e}"))
}

/// `key = value` pairs with `#` comments and blank lines skipped.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>, String> {
    let mut pairs = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected key = value", n + 1))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(format!("line {}: empty key", n + 1));
        }
        pairs.push((k.to_string(), v.trim().to_string()));
    }
    Ok(pairs)
}

/// Defaults overlaid with `file`, if any. Flags are applied by the caller.
pub fn load<S: Settings>(file: Option<&Path>) -> Result<S, CliError> {
    let mut settings = S::default();
    if let Some(path) = file {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
        let pairs = parse_pairs(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        for (k, v) in pairs {
            settings
                .set(&k, &v)
                .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        }
    }
    Ok(settings)
}

/// The resolved config in config-file syntax, so it can be fed back in.
pub fn render(command: &str, settings: &impl Settings) -> String {
    let mut out = format!("# fallwatch {command}: resolved config\n");
    for (k, v) in settings.entries() {
        out.push_str(&format!("{k} = {v}\n"));
    }
    out
}
