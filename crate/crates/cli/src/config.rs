//! `key = value` config files. Keys are long flag names without the dashes;
//! underscores and dashes are interchangeable. Blank lines and `#` comments
//! are skipped.

use std::collections::BTreeSet;
use std::path::Path;

use crate::UsageError;

pub fn parse(text: &str) -> Result<Vec<(String, String)>, UsageError> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| UsageError(format!("config line {}: expected key=value, got {line:?}", n + 1)))?;
        let key = key.trim().replace('_', "-");
        let value = value.trim().to_string();
        if key.is_empty() || key.contains(char::is_whitespace) {
            return Err(UsageError(format!("config line {}: bad key {key:?}", n + 1)));
        }
        if key == "config" {
            return Err(UsageError(format!("config line {}: nested config files are not supported", n + 1)));
        }
        if out.iter().any(|(k, _)| *k == key) {
            return Err(UsageError(format!("config line {}: duplicate key {key:?}", n + 1)));
        }
        out.push((key, value));
    }
    Ok(out)
}

fn config_path(argv: &[String]) -> Result<Option<String>, UsageError> {
    let mut it = argv.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            return it
                .next()
                .cloned()
                .map(Some)
                .ok_or_else(|| UsageError("--config needs a path".into()));
        }
        if let Some(v) = a.strip_prefix("--config=") {
            return Ok(Some(v.to_string()));
        }
    }
    Ok(None)
}

fn flag_name(arg: &str) -> Option<String> {
    let name = arg.strip_prefix("--")?;
    let name = name.split('=').next().unwrap_or(name);
    Some(name.replace('_', "-"))
}

/// Splices the config file's entries in after the subcommand, skipping keys
/// that the command line already sets.
pub fn expand(argv: Vec<String>) -> Result<Vec<String>, UsageError> {
    let Some(path) = config_path(&argv)? else {
        return Ok(argv);
    };
    if argv.len() < 2 {
        return Ok(argv);
    }
    let text = std::fs::read_to_string(Path::new(&path))
        .map_err(|e| UsageError(format!("cannot read config {path}: {e}")))?;
    let explicit: BTreeSet<String> = argv.iter().filter_map(|a| flag_name(a)).collect();
    let mut merged = argv[..2].to_vec();
    for (key, value) in parse(&text)? {
        if explicit.contains(&key) {
            continue;
        }
        merged.push(format!("--{key}={value}"));
    }
    merged.extend_from_slice(&argv[2..]);
    Ok(merged)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_underscores() {
        let kv = parse("# profile\nfamily = infinite\nr0=quadratic  # flat\n\nn_steps = 400\n").unwrap();
        assert_eq!(
            kv,
            vec![
                ("family".into(), "infinite".into()),
                ("r0".into(), "quadratic".into()),
                ("n-steps".into(), "400".into()),
            ]
        );
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(parse("family finite").is_err());
        assert!(parse("k=1\nk=2").is_err());
        assert!(parse("config=other.cfg").is_err());
    }
}
