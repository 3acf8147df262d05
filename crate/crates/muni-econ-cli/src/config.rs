//! Key=value files: run configs and regression spec files share one format.

use std::collections::BTreeMap;
use std::path::Path;

/// Parse a key=value file. Blank lines and lines starting with `#` are
/// skipped; keys must be unique.
pub fn load(path: Option<&Path>) -> Result<BTreeMap<String, String>, String> {
    let Some(path) = path else {
        return Ok(BTreeMap::new());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("config {}: {e}", path.display()))?;
    parse(&text).map_err(|e| format!("config {}: {e}", path.display()))
}

pub fn parse(text: &str) -> Result<BTreeMap<String, String>, String> {
    let mut map = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(format!("line {}: expected key=value, got `{line}`", idx + 1));
        };
        let key = key.trim().to_string();
        if key.is_empty() {
            return Err(format!("line {}: empty key", idx + 1));
        }
        if map.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(format!("line {}: duplicate key {key}", idx + 1));
        }
    }
    Ok(map)
}

/// Reject keys outside the command's vocabulary so typos fail loudly.
pub fn check_keys(map: &BTreeMap<String, String>, allowed: &[&str]) -> Result<(), String> {
    for key in map.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(format!(
                "unknown key `{key}` (allowed: {})",
                allowed.join(", ")
            ));
        }
    }
    Ok(())
}
