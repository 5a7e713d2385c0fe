//! Plain-text `key = value` files: run configs, hyperparameter grids, and
//! output manifests. Lines starting with `#` are comments; values may be
//! comma-separated lists (grid axes).

use anyhow::{bail, Context, Result};
use std::fmt::Write as _;
use std::path::Path;

/// Parses `key = value` lines, keeping declaration order.
pub fn parse(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("line {}: expected `key = value`, got {raw:?}", i + 1);
        };
        out.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(out)
}

pub fn read(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    parse(&text).with_context(|| format!("in {}", path.display()))
}

/// Renders entries as `key = value` lines.
pub fn render(entries: &[(String, String)]) -> String {
    let mut out = String::new();
    for (key, value) in entries {
        writeln!(out, "{key} = {value}").unwrap();
    }
    out
}

/// Parses a comma-separated list of numbers (a grid axis).
pub fn parse_number_list(value: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .with_context(|| format!("invalid number {v:?}"))
        })
        .collect()
}
