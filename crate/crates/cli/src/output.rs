//! Payload assembly and writing. Payloads carry no timestamps and all
//! aggregation upstream is integer-only, so identical configs yield
//! identical bytes.

use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use crate::Format;

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value).context("serializing report")?;
    text.push('\n');
    Ok(text)
}

/// Render a CSV table. Fields here are numbers and plain tokens, so no
/// quoting is needed; floats use the shortest round-trip form.
pub fn csv_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut text = header.join(",");
    text.push('\n');
    for row in rows {
        debug_assert_eq!(row.len(), header.len());
        text.push_str(&row.join(","));
        text.push('\n');
    }
    text
}

/// Commands with a single structured report only speak JSON.
pub fn require_json(format: Format, command: &str) -> Result<()> {
    if format != Format::Json {
        bail!("{command} emits a structured report; csv is only available for bounds and bench");
    }
    Ok(())
}

pub fn write_payload(out: Option<&Path>, payload: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, payload)
            .with_context(|| format!("writing payload to {}", path.display())),
        None => std::io::stdout()
            .write_all(payload.as_bytes())
            .context("writing payload to stdout"),
    }
}
