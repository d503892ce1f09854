//! Parameter-vector files: a one-line layout header followed by one CSV row
//! of values. Values are written with 17 significant digits, enough for an
//! exact f64 round trip.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

const HEADER_PREFIX: &str = "# theta";

/// Serialize `theta` with its layout descriptor.
pub fn theta_to_string(layout: &str, theta: &[f64]) -> String {
    let row: Vec<String> = theta.iter().map(|v| format!("{v:.16e}")).collect();
    format!("{HEADER_PREFIX} p={} layout={}\n{}\n", theta.len(), layout, row.join(","))
}

/// Parse a theta file body. Returns `(layout descriptor, values)`.
pub fn theta_from_string(text: &str) -> Result<(String, Vec<f64>)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::LayoutMismatch("empty theta file".into()))?;
    if !header.starts_with(HEADER_PREFIX) {
        return Err(Error::LayoutMismatch(format!(
            "missing '{HEADER_PREFIX}' header, found {header:?}"
        )));
    }
    let mut declared_p: Option<usize> = None;
    let mut layout = String::new();
    for token in header[HEADER_PREFIX.len()..].split_whitespace() {
        if let Some(p) = token.strip_prefix("p=") {
            declared_p = Some(p.parse().map_err(|_| {
                Error::LayoutMismatch(format!("bad parameter count {p:?}"))
            })?);
        } else if let Some(l) = token.strip_prefix("layout=") {
            layout = l.to_string();
        }
    }
    let declared_p = declared_p
        .ok_or_else(|| Error::LayoutMismatch("header lacks p=<count>".into()))?;
    let row = lines
        .next()
        .ok_or_else(|| Error::LayoutMismatch("theta file has no value row".into()))?;
    let values: Vec<f64> = row
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::LayoutMismatch(format!("bad value {v:?}")))
        })
        .collect::<Result<_>>()?;
    if values.len() != declared_p {
        return Err(Error::LayoutMismatch(format!(
            "header declares p={declared_p} but row has {} values",
            values.len()
        )));
    }
    if let Some(extra) = lines.next() {
        return Err(Error::LayoutMismatch(format!(
            "unexpected extra content: {extra:?}"
        )));
    }
    Ok((layout, values))
}

pub fn write_theta(path: &Path, layout: &str, theta: &[f64]) -> Result<()> {
    fs::write(path, theta_to_string(layout, theta))?;
    Ok(())
}

pub fn read_theta(path: &Path) -> Result<(String, Vec<f64>)> {
    let text = fs::read_to_string(path)?;
    theta_from_string(&text)
}
