//! Plain-text file formats.
//!
//! Configuration CSV: a `dim,n` header line, then one point per line with
//! coordinates in `{:.16e}` (17 significant digits, round-trip exact).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serializer;

use crate::energy::{Configuration, Points};
use crate::error::{Error, Result};

/// Serializes non-finite values as the strings `"inf"`, `"-inf"`, `"nan"`,
/// which JSON numbers cannot represent.
pub fn ser_f64<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else if v.is_nan() {
        s.serialize_str("nan")
    } else if *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

pub fn ser_opt_f64<S: Serializer>(v: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(x) => ser_f64(x, s),
        None => s.serialize_none(),
    }
}

pub fn format_configuration(cfg: &Configuration) -> String {
    let mut out = format!("{},{}\n", cfg.dim(), cfg.n());
    for p in cfg.points() {
        for (k, x) in p.iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            write!(out, "{x:.16e}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn write_configuration(cfg: &Configuration, path: &Path) -> Result<()> {
    fs::write(path, format_configuration(cfg))?;
    Ok(())
}

fn parse_err(label: &str, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: label.to_string(),
        line,
        message: message.into(),
    }
}

fn parse_row(label: &str, line_no: usize, line: &str) -> Result<Vec<f64>> {
    line.split(',')
        .map(|f| {
            let f = f.trim();
            f.parse::<f64>()
                .map_err(|_| parse_err(label, line_no, format!("cannot parse number {f:?}")))
        })
        .collect()
}

/// Numbered non-blank lines, skipping `#` comments.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

pub fn parse_configuration(text: &str, label: &str) -> Result<Configuration> {
    let mut lines = content_lines(text);
    let (hline, header) = lines.next().ok_or_else(|| parse_err(label, 1, "empty file"))?;
    let fields: Vec<&str> = header.split(',').map(str::trim).collect();
    let (dim, n) = match fields.as_slice() {
        [d, n] => (
            d.parse::<usize>()
                .map_err(|_| parse_err(label, hline, format!("bad dimension {d:?}")))?,
            n.parse::<usize>()
                .map_err(|_| parse_err(label, hline, format!("bad point count {n:?}")))?,
        ),
        _ => return Err(parse_err(label, hline, "header must be `dim,n`")),
    };
    if dim == 0 || n == 0 {
        return Err(parse_err(label, hline, "dim and n must be positive"));
    }
    let mut coords = Vec::with_capacity(dim * n);
    let mut last = hline;
    for (no, line) in lines {
        let row = parse_row(label, no, line)?;
        if row.len() != dim {
            return Err(parse_err(
                label,
                no,
                format!("expected {dim} coordinates, found {}", row.len()),
            ));
        }
        if row.iter().any(|x| !x.is_finite()) {
            return Err(parse_err(label, no, "coordinates must be finite"));
        }
        coords.extend(row);
        last = no;
    }
    if coords.len() != dim * n {
        return Err(parse_err(
            label,
            last,
            format!("header announces {n} points, file has {}", coords.len() / dim),
        ));
    }
    Configuration::new(dim, coords)
}

pub fn read_configuration(path: &Path) -> Result<Configuration> {
    let text = fs::read_to_string(path)?;
    parse_configuration(&text, &path.display().to_string())
}

/// Rows of numbers, allowing one non-numeric header line at the top.
fn numeric_rows(text: &str, label: &str) -> Result<Vec<(usize, Vec<f64>)>> {
    let mut rows = Vec::new();
    for (k, (no, line)) in content_lines(text).enumerate() {
        match parse_row(label, no, line) {
            Ok(r) => rows.push((no, r)),
            Err(_)
                if k == 0
                    && line
                        .chars()
                        .any(|c| c.is_ascii_alphabetic() && c != 'e' && c != 'E') => {}
            Err(e) => return Err(e),
        }
    }
    Ok(rows)
}

/// Two-column `radius,value` table.
pub fn read_radial_csv(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let label = path.display().to_string();
    let text = fs::read_to_string(path)?;
    let mut radii = Vec::new();
    let mut values = Vec::new();
    for (no, row) in numeric_rows(&text, &label)? {
        if row.len() != 2 {
            return Err(parse_err(&label, no, "expected two columns: radius,value"));
        }
        radii.push(row[0]);
        values.push(row[1]);
    }
    Ok((radii, values))
}

/// Point cloud with `dim` coordinates per row and an optional trailing
/// weight column (all rows or none).
pub fn read_cloud_csv(path: &Path, dim: usize) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
    let label = path.display().to_string();
    let text = fs::read_to_string(path)?;
    let rows = numeric_rows(&text, &label)?;
    let weighted = rows.first().map(|(_, r)| r.len() == dim + 1).unwrap_or(false);
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for (no, row) in rows {
        let want = if weighted { dim + 1 } else { dim };
        if row.len() != want {
            return Err(parse_err(
                &label,
                no,
                format!("expected {want} columns, found {}", row.len()),
            ));
        }
        points.extend_from_slice(&row[..dim]);
        if weighted {
            weights.push(row[dim]);
        }
    }
    Ok((points, weighted.then_some(weights)))
}

/// Every number in a comma/newline separated file.
pub fn read_values_csv(path: &Path) -> Result<Vec<f64>> {
    let label = path.display().to_string();
    let text = fs::read_to_string(path)?;
    Ok(numeric_rows(&text, &label)?
        .into_iter()
        .flat_map(|(_, r)| r)
        .collect())
}
