use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use amcsim::Mat;
use anyhow::{Context, Result};
use serde::Serialize;

/// Malformed user input: unreadable or ill-formed files, contradictory
/// options. Maps to exit code 2.
#[derive(Debug)]
pub struct InputError(pub String);

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

pub fn input_error(msg: impl Into<String>) -> anyhow::Error {
    InputError(msg.into()).into()
}

fn parse_value(s: &str, path: &Path, line: usize) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| input_error(format!("{}:{line}: '{}' is not a number", path.display(), s.trim())))?;
    if !v.is_finite() {
        return Err(input_error(format!("{}:{line}: non-finite value", path.display())));
    }
    Ok(v)
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| input_error(format!("cannot read {}: {e}", path.display())))
}

/// Square matrix, one comma-separated row per line, in siemens. Blank lines
/// and `#` comments are ignored.
pub fn read_matrix(path: &Path) -> Result<Mat<f64>> {
    let text = read_text(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(',')
            .map(|s| parse_value(s, path, k + 1))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    let n = rows.len();
    if n == 0 {
        return Err(input_error(format!("{}: empty matrix", path.display())));
    }
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
        return Err(input_error(format!(
            "{}: row {} has {} entries, expected {n} for a square matrix",
            path.display(),
            i + 1,
            r.len()
        )));
    }
    Ok(Mat::from_fn(n, n, |i, j| rows[i][j]))
}

/// One value per line.
pub fn read_vector(path: &Path) -> Result<Vec<f64>> {
    let text = read_text(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim().starts_with('#'))
        .map(|(k, l)| parse_value(l, path, k + 1))
        .collect()
}

pub fn write_vector(path: &Path, v: &[f64]) -> Result<()> {
    let mut w = create(path)?;
    for x in v {
        writeln!(w, "{x:e}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn ext(self) -> &'static str {
        match self {
            Self::Csv => "csv",
            Self::Json => "json",
        }
    }
}

/// Writes `rows` to `dir/stem.{csv,json}`. CSV files start with one
/// `# key=value` line per setting; JSON files hold `{"config", "rows"}`.
pub fn write_table<T: Serialize>(
    dir: &Path,
    stem: &str,
    format: Format,
    config: &[(String, String)],
    rows: &[T],
) -> Result<std::path::PathBuf> {
    let path = dir.join(format!("{stem}.{}", format.ext()));
    let mut w = create(&path)?;
    match format {
        Format::Csv => {
            for (k, v) in config {
                writeln!(w, "# {k}={v}")?;
            }
            let mut cw = csv::Writer::from_writer(&mut w);
            for r in rows {
                cw.serialize(r)?;
            }
            cw.flush()?;
        }
        Format::Json => {
            let cfg: serde_json::Map<String, serde_json::Value> = config
                .iter()
                .map(|(k, v)| (k.clone(), serde_json::Value::String(v.clone())))
                .collect();
            serde_json::to_writer_pretty(&mut w, &serde_json::json!({ "config": cfg, "rows": rows }))?;
            writeln!(w)?;
        }
    }
    w.flush()?;
    Ok(path)
}
