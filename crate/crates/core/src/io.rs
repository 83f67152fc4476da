//! File helpers shared by the on-disk formats.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::spectral::Signal;

/// Writes `bytes` to a sibling temp file and renames it over `path`, so
/// readers never observe a partially written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidInput(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Parses signals from CSV text: each row is one signal of comma-separated
/// reals. A file with exactly one value per row is read as a single signal.
/// Blank lines and lines starting with `#` are skipped.
pub fn parse_signals_csv(text: &str) -> Result<Vec<Signal>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(',')
            .enumerate()
            .map(|(field, v)| {
                v.trim().parse::<f64>().map_err(|e| {
                    Error::parse(format!("line {}, field {}", lineno + 1, field + 1), e)
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Empty("signal file".into()));
    }
    let signals = if rows.len() > 1 && rows.iter().all(|r| r.len() == 1) {
        vec![rows.into_iter().map(|r| r[0]).collect()]
    } else {
        rows
    };
    signals
        .into_iter()
        .enumerate()
        .map(|(i, s)| Signal::new(s).map_err(|e| Error::parse(format!("signal {}", i + 1), e)))
        .collect()
}

pub fn read_signals_csv(path: &Path) -> Result<Vec<Signal>> {
    parse_signals_csv(&fs::read_to_string(path)?)
}

pub fn signals_to_csv(signals: &[Signal]) -> String {
    let mut out = String::new();
    for s in signals {
        join_floats(&mut out, s.samples());
        out.push('\n');
    }
    out
}

pub fn write_signals_csv(path: &Path, signals: &[Signal]) -> Result<()> {
    write_atomic(path, signals_to_csv(signals).as_bytes())
}

pub(crate) fn join_floats(out: &mut String, values: &[f64]) {
    use std::fmt::Write as _;
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        write!(out, "{v}").unwrap();
    }
}
