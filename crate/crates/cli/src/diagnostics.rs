//! Diagnostics CSV: `# key = value` provenance lines, one header row with a
//! fixed column order per kind, then one row per recorded step. Values are
//! written in shortest round-trip exponent notation.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{CliError, Result};

pub struct DiagnosticsWriter {
    path: PathBuf,
    out: BufWriter<File>,
    columns: Vec<String>,
    last_time: f64,
}

impl DiagnosticsWriter {
    /// `columns[0]` is the integer step or frame index, `columns[1]` the
    /// time; the rest are real-valued.
    pub fn create(path: &Path, provenance: &[(&str, String)], columns: &[&str]) -> Result<Self> {
        let file = File::create(path).map_err(|e| CliError::io(path, e))?;
        let mut out = BufWriter::new(file);
        let io = |e| CliError::io(path, e);
        for (k, v) in provenance {
            writeln!(out, "# {k} = {v}").map_err(io)?;
        }
        writeln!(out, "{}", columns.join(",")).map_err(io)?;
        Ok(Self {
            path: path.to_path_buf(),
            out,
            columns: columns.iter().map(|s| s.to_string()).collect(),
            last_time: f64::NEG_INFINITY,
        })
    }

    pub fn row(&mut self, index: usize, time: f64, values: &[f64]) -> Result<()> {
        if values.len() + 2 != self.columns.len() {
            return Err(CliError::Invalid(format!(
                "diagnostics row has {} values for {} columns",
                values.len() + 2,
                self.columns.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(CliError::Core {
                context: format!("diagnostics column `{}` at t={time}", self.columns[i + 2]),
                source: wavepot_core::Error::NonFinite { index },
            });
        }
        if time <= self.last_time {
            return Err(CliError::Invalid(format!("diagnostics time {time} is not increasing")));
        }
        self.last_time = time;
        let io = |e| CliError::io(&self.path, e);
        write!(self.out, "{index},{time:e}").map_err(io)?;
        for v in values {
            write!(self.out, ",{v:e}").map_err(io)?;
        }
        writeln!(self.out).map_err(io)
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush().map_err(|e| CliError::io(&self.path, e))
    }
}

/// A parsed diagnostics file.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub provenance: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Diagnostics {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let bad = |message: String| CliError::Parse {
            path: path.to_path_buf(),
            message,
        };
        let mut provenance = Vec::new();
        let mut columns = None;
        let mut rows = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if let Some(rest) = line.strip_prefix("# ") {
                if let Some((k, v)) = rest.split_once(" = ") {
                    provenance.push((k.to_string(), v.to_string()));
                }
                continue;
            }
            match &columns {
                None => columns = Some(line.split(',').map(str::to_string).collect::<Vec<_>>()),
                Some(cols) => {
                    let row = line
                        .split(',')
                        .map(|v| v.parse::<f64>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|e| bad(format!("line {}: {e}", n + 1)))?;
                    if row.len() != cols.len() {
                        return Err(bad(format!("line {}: {} values for {} columns", n + 1, row.len(), cols.len())));
                    }
                    rows.push(row);
                }
            }
        }
        Ok(Self {
            provenance,
            columns: columns.ok_or_else(|| bad("no header row".into()))?,
            rows,
        })
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn provenance(&self, key: &str) -> Option<&str> {
        self.provenance.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}
