//! Trajectory files: an 8-byte magic, a little-endian `u64` header length,
//! a TOML header describing the grid, fields and provenance, then raw
//! frames. Each frame is the time followed by every field in header order,
//! all little-endian `f64`, samples in row-major order with x fastest.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::scenario::Physics;

pub const MAGIC: &[u8; 8] = b"WAVEPOT\n";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourcesHeader {
    pub rho: String,
    pub j: [String; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub format_version: u32,
    pub kind: String,
    pub fields: Vec<String>,
    pub dtype: String,
    pub order: String,
    pub method: String,
    /// Integrator step; consecutive frames are `stride` steps apart.
    pub dt: f64,
    pub stride: usize,
    pub scenario_sha256: String,
    pub version: String,
    pub physics: Physics,
    pub sources: Option<SourcesHeader>,
}

impl Header {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        kind: &str,
        fields: &[&str],
        method: &str,
        dt: f64,
        stride: usize,
        scenario_sha256: &str,
        physics: Physics,
        sources: Option<SourcesHeader>,
    ) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            kind: kind.to_string(),
            fields: fields.iter().map(|s| s.to_string()).collect(),
            dtype: "f64le".into(),
            order: "x-fastest".into(),
            method: method.to_string(),
            dt,
            stride,
            scenario_sha256: scenario_sha256.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            physics,
            sources,
        }
    }

    pub fn samples(&self) -> usize {
        self.physics.points.iter().product()
    }

    pub fn frame_len(&self) -> usize {
        1 + self.fields.len() * self.samples()
    }

    pub fn field_index(&self, name: &str) -> Option<usize> {
        self.fields.iter().position(|f| f == name)
    }
}

pub struct SnapshotWriter {
    path: PathBuf,
    out: BufWriter<File>,
    fields: usize,
    samples: usize,
}

impl SnapshotWriter {
    pub fn create(path: &Path, header: &Header) -> Result<Self> {
        let text = toml::to_string(header).map_err(|e| CliError::Snapshot {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let file = File::create(path).map_err(|e| CliError::io(path, e))?;
        let mut out = BufWriter::new(file);
        let io = |e| CliError::io(path, e);
        out.write_all(MAGIC).map_err(io)?;
        out.write_all(&(text.len() as u64).to_le_bytes()).map_err(io)?;
        out.write_all(text.as_bytes()).map_err(io)?;
        Ok(Self {
            path: path.to_path_buf(),
            out,
            fields: header.fields.len(),
            samples: header.samples(),
        })
    }

    pub fn write_frame(&mut self, time: f64, fields: &[&[f64]]) -> Result<()> {
        if fields.len() != self.fields || fields.iter().any(|f| f.len() != self.samples) {
            return Err(CliError::Snapshot {
                path: self.path.clone(),
                message: "frame does not match the header layout".into(),
            });
        }
        let io = |e| CliError::io(&self.path, e);
        self.out.write_all(&time.to_le_bytes()).map_err(io)?;
        for f in fields {
            for v in *f {
                self.out.write_all(&v.to_le_bytes()).map_err(io)?;
            }
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush().map_err(|e| CliError::io(&self.path, e))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub time: f64,
    /// One vector per header field.
    pub fields: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub header: Header,
    pub frames: Vec<Frame>,
}

impl Snapshot {
    pub fn read(path: &Path) -> Result<Self> {
        let bad = |message: String| CliError::Snapshot {
            path: path.to_path_buf(),
            message,
        };
        let mut bytes = Vec::new();
        File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| CliError::io(path, e))?;
        if bytes.len() < 16 || &bytes[..8] != MAGIC {
            return Err(bad("missing magic bytes".into()));
        }
        let header_len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
        let body_start = 16usize
            .checked_add(header_len)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| bad("truncated header".into()))?;
        let text = std::str::from_utf8(&bytes[16..body_start]).map_err(|e| bad(e.to_string()))?;
        let header: Header = toml::from_str(text).map_err(|e| bad(e.to_string()))?;
        if header.format_version != FORMAT_VERSION || header.dtype != "f64le" || header.order != "x-fastest" {
            return Err(bad("unsupported format version or layout".into()));
        }
        let frame_bytes = 8 * header.frame_len();
        let body = &bytes[body_start..];
        if body.len() % frame_bytes != 0 {
            return Err(bad(format!("{} trailing bytes after the last frame", body.len() % frame_bytes)));
        }
        let samples = header.samples();
        let frames = body
            .chunks_exact(frame_bytes)
            .map(|chunk| {
                let values: Vec<f64> = chunk
                    .chunks_exact(8)
                    .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
                    .collect();
                Frame {
                    time: values[0],
                    fields: values[1..].chunks_exact(samples).map(|c| c.to_vec()).collect(),
                }
            })
            .collect();
        Ok(Self { header, frames })
    }

    pub fn times(&self) -> Vec<f64> {
        self.frames.iter().map(|f| f.time).collect()
    }

    /// Frame spacing in time.
    pub fn frame_dt(&self) -> f64 {
        self.header.dt * self.header.stride as f64
    }

    pub fn require_fields(&self, path: &Path, names: &[&str]) -> Result<Vec<usize>> {
        names
            .iter()
            .map(|n| {
                self.header.field_index(n).ok_or_else(|| CliError::Snapshot {
                    path: path.to_path_buf(),
                    message: format!("field `{n}` not present (fields: {})", self.header.fields.join(", ")),
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;

    fn physics() -> Physics {
        Physics {
            points: vec![4, 2],
            lengths: vec![1.0, 2.0],
            backend: "spectral".into(),
            hbar: 1.0,
            m: 1.0,
            c: 1.0,
            potential: "x^2".into(),
            constants: BTreeMap::from([("w".to_string(), 2.0)]),
        }
    }

    #[test]
    fn round_trip_preserves_header_and_bits() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.wpt");
        let header = Header::new("phi", &["phi", "phi_dot"], "verlet", 0.01, 5, "abc", physics(), None);
        let mut w = SnapshotWriter::create(&path, &header).unwrap();
        let a: Vec<f64> = (0..8).map(|i| i as f64 * 0.1).collect();
        let b: Vec<f64> = (0..8).map(|i| -(i as f64).sqrt()).collect();
        w.write_frame(0.0, &[&a, &b]).unwrap();
        w.write_frame(0.05, &[&b, &a]).unwrap();
        assert!(w.write_frame(0.1, &[&a]).is_err());
        w.finish().unwrap();
        let s = Snapshot::read(&path).unwrap();
        assert_eq!(s.header, header);
        assert_eq!(s.frames.len(), 2);
        assert_eq!(s.frames[1].fields[0], b);
        assert_eq!(s.frames[1].time, 0.05);
    }

    #[test]
    fn truncated_files_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.wpt");
        let header = Header::new("phi", &["phi"], "verlet", 0.01, 1, "abc", physics(), None);
        let mut w = SnapshotWriter::create(&path, &header).unwrap();
        w.write_frame(0.0, &[&[0.0; 8]]).unwrap();
        w.finish().unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.pop();
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(Snapshot::read(&path), Err(CliError::Snapshot { .. })));
    }
}
