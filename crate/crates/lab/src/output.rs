//! Deterministic CSV and JSON output with a file manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::Format;
use crate::LabError;

/// `x` with 17 significant digits; `inf`, `-inf` and `nan` spelled out.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: usize,
    pub sha256: String,
}

/// Files produced by one experiment, held in memory until written.
#[derive(Debug, Default)]
pub struct Artifacts {
    formats: Vec<Format>,
    pub files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    pub fn new(formats: &[Format]) -> Self {
        Artifacts { formats: formats.to_vec(), files: Vec::new() }
    }

    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }

    pub fn bytes(&mut self, name: &str, data: Vec<u8>) {
        self.files.retain(|f| f.0 != name);
        self.files.push((name.to_string(), data));
    }

    /// CSV table, kept only when CSV output is enabled.
    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<(), LabError> {
        if !self.wants(Format::Csv) {
            return Ok(());
        }
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let io = |e: csv::Error| LabError::Io(format!("{name}: {e}"));
        w.write_record(header).map_err(io)?;
        for r in rows {
            w.write_record(r).map_err(io)?;
        }
        let data = w.into_inner().map_err(|e| LabError::Io(format!("{name}: {e}")))?;
        self.bytes(name, data);
        Ok(())
    }

    /// JSON record, kept only when JSON output is enabled.
    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), LabError> {
        if !self.wants(Format::Json) {
            return Ok(());
        }
        self.json_always(name, value)
    }

    pub fn json_always<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), LabError> {
        self.bytes(name, to_json(name, value)?);
        Ok(())
    }
}

pub fn to_json<T: Serialize>(name: &str, value: &T) -> Result<Vec<u8>, LabError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| LabError::Io(format!("{name}: {e}")))?;
    s.push('\n');
    Ok(s.into_bytes())
}

/// Writes `files` under `dir` in order and returns their manifest.
pub fn write_all(dir: &Path, files: &[(String, Vec<u8>)]) -> Result<Vec<FileEntry>, LabError> {
    fs::create_dir_all(dir).map_err(|e| LabError::Io(format!("{}: {e}", dir.display())))?;
    let mut out = Vec::with_capacity(files.len());
    for (name, data) in files {
        let path: PathBuf = dir.join(name);
        fs::write(&path, data).map_err(|e| LabError::Io(format!("{}: {e}", path.display())))?;
        out.push(FileEntry { path: name.clone(), bytes: data.len(), sha256: format!("{:x}", Sha256::digest(data)) });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(num(0.1), "1.0000000000000001e-1");
        assert_eq!(num(-2.5), "-2.5000000000000000e0");
        assert_eq!(num(f64::NEG_INFINITY), "-inf");
        for x in [0.1, 1.0 / 3.0, 6.02e23, -1e-300, 5e-324] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
    }
}
