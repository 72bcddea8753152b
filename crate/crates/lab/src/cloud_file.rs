//! Point-cloud CSV input.
//!
//! The header names every column: `x<i>` for planar coordinates (0-based,
//! contiguous) and `m<n>` for mode coordinates (1-based). Mode cells hold a
//! decimal number or a log-magnitude `ln:<value>` / `-ln:<value>` standing
//! for `±exp(value)`. Empty mode cells are zero. Lines starting with `#` are
//! skipped.

use std::io::Read;

use manelab_core::geometry::{PointCloud, PointTag};
use manelab_core::spectral::Spectrum;
use manelab_core::{LogModeVector, LogReal};

use crate::LabError;

enum Column {
    Planar(usize),
    Mode(usize),
}

fn parse_err(line: u64, msg: String) -> LabError {
    LabError::Parse { line, msg }
}

fn header(fields: &csv::StringRecord, line: u64) -> Result<(Vec<Column>, usize, usize), LabError> {
    let mut cols = Vec::with_capacity(fields.len());
    let mut planar = Vec::new();
    let mut max_mode = 0;
    for (i, name) in fields.iter().enumerate() {
        let name = name.trim();
        let col = if let Some(k) = name.strip_prefix('x') {
            let k: usize = k.parse().map_err(|_| parse_err(line, format!("column {}: bad planar name \"{name}\"", i + 1)))?;
            planar.push(k);
            Column::Planar(k)
        } else if let Some(n) = name.strip_prefix('m') {
            let n: usize = n.parse().map_err(|_| parse_err(line, format!("column {}: bad mode name \"{name}\"", i + 1)))?;
            if n == 0 {
                return Err(parse_err(line, format!("column {}: modes are numbered from 1", i + 1)));
            }
            max_mode = max_mode.max(n);
            Column::Mode(n)
        } else {
            return Err(parse_err(line, format!("column {}: expected x<i> or m<n>, got \"{name}\"", i + 1)));
        };
        cols.push(col);
    }
    let mut sorted = planar.clone();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != planar.len() || sorted.iter().enumerate().any(|(i, &k)| i != k) {
        return Err(parse_err(line, "planar columns must be x0, x1, ... without gaps or repeats".into()));
    }
    Ok((cols, planar.len(), max_mode))
}

fn mode_value(cell: &str) -> Option<LogReal> {
    if let Some(v) = cell.strip_prefix("-ln:") {
        return v.parse::<f64>().ok().filter(|x| !x.is_nan()).map(|x| LogReal::new(-1, x));
    }
    if let Some(v) = cell.strip_prefix("ln:") {
        return v.parse::<f64>().ok().filter(|x| !x.is_nan()).map(|x| LogReal::new(1, x));
    }
    cell.parse::<f64>().ok().filter(|x| x.is_finite()).map(LogReal::from_f64)
}

/// Reads a cloud; `spec_for(n)` supplies mode weights for at least `n` modes.
pub fn read_cloud<R: Read>(mut input: R, spec_for: impl Fn(usize) -> Result<Spectrum, LabError>) -> Result<PointCloud, LabError> {
    let mut text = String::new();
    input.read_to_string(&mut text).map_err(|e| LabError::Io(e.to_string()))?;
    // the reader's own line count skips blank lines; count from byte offsets,
    // which may point at blank lines preceding the record
    let bytes = text.as_bytes();
    let line_at = |byte: u64| {
        let mut b = (byte as usize).min(bytes.len());
        while b < bytes.len() && (bytes[b] == b'\n' || bytes[b] == b'\r') {
            b += 1;
        }
        bytes[..b].iter().filter(|&&c| c == b'\n').count() as u64 + 1
    };
    let csv_err = |e: csv::Error| parse_err(e.position().map_or(0, |p| line_at(p.byte())), e.to_string());
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).comment(Some(b'#')).flexible(true).from_reader(bytes);
    let mut records = rdr.records();
    let first = records.next().ok_or_else(|| parse_err(1, "empty file, expected a header".into()))?;
    let first = first.map_err(csv_err)?;
    let head_line = first.position().map_or(1, |p| line_at(p.byte()));
    let (cols, planar_dims, max_mode) = header(&first, head_line)?;
    let spec = spec_for(max_mode.max(3))?;
    let mut cloud = PointCloud::for_spectrum(planar_dims, &spec, 0.0);
    for rec in records {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| line_at(p.byte()));
        if rec.len() != cols.len() {
            return Err(parse_err(line, format!("expected {} fields, found {}", cols.len(), rec.len())));
        }
        let mut planar = vec![0.0; planar_dims];
        let mut modes = LogModeVector::new();
        for (i, (cell, col)) in rec.iter().zip(&cols).enumerate() {
            let cell = cell.trim();
            match *col {
                Column::Planar(k) => {
                    planar[k] = cell
                        .parse::<f64>()
                        .ok()
                        .filter(|x| x.is_finite())
                        .ok_or_else(|| parse_err(line, format!("column {}: bad planar value \"{cell}\"", i + 1)))?;
                }
                Column::Mode(n) => {
                    if cell.is_empty() {
                        continue;
                    }
                    let v = mode_value(cell)
                        .ok_or_else(|| parse_err(line, format!("column {}: bad mode value \"{cell}\"", i + 1)))?;
                    modes.set(n, v);
                }
            }
        }
        cloud
            .push(planar, modes, PointTag::File { line: line as usize })
            .map_err(|e| parse_err(line, e.to_string()))?;
    }
    if cloud.is_empty() {
        return Err(parse_err(head_line, "no data rows".into()));
    }
    Ok(cloud)
}

#[cfg(test)]
mod tests {
    use super::*;
    use manelab_core::spectral::{make_spectrum, SpectrumFamily};

    fn spec(n: usize) -> Result<Spectrum, LabError> {
        Ok(make_spectrum(SpectrumFamily::Linear { c: 1.0 }, n).unwrap())
    }

    #[test]
    fn reads_planar_and_log_modes() {
        let text = "x0,x1,m2\n# comment\n0,0,\n1,0.5,ln:-800\n0.25,1,-0.5\n";
        let c = read_cloud(text.as_bytes(), spec).unwrap();
        assert_eq!(c.len(), 3);
        let p = &c.points()[1];
        assert_eq!(p.planar, vec![1.0, 0.5]);
        assert_eq!(p.modes.get(2).logmag, -800.0);
        assert_eq!(c.points()[2].modes.get(2).to_f64(), -0.5);
        assert_eq!(c.points()[2].tag, PointTag::File { line: 5 });
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = read_cloud("x0,x1\n0,0\n1,zz\n".as_bytes(), spec).unwrap_err();
        assert!(matches!(e, LabError::Parse { line: 3, .. }), "{e}");
        let e = read_cloud("x0,x1\n0,0\n\n1\n".as_bytes(), spec).unwrap_err();
        assert!(matches!(e, LabError::Parse { line: 4, .. }), "{e}");
        let e = read_cloud("x0,y1\n".as_bytes(), spec).unwrap_err();
        assert!(matches!(e, LabError::Parse { line: 1, .. }), "{e}");
        let e = read_cloud("x1\n0\n".as_bytes(), spec).unwrap_err();
        assert!(e.to_string().contains("x0"), "{e}");
        let e = read_cloud("m1\nln:abc\n".as_bytes(), spec).unwrap_err();
        assert!(matches!(e, LabError::Parse { line: 2, .. }), "{e}");
    }
}
