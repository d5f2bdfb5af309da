use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixKind {
    Plain,
    Modified,
}

#[derive(Serialize, Deserialize)]
struct RawMatrix {
    labels: [String; 2],
    kind: MatrixKind,
    trace: f64,
    entries: Vec<Vec<f64>>,
}

/// A `p × p` co-activity matrix `C_kl` together with its trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMatrix", into = "RawMatrix")]
pub struct CoActiveMatrix {
    entries: DMatrix<f64>,
    trace: f64,
    labels: [String; 2],
    kind: MatrixKind,
}

impl TryFrom<RawMatrix> for CoActiveMatrix {
    type Error = String;

    fn try_from(raw: RawMatrix) -> std::result::Result<Self, String> {
        let p = raw.entries.len();
        if p == 0 || raw.entries.iter().any(|r| r.len() != p) {
            return Err("entries must be a non-empty square matrix".into());
        }
        let entries = DMatrix::from_fn(p, p, |i, j| raw.entries[i][j]);
        let m = CoActiveMatrix::new(entries, (&raw.labels[0], &raw.labels[1]), raw.kind);
        if (m.trace - raw.trace).abs() > 1e-12 * m.trace.abs().max(1e-300) + 1e-300 {
            return Err(format!("trace {} disagrees with diagonal sum {}", raw.trace, m.trace));
        }
        Ok(m)
    }
}

impl From<CoActiveMatrix> for RawMatrix {
    fn from(m: CoActiveMatrix) -> Self {
        let entries = m.entries.row_iter().map(|r| r.iter().copied().collect()).collect();
        RawMatrix { labels: m.labels, kind: m.kind, trace: m.trace, entries }
    }
}

impl CoActiveMatrix {
    pub fn new(entries: DMatrix<f64>, labels: (&str, &str), kind: MatrixKind) -> Self {
        assert!(entries.is_square(), "co-activity matrix must be square");
        let trace = entries.trace();
        Self { entries, trace, labels: [labels.0.to_owned(), labels.1.to_owned()], kind }
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.trace
    }

    pub fn labels(&self) -> (&str, &str) {
        (&self.labels[0], &self.labels[1])
    }

    pub fn kind(&self) -> MatrixKind {
        self.kind
    }

    pub fn transpose(&self) -> Self {
        Self {
            entries: self.entries.transpose(),
            trace: self.trace,
            labels: [self.labels[1].clone(), self.labels[0].clone()],
            kind: self.kind,
        }
    }

    /// Rows of the matrix as CSV with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        write_matrix_csv(&mut w, &self.entries)
    }

    /// Parse a bare `p × p` CSV matrix, ignoring `#` comment lines.
    pub fn read_csv(text: &str, labels: (&str, &str), kind: MatrixKind) -> Result<Self> {
        let m = read_matrix_csv(text)?;
        if !m.is_square() {
            return Err(Error::InvalidArgument(format!("matrix is {}x{}, not square", m.nrows(), m.ncols())));
        }
        Ok(Self::new(m, labels, kind))
    }
}

/// Write a matrix as CSV rows with 17 significant digits.
pub fn write_matrix_csv<W: Write>(w: &mut W, m: &DMatrix<f64>) -> Result<()> {
    for r in m.row_iter() {
        let line: Vec<String> = r.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

/// Parse a numeric CSV matrix, skipping blank and `#` lines.
pub fn read_matrix_csv(text: &str) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse { line: ln + 1, msg: e.to_string() })?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse { line: ln + 1, msg: format!("expected {} fields", first.len()) });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse { line: 0, msg: "no matrix rows".into() });
    }
    Ok(DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CoActiveMatrix {
        let e = DMatrix::from_row_slice(2, 2, &[2.0 / 3.0, 6.1, 0.1 + 0.2, 1e-300]);
        CoActiveMatrix::new(e, ("f1", "f2"), MatrixKind::Plain)
    }

    #[test]
    fn json_round_trip_is_lossless() {
        let m = sample();
        let s = serde_json::to_string(&m).unwrap();
        assert!(s.contains("\"kind\":\"plain\""));
        assert!(s.contains("\"labels\":[\"f1\",\"f2\"]"));
        let back: CoActiveMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn csv_round_trip_is_lossless() {
        let m = sample();
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let text = format!("# provenance\n{}", String::from_utf8(buf).unwrap());
        let back = CoActiveMatrix::read_csv(&text, ("f1", "f2"), MatrixKind::Plain).unwrap();
        assert_eq!(back.entries(), m.entries());
    }

    #[test]
    fn inconsistent_json_rejected() {
        let s = r#"{"labels":["a","b"],"kind":"plain","trace":5.0,"entries":[[1,0],[0,1]]}"#;
        assert!(serde_json::from_str::<CoActiveMatrix>(s).is_err());
        let s = r#"{"labels":["a","b"],"kind":"plain","trace":1.0,"entries":[[1,0]]}"#;
        assert!(serde_json::from_str::<CoActiveMatrix>(s).is_err());
    }

    #[test]
    fn transpose_swaps_labels() {
        let t = sample().transpose();
        assert_eq!(t.labels(), ("f2", "f1"));
        assert_eq!(t.entries()[(0, 1)], 0.1 + 0.2);
    }
}
