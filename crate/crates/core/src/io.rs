//! File formats: model files, training data and provenance stamps.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::closedform::InputPrior;
use crate::error::{Error, Result};
use crate::model::{Ensemble, MarsSurrogate};

pub const TOOL: &str = "coas";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Provenance attached to every artifact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub tool: String,
    pub version: String,
    pub seed: Option<u64>,
    pub config_hash: String,
}

impl Meta {
    /// Stamp derived from a serializable run configuration.
    pub fn new<C: Serialize>(config: &C, seed: Option<u64>) -> Result<Self> {
        let bytes = serde_json::to_vec(config)?;
        Ok(Self {
            tool: TOOL.into(),
            version: VERSION.into(),
            seed,
            config_hash: hex::encode(Sha256::digest(&bytes)),
        })
    }

    /// One-line `#` comment for the top of CSV outputs.
    pub fn csv_comment(&self) -> String {
        let seed = self.seed.map_or("none".to_string(), |s| s.to_string());
        format!("# {} {} seed={} config={}", self.tool, self.version, seed, self.config_hash)
    }
}

/// An ensemble on disk. A single model is an ensemble of one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<Meta>,
    pub label: String,
    pub members: Vec<MarsSurrogate>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum AnyModel {
    File(ModelFile),
    Bare(MarsSurrogate),
}

impl ModelFile {
    pub fn from_ensemble(e: &Ensemble, meta: Option<Meta>) -> Self {
        Self { meta, label: e.label().to_owned(), members: e.members().to_vec() }
    }

    pub fn into_ensemble(self) -> Result<Ensemble> {
        Ensemble::new(self.label, self.members)
    }
}

/// Read a model file, or a bare surrogate object, as an ensemble. The label
/// falls back to the file stem.
pub fn read_models(path: &Path) -> Result<Ensemble> {
    let text = fs::read_to_string(path)?;
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    match serde_json::from_str::<AnyModel>(&text) {
        Ok(AnyModel::File(mut f)) => {
            if f.label.is_empty() {
                f.label = stem;
            }
            f.into_ensemble()
        }
        Ok(AnyModel::Bare(m)) => {
            let label = if m.label().is_empty() { stem } else { m.label().to_owned() };
            Ensemble::new(label.clone(), vec![m.with_label(label)])
        }
        Err(_) => {
            // re-parse strictly for a useful message
            let f: ModelFile = serde_json::from_str(&text)?;
            f.into_ensemble()
        }
    }
}

pub fn read_prior(path: &Path) -> Result<InputPrior> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Training data: inputs and one response column.
#[derive(Clone, Debug)]
pub struct TrainingData {
    pub inputs: Vec<String>,
    pub response: String,
    pub x: DMatrix<f64>,
    pub y: Vec<f64>,
}

/// Parse a headed CSV. The response defaults to the last column; every
/// other column is an input. Lines starting with `#` are skipped.
pub fn read_training_csv(text: &str, response: Option<&str>) -> Result<TrainingData> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if header.len() < 2 {
        return Err(Error::Parse { line: 1, msg: "need at least one input and one response column".into() });
    }
    let ycol = match response {
        Some(name) => header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse { line: 1, msg: format!("no column named {name}") })?,
        None => header.len() - 1,
    };
    let mut rows: Vec<f64> = Vec::new();
    let mut y = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::Parse { line, msg: e.to_string() }
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        for (c, field) in rec.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::Parse { line, msg: format!("column {}: `{field}` is not a number", header[c]) })?;
            if !v.is_finite() {
                return Err(Error::Parse { line, msg: format!("column {}: non-finite value", header[c]) });
            }
            if c == ycol {
                y.push(v);
            } else {
                rows.push(v);
            }
        }
    }
    let p = header.len() - 1;
    let x = DMatrix::from_row_slice(y.len(), p, &rows);
    let inputs = header.iter().enumerate().filter(|&(c, _)| c != ycol).map(|(_, h)| h.clone()).collect();
    Ok(TrainingData { inputs, response: header[ycol].clone(), x, y })
}

/// Write a headed training CSV.
pub fn write_training_csv<W: Write>(mut w: W, names: &[String], x: &DMatrix<f64>, y: &[f64]) -> Result<()> {
    writeln!(w, "{},y", names.join(","))?;
    for (r, yv) in y.iter().enumerate() {
        let row: Vec<String> = x.row(r).iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(w, "{},{yv:.16e}", row.join(","))?;
    }
    Ok(())
}

/// Open `path` for writing, refusing to replace an existing file unless `force`.
pub fn create_output(path: &Path, force: bool) -> Result<BufWriter<fs::File>> {
    if path.exists() && !force {
        return Err(Error::OutputExists(path.to_owned()));
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(fs::File::create(path)?))
}

/// Serialize `value` as pretty JSON with a `meta` object merged in.
pub fn write_json_with_meta<T: Serialize>(path: &Path, value: &T, meta: &Meta, force: bool) -> Result<()> {
    let mut v = serde_json::to_value(value)?;
    if let serde_json::Value::Object(map) = &mut v {
        map.insert("meta".into(), serde_json::to_value(meta)?);
    }
    let mut w = create_output(path, force)?;
    serde_json::to_writer_pretty(&mut w, &v)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Write a CSV whose first line is the provenance comment.
pub fn write_csv_with_meta(
    path: &Path,
    meta: &Meta,
    force: bool,
    body: impl FnOnce(&mut BufWriter<fs::File>) -> Result<()>,
) -> Result<()> {
    let mut w = create_output(path, force)?;
    writeln!(w, "{}", meta.csv_comment())?;
    body(&mut w)?;
    w.flush()?;
    Ok(())
}
