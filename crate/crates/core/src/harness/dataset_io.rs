//! Reading and writing the v1 dataset text format.
//!
//! ```text
//! # clusterbench-dataset v1; C=2;F=3;Ne=5;alpha=1.5;seed=123;realization=0
//! -1.2345678901234567e0,4.0000000000000000e-1,...,0
//! ```
//!
//! One row per object: the feature values, then the integer class label.
//! Values carry 17 significant digits so a write/read cycle is exact.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::datagen::{Dataset, DatasetSpec};
use crate::linalg::Matrix;

pub const MAGIC: &str = "# clusterbench-dataset v1;";
pub const EXTENSION: &str = "csv";

/// Where and why a dataset file failed to parse. `column` is the 1-based
/// character position in the header, or the 1-based field in a data row.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("line {line}, column {column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

fn err(line: usize, column: usize, message: impl Into<String>) -> ParseError {
    ParseError {
        line,
        column,
        message: message.into(),
    }
}

pub fn format_dataset(ds: &Dataset) -> String {
    let s = ds.spec();
    let mut out = String::with_capacity(ds.len() * (ds.num_features() + 1) * 24);
    writeln!(
        out,
        "{MAGIC} C={};F={};Ne={};alpha={:?};seed={};realization={}",
        s.num_classes, s.num_features, s.objects_per_class, s.alpha, s.seed, s.realization_index
    )
    .unwrap();
    for (row, label) in ds.features().row_iter().zip(ds.labels()) {
        for v in row {
            write!(out, "{v:.16e},").unwrap();
        }
        writeln!(out, "{label}").unwrap();
    }
    out
}

fn parse_header(line: &str) -> Result<DatasetSpec, ParseError> {
    let rest = line
        .strip_prefix(MAGIC)
        .ok_or_else(|| err(1, 1, format!("expected header starting with `{MAGIC}`")))?;
    let mut fields = std::collections::BTreeMap::new();
    let mut offset = MAGIC.len();
    for part in rest.split(';') {
        let column = offset + 1 + (part.len() - part.trim_start().len());
        offset += part.len() + 1;
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| err(1, column, format!("expected key=value, got `{part}`")))?;
        fields.insert(key.trim().to_string(), (value.trim().to_string(), column));
    }
    let get = |key: &str| {
        fields
            .get(key)
            .ok_or_else(|| err(1, line.len() + 1, format!("header lacks `{key}`")))
    };
    fn number<T: std::str::FromStr>(key: &str, (v, col): &(String, usize)) -> Result<T, ParseError> {
        v.parse()
            .map_err(|_| err(1, *col, format!("`{key}` has invalid value `{v}`")))
    }
    let spec = DatasetSpec {
        num_classes: number("C", get("C")?)?,
        num_features: number("F", get("F")?)?,
        objects_per_class: number("Ne", get("Ne")?)?,
        alpha: number("alpha", get("alpha")?)?,
        seed: number("seed", get("seed")?)?,
        realization_index: number("realization", get("realization")?)?,
    };
    spec.validate().map_err(|e| err(1, 1, e.to_string()))?;
    Ok(spec)
}

/// Parses a whole file; never returns a partially filled dataset.
pub fn parse_dataset(text: &str) -> Result<Dataset, ParseError> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| err(1, 1, "empty file"))?;
    let spec = parse_header(header)?;
    let n = spec.num_objects();
    let f = spec.num_features;
    let mut values = Vec::with_capacity(n * f);
    let mut labels = Vec::with_capacity(n);
    let mut rows = 0;
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        if rows == n {
            return Err(err(line_no, 1, format!("more than the {n} rows declared in the header")));
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != f + 1 {
            return Err(err(
                line_no,
                fields.len().min(f + 1),
                format!("expected {} fields, found {}", f + 1, fields.len()),
            ));
        }
        for (c, field) in fields[..f].iter().enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| err(line_no, c + 1, format!("`{field}` is not a number")))?;
            if !v.is_finite() {
                return Err(err(line_no, c + 1, format!("non-finite value `{field}`")));
            }
            values.push(v);
        }
        let raw = fields[f].trim();
        let label: usize = raw
            .parse()
            .map_err(|_| err(line_no, f + 1, format!("`{raw}` is not a class label")))?;
        if label >= spec.num_classes {
            return Err(err(
                line_no,
                f + 1,
                format!("label {label} outside [0, {})", spec.num_classes),
            ));
        }
        labels.push(label);
        rows += 1;
    }
    if rows < n {
        return Err(err(
            rows + 2,
            1,
            format!("file ends after {rows} of {n} rows"),
        ));
    }
    let features = Matrix::from_vec(n, f, values).map_err(|e| err(1, 1, e.to_string()))?;
    Dataset::new(features, labels, spec).map_err(|e| err(1, 1, e.to_string()))
}

#[derive(Debug, Error)]
pub enum DatasetIoError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Parse { path: PathBuf, source: ParseError },
}

pub fn file_name(ds: &Dataset) -> String {
    format!("{}.{EXTENSION}", ds.id())
}

pub fn write_dataset(path: &Path, ds: &Dataset) -> Result<(), DatasetIoError> {
    fs::write(path, format_dataset(ds)).map_err(|source| DatasetIoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_dataset(path: &Path) -> Result<Dataset, DatasetIoError> {
    let text = fs::read_to_string(path).map_err(|source| DatasetIoError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_dataset(&text).map_err(|source| DatasetIoError::Parse {
        path: path.to_path_buf(),
        source,
    })
}

/// Every dataset file in `dir`, ordered by file name. A missing directory
/// reads as empty.
pub fn load_corpus(dir: &Path) -> Result<Vec<Dataset>, DatasetIoError> {
    let entries = match fs::read_dir(dir) {
        Ok(e) => e,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(source) => {
            return Err(DatasetIoError::Io {
                path: dir.to_path_buf(),
                source,
            })
        }
    };
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry
            .map_err(|source| DatasetIoError::Io {
                path: dir.to_path_buf(),
                source,
            })?
            .path();
        if path.extension().is_some_and(|e| e == EXTENSION) {
            paths.push(path);
        }
    }
    paths.sort();
    paths.iter().map(|p| load_dataset(p)).collect()
}
