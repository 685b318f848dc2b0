//! CSV/JSON ingestion and atomic artifact writes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::mechanisms::{Dataset, DbTable, MechanismError};
use crate::query::AttributeSchema;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: row {row}, column `{column}`: {message}")]
    Field {
        path: PathBuf,
        row: usize,
        column: String,
        message: String,
    },
    #[error("{path}: missing column `{column}`")]
    MissingColumn { path: PathBuf, column: String },
    #[error("{path}: {source}")]
    Invalid {
        path: PathBuf,
        #[source]
        source: MechanismError,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> IoError + '_ {
    move |source| IoError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

struct Sheet {
    headers: Vec<String>,
    records: Vec<csv::StringRecord>,
}

fn read_sheet(path: &Path) -> Result<Sheet, IoError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err(path))?;
    let headers = reader
        .headers()
        .map_err(csv_err(path))?
        .iter()
        .map(str::to_string)
        .collect();
    let records = reader
        .records()
        .collect::<Result<Vec<_>, _>>()
        .map_err(csv_err(path))?;
    Ok(Sheet { headers, records })
}

impl Sheet {
    fn column(&self, path: &Path, name: &str) -> Result<usize, IoError> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| IoError::MissingColumn {
                path: path.to_path_buf(),
                column: name.to_string(),
            })
    }

    fn field<V: std::str::FromStr>(&self, path: &Path, row: usize, col: usize) -> Result<V, IoError>
    where
        V::Err: std::fmt::Display,
    {
        let text = self.records[row].get(col).unwrap_or("");
        text.parse().map_err(|e: V::Err| IoError::Field {
            path: path.to_path_buf(),
            row: row + 1,
            column: self.headers[col].clone(),
            message: format!("`{text}`: {e}"),
        })
    }
}

/// Reads a headered CSV of numeric features. `label_column`, when given,
/// holds non-negative integer class labels and is excluded from the features.
pub fn read_dataset(path: &Path, label_column: Option<&str>) -> Result<Dataset<f64>, IoError> {
    let sheet = read_sheet(path)?;
    let label_idx = label_column
        .map(|name| sheet.column(path, name))
        .transpose()?;
    let feature_cols: Vec<usize> = (0..sheet.headers.len())
        .filter(|&c| Some(c) != label_idx)
        .collect();

    let mut rows = Vec::with_capacity(sheet.records.len());
    let mut labels = label_idx.map(|_| Vec::with_capacity(sheet.records.len()));
    for r in 0..sheet.records.len() {
        let row = feature_cols
            .iter()
            .map(|&c| sheet.field::<f64>(path, r, c))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
        if let (Some(c), Some(l)) = (label_idx, labels.as_mut()) {
            l.push(sheet.field::<usize>(path, r, c)?);
        }
    }
    Dataset::new(rows, labels).map_err(|source| IoError::Invalid {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads the schema's columns, by header name, from a CSV. Other columns
/// are ignored.
pub fn read_table(path: &Path, schema: &AttributeSchema) -> Result<DbTable<f64>, IoError> {
    let sheet = read_sheet(path)?;
    let cols = schema
        .attributes()
        .iter()
        .map(|a| sheet.column(path, &a.name))
        .collect::<Result<Vec<_>, _>>()?;
    let mut rows = Vec::with_capacity(sheet.records.len());
    for r in 0..sheet.records.len() {
        rows.push(
            cols.iter()
                .map(|&c| sheet.field::<f64>(path, r, c))
                .collect::<Result<Vec<_>, _>>()?,
        );
    }
    DbTable::new(schema.clone(), rows).map_err(|source| IoError::Invalid {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_json<V: serde::de::DeserializeOwned>(path: &Path) -> Result<V, IoError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| IoError::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_schema(path: &Path) -> Result<AttributeSchema, IoError> {
    read_json(path)
}

/// Seed file: a JSON array of floats.
pub fn read_seed(path: &Path) -> Result<Vec<f64>, IoError> {
    read_json(path)
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>, IoError> {
    fs::read(path).map_err(io_err(path))
}

/// Writes through a sibling temporary file and renames it into place,
/// creating the parent directory if needed.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let write = || -> std::io::Result<()> {
        fs::create_dir_all(&dir)?;
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    };
    write().map_err(|source| {
        let _ = fs::remove_file(&tmp);
        IoError::Io {
            path: path.to_path_buf(),
            source,
        }
    })
}
