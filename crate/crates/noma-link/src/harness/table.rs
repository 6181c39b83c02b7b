//! Typed result tables and their CSV rendering.
//!
//! CSV layout: `#`-prefixed metadata lines, a header row with the schema
//! names, then one line per data row. Floats carry 12 significant digits,
//! so identical tables render to identical bytes.

use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

use crate::stats::format_sig12;

#[derive(Debug, Error)]
pub enum TableError {
    #[error("row has {got} values, schema has {expected}")]
    RowArity { expected: usize, got: usize },
    #[error("value for column `{column}` does not match its declared kind")]
    KindMismatch { column: &'static str },
    #[error("text value `{0}` may not contain commas or line breaks")]
    InvalidText(String),
    #[error("writing {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnKind {
    Float,
    Int,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Column {
    pub name: &'static str,
    pub kind: ColumnKind,
}

impl Column {
    pub const fn float(name: &'static str) -> Self {
        Self {
            name,
            kind: ColumnKind::Float,
        }
    }

    pub const fn int(name: &'static str) -> Self {
        Self {
            name,
            kind: ColumnKind::Int,
        }
    }

    pub const fn text(name: &'static str) -> Self {
        Self {
            name,
            kind: ColumnKind::Text,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Float(f64),
    Int(i64),
    Text(String),
}

/// Schema-checked rows plus free-form metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    schema: Vec<Column>,
    rows: Vec<Vec<Value>>,
    metadata: Vec<(String, String)>,
}

impl ResultTable {
    pub fn new(schema: Vec<Column>) -> Self {
        Self {
            schema,
            rows: Vec::new(),
            metadata: Vec::new(),
        }
    }

    pub fn schema(&self) -> &[Column] {
        &self.schema
    }

    pub fn rows(&self) -> &[Vec<Value>] {
        &self.rows
    }

    pub fn metadata(&self) -> &[(String, String)] {
        &self.metadata
    }

    pub fn push_meta(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.metadata.push((key.into(), value.into()));
    }

    pub fn push_row(&mut self, row: Vec<Value>) -> Result<(), TableError> {
        if row.len() != self.schema.len() {
            return Err(TableError::RowArity {
                expected: self.schema.len(),
                got: row.len(),
            });
        }
        for (value, column) in row.iter().zip(&self.schema) {
            let ok = matches!(
                (value, column.kind),
                (Value::Float(_), ColumnKind::Float)
                    | (Value::Int(_), ColumnKind::Int)
                    | (Value::Text(_), ColumnKind::Text)
            );
            if !ok {
                return Err(TableError::KindMismatch {
                    column: column.name,
                });
            }
            if let Value::Text(t) = value {
                if t.contains(',') || t.contains('\n') || t.contains('\r') {
                    return Err(TableError::InvalidText(t.clone()));
                }
            }
        }
        self.rows.push(row);
        Ok(())
    }

    /// Column index by name, for readers of the in-memory table.
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.schema.iter().position(|c| c.name == name)
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.metadata {
            out.push_str(&format!("# {k} = {v}\n"));
        }
        let header: Vec<&str> = self.schema.iter().map(|c| c.name).collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for row in &self.rows {
            let rendered: Vec<String> = row
                .iter()
                .map(|v| match v {
                    Value::Float(f) => format_sig12(*f),
                    Value::Int(i) => i.to_string(),
                    Value::Text(t) => t.clone(),
                })
                .collect();
            out.push_str(&rendered.join(","));
            out.push('\n');
        }
        out
    }

    /// Write the CSV and report the number of bytes written.
    pub fn write_csv(&self, destination: &Path) -> Result<u64, TableError> {
        let bytes = self.to_csv_string().into_bytes();
        fs::write(destination, &bytes).map_err(|source| TableError::Io {
            path: destination.display().to_string(),
            source,
        })?;
        Ok(bytes.len() as u64)
    }
}
