//! Typed in-memory tables, CSV persistence and immutable snapshots.

mod csvio;
pub mod gastros;
mod schema;
mod snapshot;
mod value;

use std::path::Path;

pub use csvio::{load_csv, read_csv, save_csv, write_csv};
pub use schema::{is_identifier, ColumnDef, ForeignKey, TableSchema};
pub use snapshot::{build_snapshot, load_dir, save_dir, Row, Snapshot, SnapshotStore, Table};
pub use value::{DataType, Date, DateParseError, ScalarType, Value};

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("table `{table}`: bad header: {message}")]
    Header { table: String, message: String },
    #[error("table `{table}` line {line} column `{column}`: {message}")]
    Parse {
        table: String,
        line: u64,
        column: String,
        message: String,
    },
    #[error("table `{table}`: invalid schema: {message}")]
    Schema { table: String, message: String },
    #[error("table `{table}` row {index}: {message}")]
    Row {
        table: String,
        index: usize,
        message: String,
    },
    #[error("table `{table}`: duplicate or null primary key {key}")]
    PrimaryKey { table: String, key: String },
    #[error("table `{table}` row {row_key}: {column}={value} has no matching primary key")]
    DanglingForeignKey {
        table: String,
        row_key: String,
        column: String,
        value: String,
    },
}

impl StoreError {
    fn io(path: &Path, e: std::io::Error) -> StoreError {
        StoreError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }

    fn with_path(self, path: &Path) -> StoreError {
        match self {
            StoreError::Io { path: p, message } if p.is_empty() => StoreError::Io {
                path: path.display().to_string(),
                message,
            },
            other => other,
        }
    }
}
