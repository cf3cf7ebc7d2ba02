use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use super::schema::TableSchema;
use super::snapshot::{Row, Table};
use super::value::Value;
use super::StoreError;

/// Loads one table from a CSV file whose header names exactly the schema's columns.
pub fn load_csv(path: &Path, schema: &TableSchema) -> Result<Vec<Row>, StoreError> {
    let file = File::open(path).map_err(|e| StoreError::io(path, e))?;
    read_csv(file, schema).map_err(|e| e.with_path(path))
}

pub fn read_csv<R: Read>(reader: R, schema: &TableSchema) -> Result<Vec<Row>, StoreError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut records = rdr.records();

    let header = match records.next() {
        Some(rec) => rec.map_err(|e| csv_error(schema, e))?,
        None => {
            return Err(StoreError::Header {
                table: schema.name.clone(),
                message: "file is empty; a header row is mandatory".into(),
            })
        }
    };
    let expected: Vec<&str> = schema.columns.iter().map(|c| c.name.as_str()).collect();
    let found: Vec<&str> = header.iter().collect();
    if found != expected {
        return Err(StoreError::Header {
            table: schema.name.clone(),
            message: format!("expected {expected:?}, found {found:?}"),
        });
    }

    let mut rows = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| csv_error(schema, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != schema.columns.len() {
            return Err(StoreError::Parse {
                table: schema.name.clone(),
                line,
                column: String::new(),
                message: format!("expected {} fields, found {}", schema.columns.len(), rec.len()),
            });
        }
        let mut row = Vec::with_capacity(rec.len());
        for (field, col) in rec.iter().zip(&schema.columns) {
            let value = if field.is_empty() && col.nullable {
                Value::Null
            } else {
                col.dtype.parse_text(field).map_err(|message| StoreError::Parse {
                    table: schema.name.clone(),
                    line,
                    column: col.name.clone(),
                    message,
                })?
            };
            row.push(value);
        }
        rows.push(row);
    }
    Ok(rows)
}

fn csv_error(schema: &TableSchema, e: csv::Error) -> StoreError {
    let line = e.position().map_or(0, |p| p.line());
    StoreError::Parse {
        table: schema.name.clone(),
        line,
        column: String::new(),
        message: e.to_string(),
    }
}

/// Writes header plus rows, quoting only where RFC 4180 requires it.
pub fn save_csv(table: &Table, path: &Path) -> Result<(), StoreError> {
    let file = File::create(path).map_err(|e| StoreError::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_csv(table, &mut out).map_err(|e| e.with_path(path))?;
    out.flush().map_err(|e| StoreError::io(path, e))
}

pub fn write_csv<W: Write>(table: &Table, writer: W) -> Result<(), StoreError> {
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .quote_style(csv::QuoteStyle::Necessary)
        .from_writer(writer);
    let to_err = |e: csv::Error| StoreError::Io {
        path: String::new(),
        message: e.to_string(),
    };
    wtr.write_record(table.schema.columns.iter().map(|c| c.name.as_str()))
        .map_err(to_err)?;
    for row in &table.rows {
        wtr.write_record(row.iter().map(Value::to_text)).map_err(to_err)?;
    }
    wtr.flush().map_err(|e| StoreError::Io {
        path: String::new(),
        message: e.to_string(),
    })
}
