use std::collections::{HashMap, HashSet};
use std::path::Path;
use std::sync::{Arc, RwLock};

use super::csvio;
use super::schema::TableSchema;
use super::value::Value;
use super::StoreError;

pub type Row = Vec<Value>;

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub schema: TableSchema,
    pub rows: Vec<Row>,
}

impl Table {
    pub fn name(&self) -> &str {
        &self.schema.name
    }
}

/// An immutable, integrity-checked set of tables.
#[derive(Debug)]
pub struct Snapshot {
    tables: Vec<Table>,
    by_name: HashMap<String, usize>,
    pk_index: Vec<HashMap<Value, usize>>,
    version: u64,
}

impl Snapshot {
    pub fn version(&self) -> u64 {
        self.version
    }

    /// Case-insensitive table lookup.
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.by_name
            .get(&name.to_ascii_lowercase())
            .map(|&i| &self.tables[i])
    }

    pub fn tables(&self) -> impl Iterator<Item = &Table> {
        self.tables.iter()
    }

    pub fn schemas(&self) -> Vec<TableSchema> {
        self.tables.iter().map(|t| t.schema.clone()).collect()
    }

    /// Primary-key lookup: row position of `key` in table `name`.
    pub fn row_by_key(&self, name: &str, key: &Value) -> Option<&Row> {
        let i = *self.by_name.get(&name.to_ascii_lowercase())?;
        self.pk_index[i].get(key).map(|&r| &self.tables[i].rows[r])
    }
}

/// Builds a snapshot with version 1.
pub fn build_snapshot(tables: Vec<(TableSchema, Vec<Row>)>) -> Result<Snapshot, StoreError> {
    build_versioned(tables, 1)
}

fn build_versioned(tables: Vec<(TableSchema, Vec<Row>)>, version: u64) -> Result<Snapshot, StoreError> {
    let mut by_name = HashMap::new();
    let mut built = Vec::with_capacity(tables.len());
    let mut pk_index = Vec::with_capacity(tables.len());

    for (i, (schema, rows)) in tables.into_iter().enumerate() {
        schema.validate()?;
        if by_name.insert(schema.name.to_ascii_lowercase(), i).is_some() {
            return Err(StoreError::Schema {
                table: schema.name.clone(),
                message: "table defined twice".into(),
            });
        }
        let pk = schema.primary_key_index();
        let mut index = HashMap::with_capacity(rows.len());
        for (r, row) in rows.iter().enumerate() {
            check_row(&schema, r, row)?;
            if row[pk].is_null() || index.insert(row[pk].clone(), r).is_some() {
                return Err(StoreError::PrimaryKey {
                    table: schema.name.clone(),
                    key: row[pk].to_string(),
                });
            }
        }
        pk_index.push(index);
        built.push(Table { schema, rows });
    }

    for table in &built {
        for fk in &table.schema.foreign_keys {
            let target = *by_name
                .get(&fk.foreign_table.to_ascii_lowercase())
                .ok_or_else(|| StoreError::Schema {
                    table: table.name().to_string(),
                    message: format!("foreign key references missing table `{}`", fk.foreign_table),
                })?;
            let target_schema = &built[target].schema;
            if !target_schema.primary_key.eq_ignore_ascii_case(&fk.foreign_column) {
                return Err(StoreError::Schema {
                    table: table.name().to_string(),
                    message: format!(
                        "foreign key must reference the primary key of `{}`",
                        fk.foreign_table
                    ),
                });
            }
            let col = table.schema.column_index(&fk.column).expect("validated");
            let pk = table.schema.primary_key_index();
            for row in &table.rows {
                let v = &row[col];
                if !v.is_null() && !pk_index[target].contains_key(v) {
                    return Err(StoreError::DanglingForeignKey {
                        table: table.name().to_string(),
                        row_key: row[pk].to_string(),
                        column: fk.column.clone(),
                        value: v.to_string(),
                    });
                }
            }
        }
    }

    Ok(Snapshot {
        tables: built,
        by_name,
        pk_index,
        version,
    })
}

fn check_row(schema: &TableSchema, index: usize, row: &Row) -> Result<(), StoreError> {
    let bad = |message: String| StoreError::Row {
        table: schema.name.clone(),
        index,
        message,
    };
    if row.len() != schema.columns.len() {
        return Err(bad(format!(
            "expected {} values, found {}",
            schema.columns.len(),
            row.len()
        )));
    }
    for (v, col) in row.iter().zip(&schema.columns) {
        let ok = if v.is_null() {
            col.nullable
        } else {
            col.dtype.admits(v)
        };
        if !ok {
            return Err(bad(format!("value {v} does not fit column `{}`", col.name)));
        }
    }
    Ok(())
}

/// Loads `<table>.csv` for each schema from `dir`.
pub fn load_dir(dir: &Path, schemas: &[TableSchema]) -> Result<Vec<(TableSchema, Vec<Row>)>, StoreError> {
    if !dir.is_dir() {
        return Err(StoreError::Io {
            path: dir.display().to_string(),
            message: "data directory does not exist".into(),
        });
    }
    schemas
        .iter()
        .map(|s| {
            let path = dir.join(format!("{}.csv", s.name));
            csvio::load_csv(&path, s).map(|rows| (s.clone(), rows))
        })
        .collect()
}

/// Writes every table of the set to `<dir>/<table>.csv`.
pub fn save_dir(dir: &Path, tables: &[Table]) -> Result<(), StoreError> {
    std::fs::create_dir_all(dir).map_err(|e| StoreError::io(dir, e))?;
    let mut seen = HashSet::new();
    for t in tables {
        if !seen.insert(t.name().to_ascii_lowercase()) {
            return Err(StoreError::Schema {
                table: t.name().to_string(),
                message: "table defined twice".into(),
            });
        }
        csvio::save_csv(t, &dir.join(format!("{}.csv", t.name())))?;
    }
    Ok(())
}

/// Holds the currently published snapshot; publication is an atomic pointer swap.
#[derive(Debug)]
pub struct SnapshotStore {
    current: RwLock<Arc<Snapshot>>,
}

impl SnapshotStore {
    pub fn new(initial: Snapshot) -> SnapshotStore {
        SnapshotStore {
            current: RwLock::new(Arc::new(initial)),
        }
    }

    pub fn current(&self) -> Arc<Snapshot> {
        self.current.read().expect("snapshot lock").clone()
    }

    /// Builds and publishes a new snapshot one version past the current one.
    /// Readers holding the previous snapshot keep it unchanged.
    pub fn publish(&self, tables: Vec<(TableSchema, Vec<Row>)>) -> Result<Arc<Snapshot>, StoreError> {
        let mut slot = self.current.write().expect("snapshot lock");
        let next = Arc::new(build_versioned(tables, slot.version + 1)?);
        *slot = next.clone();
        Ok(next)
    }
}
