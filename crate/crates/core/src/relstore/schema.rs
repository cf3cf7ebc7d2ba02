use serde::{Deserialize, Serialize};

use super::value::DataType;
use super::StoreError;

/// Checks `[A-Za-z_][A-Za-z0-9_]*`.
pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnDef {
    pub name: String,
    pub dtype: DataType,
    pub nullable: bool,
}

impl ColumnDef {
    pub fn new(name: &str, dtype: DataType) -> ColumnDef {
        ColumnDef {
            name: name.to_string(),
            dtype,
            nullable: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForeignKey {
    pub column: String,
    pub foreign_table: String,
    pub foreign_column: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableSchema {
    pub name: String,
    pub columns: Vec<ColumnDef>,
    pub primary_key: String,
    pub foreign_keys: Vec<ForeignKey>,
}

impl TableSchema {
    /// Validates identifiers, enum lists, column uniqueness and key columns.
    pub fn new(
        name: &str,
        columns: Vec<ColumnDef>,
        primary_key: &str,
        foreign_keys: Vec<ForeignKey>,
    ) -> Result<TableSchema, StoreError> {
        let schema = TableSchema {
            name: name.to_string(),
            columns,
            primary_key: primary_key.to_string(),
            foreign_keys,
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<(), StoreError> {
        let bad = |msg: String| StoreError::Schema {
            table: self.name.clone(),
            message: msg,
        };
        if !is_identifier(&self.name) {
            return Err(bad(format!("`{}` is not a valid table name", self.name)));
        }
        for (i, col) in self.columns.iter().enumerate() {
            if !is_identifier(&col.name) {
                return Err(bad(format!("`{}` is not a valid column name", col.name)));
            }
            if self.columns[..i]
                .iter()
                .any(|c| c.name.eq_ignore_ascii_case(&col.name))
            {
                return Err(bad(format!("duplicate column `{}`", col.name)));
            }
            if let DataType::Enum(values) = &col.dtype {
                if values.is_empty() {
                    return Err(bad(format!("enum column `{}` has no values", col.name)));
                }
                for (j, v) in values.iter().enumerate() {
                    if values[..j].contains(v) {
                        return Err(bad(format!("enum column `{}` repeats `{v}`", col.name)));
                    }
                }
            }
        }
        if self.column_index(&self.primary_key).is_none() {
            return Err(bad(format!("primary key `{}` is not a column", self.primary_key)));
        }
        for fk in &self.foreign_keys {
            if self.column_index(&fk.column).is_none() {
                return Err(bad(format!("foreign key column `{}` is not a column", fk.column)));
            }
        }
        Ok(())
    }

    /// Case-insensitive column lookup.
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns
            .iter()
            .position(|c| c.name.eq_ignore_ascii_case(name))
    }

    pub fn primary_key_index(&self) -> usize {
        self.column_index(&self.primary_key)
            .expect("validated primary key")
    }
}
