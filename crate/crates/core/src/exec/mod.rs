//! Query evaluation over a snapshot, and an independent brute-force oracle.

mod engine;
pub mod oracle;
pub mod scalar;

pub use engine::execute;
pub use oracle::oracle_execute;

use crate::mql::{Expr, QueryAst, SelectExpr};
use crate::relstore::{ScalarType, Snapshot, TableSchema, Value};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResultColumn {
    pub label: String,
    pub dtype: ScalarType,
}

/// Ordered columns and rows. `group_sizes` holds, per row, how many joined
/// tuples fed it; it is used for suppression and never serialized.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResultSet {
    pub columns: Vec<ResultColumn>,
    pub rows: Vec<Vec<Value>>,
    pub group_sizes: Vec<u64>,
}

impl ResultSet {
    pub fn labels(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.label.as_str()).collect()
    }

    /// Rows sorted into a canonical order, for multiset comparison.
    pub fn sorted_rows(&self) -> Vec<Vec<Value>> {
        let mut rows = self.rows.clone();
        rows.sort_by(|a, b| {
            a.iter()
                .zip(b)
                .map(|(x, y)| x.sort_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        rows
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExecError {
    #[error("table `{0}` is not in the snapshot")]
    UnknownTable(String),
    #[error("column `{table}.{column}` does not match the snapshot schema")]
    Schema { table: String, column: String },
    #[error("query still has placeholder `:{0}`")]
    Unbound(String),
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
}

/// Result column labels and types for `q` over `schemas` (one per FROM entry).
pub(crate) fn output_columns(q: &QueryAst, schemas: &[&TableSchema]) -> Vec<ResultColumn> {
    fn expr_type(e: &Expr, schemas: &[&TableSchema]) -> ScalarType {
        match e {
            Expr::Column(c) => schemas[c.source].columns[c.column].dtype.scalar(),
            Expr::AgeYears { .. } => ScalarType::Int,
            Expr::Bucket { .. } => ScalarType::Str,
        }
    }
    q.select
        .iter()
        .map(|item| ResultColumn {
            label: item.label(),
            dtype: match &item.expr {
                SelectExpr::Aggregate(_) => ScalarType::Int,
                SelectExpr::Expr(e) => expr_type(e, schemas),
            },
        })
        .collect()
}

/// Looks up FROM tables and checks every resolved column against the snapshot.
pub(crate) fn bind_tables<'s>(
    q: &QueryAst,
    s: &'s Snapshot,
) -> Result<Vec<&'s crate::relstore::Table>, ExecError> {
    if let Some(p) = q.params.first() {
        return Err(ExecError::Unbound(p.name.clone()));
    }
    let tables = q
        .from
        .iter()
        .map(|f| {
            s.table(&f.table)
                .ok_or_else(|| ExecError::UnknownTable(f.table.clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    for c in q.all_columns() {
        let ok = tables
            .get(c.source)
            .and_then(|t| t.schema.columns.get(c.column))
            .is_some_and(|def| def.name == c.name);
        if !ok {
            let table = q.from.get(c.source).map_or("?", |f| f.table.as_str());
            return Err(ExecError::Schema {
                table: table.to_string(),
                column: c.name.clone(),
            });
        }
    }
    Ok(tables)
}
