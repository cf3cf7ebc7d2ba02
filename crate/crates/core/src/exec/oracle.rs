//! Brute-force reference evaluator used to check the engine.
//!
//! It walks the FROM list with nested loops, grouping through a plain
//! dictionary and sorting with an insertion sort. It deliberately shares no
//! evaluation code with the engine: comparisons, `AGE_YEARS` and `BUCKET`
//! are reimplemented here.
//!
//! A WHERE conjunct is checked as soon as every table it mentions is bound.
//! This prunes the loops without changing which tuples survive, and keeps the
//! four-way self join of the full dataset tractable.

use std::cmp::Ordering;
use std::collections::HashMap;

use super::{bind_tables, output_columns, ExecError, ResultSet};
use crate::mql::{Aggregate, BoolExpr, BoundQuery, CompareOp, Expr, Operand, SelectExpr};
use crate::relstore::{Row, Snapshot, Value};

fn cmp_values(a: &Value, b: &Value) -> Result<Option<Ordering>, ExecError> {
    Ok(match (a, b) {
        (Value::Null, _) | (_, Value::Null) => None,
        (Value::Int(x), Value::Int(y)) => Some(x.cmp(y)),
        (Value::Str(x), Value::Str(y)) => Some(x.as_bytes().cmp(y.as_bytes())),
        (Value::Bool(x), Value::Bool(y)) => Some(x.cmp(y)),
        (Value::Date(x), Value::Date(y)) => {
            Some((x.year(), x.month(), x.day()).cmp(&(y.year(), y.month(), y.day())))
        }
        _ => return Err(ExecError::TypeMismatch(format!("{a} vs {b}"))),
    })
}

fn get<'r>(bound: &[&'r Row], source: usize, column: usize) -> &'r Value {
    &bound[source][column]
}

fn operand_value<'r>(bound: &[&'r Row], o: &'r Operand) -> Result<&'r Value, ExecError> {
    match o {
        Operand::Literal(v) => Ok(v),
        Operand::Column(c) => Ok(get(bound, c.source, c.column)),
        Operand::Param(p) => Err(ExecError::Unbound(p.clone())),
    }
}

fn holds(bound: &[&Row], e: &BoolExpr) -> Result<bool, ExecError> {
    match e {
        BoolExpr::Compare { lhs, op, rhs } => {
            let l = get(bound, lhs.source, lhs.column);
            let r = operand_value(bound, rhs)?;
            let Some(ord) = cmp_values(l, r)? else {
                return Ok(false);
            };
            Ok(match op {
                CompareOp::Eq => ord == Ordering::Equal,
                CompareOp::Ne => ord != Ordering::Equal,
                CompareOp::Lt => ord == Ordering::Less,
                CompareOp::Le => ord != Ordering::Greater,
                CompareOp::Gt => ord == Ordering::Greater,
                CompareOp::Ge => ord != Ordering::Less,
            })
        }
        BoolExpr::Between { column, low, high } => {
            let v = get(bound, column.source, column.column);
            let lo = cmp_values(v, operand_value(bound, low)?)?;
            let hi = cmp_values(v, operand_value(bound, high)?)?;
            Ok(matches!(lo, Some(Ordering::Greater | Ordering::Equal))
                && matches!(hi, Some(Ordering::Less | Ordering::Equal)))
        }
        BoolExpr::And(a, b) => Ok(holds(bound, a)? && holds(bound, b)?),
        BoolExpr::Or(a, b) => Ok(holds(bound, a)? || holds(bound, b)?),
        BoolExpr::Paren(inner) => holds(bound, inner),
    }
}

fn value_of(bound: &[&Row], e: &Expr) -> Result<Value, ExecError> {
    match e {
        Expr::Column(c) => Ok(get(bound, c.source, c.column).clone()),
        Expr::AgeYears { dob, reference } => {
            match (
                get(bound, dob.source, dob.column),
                operand_value(bound, reference)?,
            ) {
                (Value::Date(b), Value::Date(r)) => {
                    let mut years = r.year() as i64 - b.year() as i64;
                    if r.month() < b.month() || (r.month() == b.month() && r.day() < b.day()) {
                        years -= 1;
                    }
                    Ok(Value::Int(years))
                }
                (Value::Null, _) | (_, Value::Null) => Ok(Value::Null),
                _ => Err(ExecError::TypeMismatch("AGE_YEARS".into())),
            }
        }
        Expr::Bucket { input, bounds } => match value_of(bound, input)? {
            Value::Int(x) => {
                let mut label = format!("{}+", bounds[bounds.len() - 1]);
                for (i, b) in bounds.iter().enumerate().rev() {
                    if x < *b {
                        label = if i == 0 {
                            format!("<{b}")
                        } else {
                            format!("{}-{}", bounds[i - 1], b - 1)
                        };
                    }
                }
                Ok(Value::Str(label))
            }
            Value::Null => Ok(Value::Null),
            _ => Err(ExecError::TypeMismatch("BUCKET".into())),
        },
    }
}

struct Walk<'a> {
    tables: Vec<&'a [Row]>,
    /// Conjuncts to check once the table at each depth is bound.
    checks: Vec<Vec<&'a BoolExpr>>,
    out: Vec<Vec<&'a Row>>,
}

impl<'a> Walk<'a> {
    fn run(&mut self, bound: &mut Vec<&'a Row>) -> Result<(), ExecError> {
        let depth = bound.len();
        if depth == self.tables.len() {
            self.out.push(bound.clone());
            return Ok(());
        }
        for row in self.tables[depth] {
            bound.push(row);
            let mut pass = true;
            for c in &self.checks[depth] {
                if !holds(bound, c)? {
                    pass = false;
                    break;
                }
            }
            if pass {
                self.run(bound)?;
            }
            bound.pop();
        }
        Ok(())
    }
}

pub fn oracle_execute(q: &BoundQuery, s: &Snapshot) -> Result<ResultSet, ExecError> {
    let ast = &q.ast;
    let tables = bind_tables(ast, s)?;
    let schemas: Vec<_> = tables.iter().map(|t| &t.schema).collect();
    let columns = output_columns(ast, &schemas);

    let mut checks: Vec<Vec<&BoolExpr>> = vec![Vec::new(); tables.len()];
    if let Some(w) = &ast.where_clause {
        for c in w.conjuncts() {
            let mut last = 0;
            c.visit_columns(&mut |col| last = last.max(col.source));
            checks[last].push(c);
        }
    }
    let mut walk = Walk {
        tables: tables.iter().map(|t| t.rows.as_slice()).collect(),
        checks,
        out: Vec::new(),
    };
    walk.run(&mut Vec::new())?;
    let tuples = walk.out;

    let mut rows: Vec<(Vec<Value>, u64)> = Vec::new();
    if ast.has_aggregate() || !ast.group_by.is_empty() {
        let mut keys: Vec<Vec<Value>> = Vec::new();
        let mut members: HashMap<Vec<Value>, Vec<usize>> = HashMap::new();
        for (i, t) in tuples.iter().enumerate() {
            let mut key = Vec::new();
            for g in &ast.group_by {
                key.push(value_of(t, g)?);
            }
            if !members.contains_key(&key) {
                keys.push(key.clone());
            }
            members.entry(key).or_default().push(i);
        }
        if keys.is_empty() && ast.group_by.is_empty() {
            keys.push(Vec::new());
            members.insert(Vec::new(), Vec::new());
        }
        for key in keys {
            let group = &members[&key];
            let mut row = Vec::new();
            for item in &ast.select {
                let v = match &item.expr {
                    SelectExpr::Aggregate(Aggregate::CountStar) => Value::Int(group.len() as i64),
                    SelectExpr::Aggregate(Aggregate::Count(c)) => Value::Int(
                        group
                            .iter()
                            .filter(|&&i| !get(&tuples[i], c.source, c.column).is_null())
                            .count() as i64,
                    ),
                    SelectExpr::Aggregate(Aggregate::CountDistinct(c)) => {
                        let mut seen: Vec<&Value> = Vec::new();
                        for &i in group {
                            let v = get(&tuples[i], c.source, c.column);
                            if !v.is_null() && !seen.contains(&v) {
                                seen.push(v);
                            }
                        }
                        Value::Int(seen.len() as i64)
                    }
                    SelectExpr::Expr(e) => match group.first() {
                        Some(&i) => value_of(&tuples[i], e)?,
                        None => Value::Null,
                    },
                };
                row.push(v);
            }
            rows.push((row, group.len() as u64));
        }
    } else {
        for t in &tuples {
            let mut row = Vec::new();
            for item in &ast.select {
                match &item.expr {
                    SelectExpr::Expr(e) => row.push(value_of(t, e)?),
                    SelectExpr::Aggregate(_) => unreachable!("no aggregates here"),
                }
            }
            rows.push((row, 1));
        }
    }

    // Stable insertion sort: an element moves left only past strictly greater ones.
    let before = |a: &[Value], b: &[Value]| -> bool {
        for o in &ast.order_by {
            let ord = order_cmp(&a[o.output], &b[o.output]);
            let ord = if o.descending { ord.reverse() } else { ord };
            if ord != Ordering::Equal {
                return ord == Ordering::Less;
            }
        }
        false
    };
    for i in 1..rows.len() {
        let mut j = i;
        while j > 0 && before(&rows[j].0, &rows[j - 1].0) {
            rows.swap(j, j - 1);
            j -= 1;
        }
    }
    if let Some(n) = ast.limit {
        rows.truncate(n as usize);
    }
    Ok(ResultSet {
        columns,
        rows: rows.iter().map(|(r, _)| r.clone()).collect(),
        group_sizes: rows.iter().map(|(_, n)| *n).collect(),
    })
}

/// Null first, then by value.
fn order_cmp(a: &Value, b: &Value) -> Ordering {
    match (a, b) {
        (Value::Null, Value::Null) => Ordering::Equal,
        (Value::Null, _) => Ordering::Less,
        (_, Value::Null) => Ordering::Greater,
        _ => cmp_values(a, b).ok().flatten().unwrap_or(Ordering::Equal),
    }
}
