//! Name resolution and typing: binds column references to FROM entries,
//! coerces literals to the column types they meet, and types placeholders.

use super::ast::*;
use super::ParseError;
use crate::relstore::{DataType, ScalarType, TableSchema, Value};

fn err<T>(msg: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError::Resolve(msg.into()))
}

/// Converts a raw literal to a value of `dtype`.
pub(crate) fn coerce(value: &Value, dtype: &DataType) -> Result<Value, String> {
    match (value, dtype) {
        (Value::Str(s), _) if dtype.scalar() != ScalarType::Int && dtype.scalar() != ScalarType::Bool => {
            dtype.parse_text(s)
        }
        (Value::Int(_), DataType::Int) | (Value::Bool(_), DataType::Bool) => Ok(value.clone()),
        _ => Err(format!(
            "literal {value} cannot be compared with a {} column",
            dtype.scalar()
        )),
    }
}

const MAX_TABLES: usize = 16;

struct Resolver<'a> {
    tables: Vec<&'a TableSchema>,
    from: &'a [FromTable],
    params: Vec<ParamSlot>,
}

pub(crate) fn resolve(mut q: QueryAst, schemas: &[TableSchema]) -> Result<QueryAst, ParseError> {
    if q.from.len() > MAX_TABLES {
        return err(format!("at most {MAX_TABLES} tables may appear in FROM"));
    }
    let mut tables = Vec::with_capacity(q.from.len());
    for f in &mut q.from {
        let Some(schema) = schemas.iter().find(|s| s.name.eq_ignore_ascii_case(&f.table)) else {
            return err(format!("unknown table `{}`", f.table));
        };
        f.table = schema.name.clone();
        tables.push(schema);
    }
    for (i, f) in q.from.iter().enumerate() {
        if q.from[..i]
            .iter()
            .any(|g| g.binding().eq_ignore_ascii_case(f.binding()))
        {
            return err(format!(
                "table name or alias `{}` used twice in FROM",
                f.binding()
            ));
        }
    }
    for (i, item) in q.select.iter().enumerate() {
        if let Some(a) = &item.alias {
            if q.select[..i]
                .iter()
                .any(|o| o.alias.as_ref().is_some_and(|b| b.eq_ignore_ascii_case(a)))
            {
                return err(format!("select alias `{a}` used twice"));
            }
        }
    }

    let from = q.from.clone();
    let mut r = Resolver {
        tables,
        from: &from,
        params: Vec::new(),
    };

    for item in &mut q.select {
        match &mut item.expr {
            SelectExpr::Expr(e) => {
                r.expr(e)?;
            }
            SelectExpr::Aggregate(Aggregate::Count(c) | Aggregate::CountDistinct(c)) => {
                r.column(c)?;
            }
            SelectExpr::Aggregate(Aggregate::CountStar) => {}
        }
    }

    if let Some(w) = &mut q.where_clause {
        r.bool_expr(w)?;
    }

    for g in &mut q.group_by {
        if let Expr::Column(c) = g {
            if c.qualifier.is_none() && r.lookup_unqualified(&c.name).is_none() {
                let aliased = q
                    .select
                    .iter()
                    .find(|s| s.alias.as_ref().is_some_and(|a| a.eq_ignore_ascii_case(&c.name)));
                match aliased.map(|s| &s.expr) {
                    Some(SelectExpr::Expr(e)) => {
                        *g = e.clone();
                        continue;
                    }
                    Some(SelectExpr::Aggregate(_)) => {
                        return err(format!("cannot group by aggregate `{}`", c.name))
                    }
                    None => {}
                }
            }
        }
        r.expr(g)?;
    }

    for o in &mut q.order_by {
        let OrderKey::Column(c) = &mut o.key else {
            unreachable!("parser emits column keys")
        };
        if c.qualifier.is_none() {
            if let Some(idx) = q
                .select
                .iter()
                .position(|s| s.alias.as_ref().is_some_and(|a| a.eq_ignore_ascii_case(&c.name)))
            {
                o.key = OrderKey::Alias(c.name.clone());
                o.output = idx;
                continue;
            }
        }
        r.column(c)?;
        let found = q
            .select
            .iter()
            .position(|s| matches!(&s.expr, SelectExpr::Expr(Expr::Column(sc)) if sc.same_column(c)));
        match found {
            Some(idx) => o.output = idx,
            None => {
                return err(format!(
                    "ORDER BY `{}` must name a selected column or alias",
                    c.name
                ))
            }
        }
    }

    q.params = r.params;
    Ok(q)
}

impl Resolver<'_> {
    fn lookup_unqualified(&self, name: &str) -> Option<usize> {
        self.tables.iter().position(|t| t.column_index(name).is_some())
    }

    fn column(&mut self, c: &mut ColumnRef) -> Result<DataType, ParseError> {
        let source = match &c.qualifier {
            Some(q) => match self.from.iter().position(|f| f.binding().eq_ignore_ascii_case(q)) {
                Some(i) => i,
                None => return err(format!("unknown table or alias `{q}`")),
            },
            None => {
                let hits: Vec<usize> = (0..self.tables.len())
                    .filter(|&i| self.tables[i].column_index(&c.name).is_some())
                    .collect();
                match hits.as_slice() {
                    [i] => *i,
                    [] => return err(format!("unknown column `{}`", c.name)),
                    _ => return err(format!("column `{}` is ambiguous; qualify it", c.name)),
                }
            }
        };
        let schema = self.tables[source];
        let Some(column) = schema.column_index(&c.name) else {
            return err(format!(
                "unknown column `{}` in `{}`",
                c.name,
                self.from[source].binding()
            ));
        };
        c.source = source;
        c.column = column;
        c.name = schema.columns[column].name.clone();
        Ok(schema.columns[column].dtype.clone())
    }

    fn slot(&mut self, name: &str, dtype: &DataType) -> Result<(), ParseError> {
        match self.params.iter().find(|p| p.name == name) {
            Some(p) if p.dtype != *dtype => err(format!(
                "parameter `:{name}` used as both {} and {}",
                p.dtype.scalar(),
                dtype.scalar()
            )),
            Some(_) => Ok(()),
            None => {
                self.params.push(ParamSlot {
                    name: name.to_string(),
                    dtype: dtype.clone(),
                });
                Ok(())
            }
        }
    }

    /// Resolves a value operand against the type it must take.
    fn operand(&mut self, o: &mut Operand, dtype: &DataType) -> Result<(), ParseError> {
        match o {
            Operand::Literal(v) => {
                *v = coerce(v, dtype).map_err(ParseError::Resolve)?;
                Ok(())
            }
            Operand::Param(name) => {
                let name = name.clone();
                self.slot(&name, dtype)
            }
            Operand::Column(c) => {
                let other = self.column(c)?;
                if other.scalar() != dtype.scalar() {
                    return err(format!(
                        "cannot compare {} column with {} column `{}`",
                        dtype.scalar(),
                        other.scalar(),
                        c.name
                    ));
                }
                Ok(())
            }
        }
    }

    fn expr(&mut self, e: &mut Expr) -> Result<DataType, ParseError> {
        match e {
            Expr::Column(c) => self.column(c),
            Expr::AgeYears { dob, reference } => {
                if self.column(dob)? != DataType::Date {
                    return err(format!("AGE_YEARS needs a date column, `{}` is not", dob.name));
                }
                if let Operand::Column(_) = reference {
                    return err("AGE_YEARS reference must be a date literal or parameter");
                }
                self.operand(reference, &DataType::Date)?;
                Ok(DataType::Int)
            }
            Expr::Bucket { input, bounds } => {
                if !bounds.windows(2).all(|w| w[0] < w[1]) {
                    return err("BUCKET boundaries must be strictly increasing");
                }
                if self.expr(input)?.scalar() != ScalarType::Int {
                    return err("BUCKET input must be an integer expression");
                }
                Ok(DataType::Str)
            }
        }
    }

    fn bool_expr(&mut self, b: &mut BoolExpr) -> Result<(), ParseError> {
        match b {
            BoolExpr::Compare { lhs, rhs, .. } => {
                let dtype = self.column(lhs)?;
                self.operand(rhs, &dtype)
            }
            BoolExpr::Between { column, low, high } => {
                let dtype = self.column(column)?;
                if dtype.scalar() == ScalarType::Bool {
                    return err(format!("BETWEEN over boolean column `{}`", column.name));
                }
                self.operand(low, &dtype)?;
                self.operand(high, &dtype)?;
                if let (Operand::Literal(lo), Operand::Literal(hi)) = (&*low, &*high) {
                    if lo.try_cmp(hi) == Some(std::cmp::Ordering::Greater) {
                        return err(format!("BETWEEN bounds out of order: {lo} > {hi}"));
                    }
                }
                Ok(())
            }
            BoolExpr::And(a, c) | BoolExpr::Or(a, c) => {
                self.bool_expr(a)?;
                self.bool_expr(c)
            }
            BoolExpr::Paren(inner) => self.bool_expr(inner),
        }
    }
}
