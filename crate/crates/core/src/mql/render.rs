//! Canonical query text: uppercase keywords, single spaces, padded dates.

use super::ast::*;
use crate::relstore::Value;

/// How literal and placeholder positions are printed.
#[derive(Clone, Copy)]
enum Mode {
    Text,
    /// Every value position becomes `?`, leaving only structure.
    Shape,
}

pub fn render(q: &QueryAst) -> String {
    write_query(q, Mode::Text)
}

/// The query's structure with every value position masked. Binding parameters
/// never changes this string.
pub fn shape(q: &QueryAst) -> String {
    write_query(q, Mode::Shape)
}

pub(crate) fn literal(v: &Value) -> String {
    match v {
        Value::Int(i) => i.to_string(),
        Value::Str(s) => format!("'{}'", s.replace('\'', "''")),
        Value::Date(d) => format!("'{d}'"),
        Value::Bool(true) => "TRUE".into(),
        Value::Bool(false) => "FALSE".into(),
        Value::Null => "NULL".into(),
    }
}

fn column(c: &ColumnRef) -> String {
    match &c.qualifier {
        Some(q) => format!("{q}.{}", c.name),
        None => c.name.clone(),
    }
}

fn operand(o: &Operand, mode: Mode) -> String {
    match (o, mode) {
        (Operand::Column(c), _) => column(c),
        (_, Mode::Shape) => "?".into(),
        (Operand::Literal(v), Mode::Text) => literal(v),
        (Operand::Param(p), Mode::Text) => format!(":{p}"),
    }
}

fn expr(e: &Expr, mode: Mode) -> String {
    match e {
        Expr::Column(c) => column(c),
        Expr::AgeYears { dob, reference } => {
            format!("AGE_YEARS({}, {})", column(dob), operand(reference, mode))
        }
        Expr::Bucket { input, bounds } => {
            let mut s = format!("BUCKET({}", expr(input, mode));
            for b in bounds {
                s.push_str(&format!(", {b}"));
            }
            s.push(')');
            s
        }
    }
}

fn select_expr_mode(e: &SelectExpr, mode: Mode) -> String {
    match e {
        SelectExpr::Expr(e) => expr(e, mode),
        SelectExpr::Aggregate(Aggregate::CountStar) => "COUNT(*)".into(),
        SelectExpr::Aggregate(Aggregate::Count(c)) => format!("COUNT({})", column(c)),
        SelectExpr::Aggregate(Aggregate::CountDistinct(c)) => {
            format!("COUNT(DISTINCT {})", column(c))
        }
    }
}

pub(crate) fn select_expr(e: &SelectExpr) -> String {
    select_expr_mode(e, Mode::Text)
}

fn bool_expr(b: &BoolExpr, mode: Mode) -> String {
    match b {
        BoolExpr::Compare { lhs, op, rhs } => {
            format!("{} {} {}", column(lhs), op.symbol(), operand(rhs, mode))
        }
        BoolExpr::Between { column: c, low, high } => format!(
            "{} BETWEEN {} AND {}",
            column(c),
            operand(low, mode),
            operand(high, mode)
        ),
        BoolExpr::And(a, b) => format!("{} AND {}", bool_expr(a, mode), bool_expr(b, mode)),
        BoolExpr::Or(a, b) => format!("{} OR {}", bool_expr(a, mode), bool_expr(b, mode)),
        BoolExpr::Paren(inner) => format!("({})", bool_expr(inner, mode)),
    }
}

fn write_query(q: &QueryAst, mode: Mode) -> String {
    let items: Vec<String> = q
        .select
        .iter()
        .map(|item| {
            let e = select_expr_mode(&item.expr, mode);
            match &item.alias {
                Some(a) => format!("{e} AS {a}"),
                None => e,
            }
        })
        .collect();
    let tables: Vec<String> = q
        .from
        .iter()
        .map(|f| match &f.alias {
            Some(a) => format!("{} AS {a}", f.table),
            None => f.table.clone(),
        })
        .collect();
    let mut out = format!("SELECT {} FROM {}", items.join(", "), tables.join(", "));
    if let Some(w) = &q.where_clause {
        out.push_str(" WHERE ");
        out.push_str(&bool_expr(w, mode));
    }
    if !q.group_by.is_empty() {
        let keys: Vec<String> = q.group_by.iter().map(|g| expr(g, mode)).collect();
        out.push_str(" GROUP BY ");
        out.push_str(&keys.join(", "));
    }
    if !q.order_by.is_empty() {
        let keys: Vec<String> = q
            .order_by
            .iter()
            .map(|o| {
                let k = match &o.key {
                    OrderKey::Alias(a) => a.clone(),
                    OrderKey::Column(c) => column(c),
                };
                format!("{k} {}", if o.descending { "DESC" } else { "ASC" })
            })
            .collect();
        out.push_str(" ORDER BY ");
        out.push_str(&keys.join(", "));
    }
    if let Some(n) = q.limit {
        out.push_str(&format!(" LIMIT {n}"));
    }
    out
}
