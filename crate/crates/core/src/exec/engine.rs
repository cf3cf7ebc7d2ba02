//! The serving engine: pushed-down filters, hash joins on equality predicates,
//! hash grouping.
//!
//! Sources are joined in FROM order and every step keeps candidate rows in
//! index order, so joined tuples come out in the same order a nested loop over
//! the FROM list would produce them. Group discovery order follows from that.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};

use super::{bind_tables, output_columns, scalar, ExecError, ResultSet};
use crate::mql::{Aggregate, BoolExpr, BoundQuery, ColumnRef, CompareOp, Expr, Operand, SelectExpr};
use crate::relstore::{Snapshot, Table, Value};

type Tuple = Vec<u32>;

struct Ctx<'a> {
    tables: Vec<&'a Table>,
}

impl<'a> Ctx<'a> {
    fn col(&self, t: &[u32], c: &ColumnRef) -> &'a Value {
        &self.tables[c.source].rows[t[c.source] as usize][c.column]
    }

    fn operand(&self, t: &[u32], o: &'a Operand) -> Result<&'a Value, ExecError> {
        match o {
            Operand::Literal(v) => Ok(v),
            Operand::Column(c) => Ok(self.col(t, c)),
            Operand::Param(p) => Err(ExecError::Unbound(p.clone())),
        }
    }

    fn compare(&self, a: &Value, b: &Value) -> Result<Option<Ordering>, ExecError> {
        if a.is_null() || b.is_null() {
            return Ok(None);
        }
        match a.try_cmp(b) {
            Some(o) => Ok(Some(o)),
            None => Err(ExecError::TypeMismatch(format!("{a} vs {b}"))),
        }
    }

    fn test(&self, t: &[u32], e: &'a BoolExpr) -> Result<bool, ExecError> {
        Ok(match e {
            BoolExpr::Compare { lhs, op, rhs } => {
                let ord = self.compare(self.col(t, lhs), self.operand(t, rhs)?)?;
                ord.is_some_and(|o| match op {
                    CompareOp::Eq => o.is_eq(),
                    CompareOp::Ne => o.is_ne(),
                    CompareOp::Lt => o.is_lt(),
                    CompareOp::Le => o.is_le(),
                    CompareOp::Gt => o.is_gt(),
                    CompareOp::Ge => o.is_ge(),
                })
            }
            BoolExpr::Between { column, low, high } => {
                let v = self.col(t, column);
                let lo = self.compare(v, self.operand(t, low)?)?;
                let hi = self.compare(v, self.operand(t, high)?)?;
                lo.is_some_and(Ordering::is_ge) && hi.is_some_and(Ordering::is_le)
            }
            BoolExpr::And(a, b) => self.test(t, a)? && self.test(t, b)?,
            BoolExpr::Or(a, b) => self.test(t, a)? || self.test(t, b)?,
            BoolExpr::Paren(inner) => self.test(t, inner)?,
        })
    }

    fn eval(&self, t: &[u32], e: &'a Expr) -> Result<Value, ExecError> {
        match e {
            Expr::Column(c) => Ok(self.col(t, c).clone()),
            Expr::AgeYears { dob, reference } => {
                let r = self.operand(t, reference)?;
                scalar::age_years(self.col(t, dob), r)
                    .ok_or_else(|| ExecError::TypeMismatch("AGE_YEARS needs dates".into()))
            }
            Expr::Bucket { input, bounds } => {
                let x = self.eval(t, input)?;
                scalar::bucket(&x, bounds)
                    .ok_or_else(|| ExecError::TypeMismatch("BUCKET needs an integer".into()))
            }
        }
    }
}

fn sources_of(e: &BoolExpr) -> u64 {
    let mut mask = 0u64;
    e.visit_columns(&mut |c| mask |= 1 << c.source);
    mask
}

/// `a.x = b.y` with one side in `joined` and the other on source `next`:
/// returns (column on `next`, column on the joined side).
fn equi_key(e: &BoolExpr, joined: u64, next: usize) -> Option<(&ColumnRef, &ColumnRef)> {
    let BoolExpr::Compare {
        lhs,
        op: CompareOp::Eq,
        rhs: Operand::Column(rhs),
    } = e
    else {
        return None;
    };
    if lhs.source == next && joined & (1 << rhs.source) != 0 {
        Some((lhs, rhs))
    } else if rhs.source == next && joined & (1 << lhs.source) != 0 {
        Some((rhs, lhs))
    } else {
        None
    }
}

fn join(ctx: &Ctx<'_>, q: &crate::mql::QueryAst) -> Result<Vec<Tuple>, ExecError> {
    let n = ctx.tables.len();
    let conjuncts: Vec<&BoolExpr> = q.where_clause.as_ref().map_or_else(Vec::new, |w| w.conjuncts());
    let masks: Vec<u64> = conjuncts.iter().map(|c| sources_of(c)).collect();
    let mut applied = vec![false; conjuncts.len()];

    // Single-source filters, evaluated on a tuple where only that slot is meaningful.
    let mut candidates: Vec<Vec<u32>> = Vec::with_capacity(n);
    for src in 0..n {
        let local: Vec<usize> = (0..conjuncts.len()).filter(|&i| masks[i] == 1 << src).collect();
        for &i in &local {
            applied[i] = true;
        }
        let mut probe = vec![0u32; n];
        let mut keep = Vec::new();
        for r in 0..ctx.tables[src].rows.len() as u32 {
            probe[src] = r;
            let mut ok = true;
            for &i in &local {
                if !ctx.test(&probe, conjuncts[i])? {
                    ok = false;
                    break;
                }
            }
            if ok {
                keep.push(r);
            }
        }
        candidates.push(keep);
    }

    let mut tuples: Vec<Tuple> = vec![Vec::new()];
    let mut joined = 0u64;
    for next in 0..n {
        let key = (0..conjuncts.len())
            .filter(|&i| !applied[i])
            .find_map(|i| equi_key(conjuncts[i], joined, next).map(|k| (i, k)));
        let mut out = Vec::new();
        match key {
            Some((i, (inner, outer))) => {
                applied[i] = true;
                let mut index: HashMap<&Value, Vec<u32>> = HashMap::new();
                let mut probe = vec![0u32; n];
                for &r in &candidates[next] {
                    probe[next] = r;
                    let v = ctx.col(&probe, inner);
                    if !v.is_null() {
                        index.entry(v).or_default().push(r);
                    }
                }
                let mut full = vec![0u32; n];
                for t in &tuples {
                    full[..next].copy_from_slice(t);
                    let v = ctx.col(&full, outer);
                    if v.is_null() {
                        continue;
                    }
                    if let Some(rows) = index.get(v) {
                        for &r in rows {
                            let mut nt = t.clone();
                            nt.push(r);
                            out.push(nt);
                        }
                    }
                }
            }
            None => {
                for t in &tuples {
                    for &r in &candidates[next] {
                        let mut nt = t.clone();
                        nt.push(r);
                        out.push(nt);
                    }
                }
            }
        }
        joined |= 1 << next;

        let ready: Vec<usize> = (0..conjuncts.len())
            .filter(|&i| !applied[i] && masks[i] & !joined == 0)
            .collect();
        if !ready.is_empty() {
            let mut kept = Vec::with_capacity(out.len());
            let mut full = vec![0u32; n];
            'tuple: for t in out {
                full[..=next].copy_from_slice(&t);
                for &i in &ready {
                    if !ctx.test(&full, conjuncts[i])? {
                        continue 'tuple;
                    }
                }
                kept.push(t);
            }
            out = kept;
            for i in ready {
                applied[i] = true;
            }
        }
        tuples = out;
    }
    Ok(tuples)
}

enum Acc<'a> {
    Count(u64),
    Distinct(HashSet<&'a Value>),
}

pub fn execute(q: &BoundQuery, s: &Snapshot) -> Result<ResultSet, ExecError> {
    let ast = &q.ast;
    let tables = bind_tables(ast, s)?;
    let schemas: Vec<_> = tables.iter().map(|t| &t.schema).collect();
    let columns = output_columns(ast, &schemas);
    let ctx = Ctx { tables };
    let tuples = join(&ctx, ast)?;

    let mut rows: Vec<(Vec<Value>, u64)> = Vec::new();
    if ast.has_aggregate() || !ast.group_by.is_empty() {
        // Per select item: the group key it equals, if any.
        let key_of: Vec<Option<usize>> = ast
            .select
            .iter()
            .map(|item| match &item.expr {
                SelectExpr::Expr(e) => ast.group_by.iter().position(|g| g.same_as(e)),
                SelectExpr::Aggregate(_) => None,
            })
            .collect();
        let empty = Vec::new();
        let mut index: HashMap<Vec<Value>, usize> = HashMap::new();
        let mut groups: Vec<(Vec<Value>, u64, &Tuple, Vec<Acc>)> = Vec::new();
        for t in &tuples {
            let key = ast
                .group_by
                .iter()
                .map(|g| ctx.eval(t, g))
                .collect::<Result<Vec<_>, _>>()?;
            let gi = match index.get(&key) {
                Some(&gi) => gi,
                None => {
                    let accs = ast
                        .select
                        .iter()
                        .map(|item| match &item.expr {
                            SelectExpr::Aggregate(Aggregate::CountDistinct(_)) => {
                                Acc::Distinct(HashSet::new())
                            }
                            _ => Acc::Count(0),
                        })
                        .collect();
                    index.insert(key.clone(), groups.len());
                    groups.push((key, 0, t, accs));
                    groups.len() - 1
                }
            };
            let g = &mut groups[gi];
            g.1 += 1;
            for (item, acc) in ast.select.iter().zip(&mut g.3) {
                match (&item.expr, acc) {
                    (SelectExpr::Aggregate(Aggregate::CountStar), Acc::Count(n)) => *n += 1,
                    (SelectExpr::Aggregate(Aggregate::Count(c)), Acc::Count(n)) => {
                        if !ctx.col(t, c).is_null() {
                            *n += 1;
                        }
                    }
                    (SelectExpr::Aggregate(Aggregate::CountDistinct(c)), Acc::Distinct(set)) => {
                        let v = ctx.col(t, c);
                        if !v.is_null() {
                            set.insert(v);
                        }
                    }
                    _ => {}
                }
            }
        }
        if groups.is_empty() && ast.group_by.is_empty() {
            let accs = ast.select.iter().map(|_| Acc::Count(0)).collect();
            groups.push((Vec::new(), 0, &empty, accs));
        }
        for (key, size, first, accs) in &groups {
            let mut row = Vec::with_capacity(ast.select.len());
            for ((item, acc), k) in ast.select.iter().zip(accs).zip(&key_of) {
                row.push(match (&item.expr, acc, k) {
                    (SelectExpr::Aggregate(_), Acc::Count(n), _) => Value::Int(*n as i64),
                    (SelectExpr::Aggregate(_), Acc::Distinct(set), _) => Value::Int(set.len() as i64),
                    (SelectExpr::Expr(_), _, Some(k)) => key[*k].clone(),
                    (SelectExpr::Expr(e), _, None) if !first.is_empty() => ctx.eval(first, e)?,
                    (SelectExpr::Expr(_), _, None) => Value::Null,
                });
            }
            rows.push((row, *size));
        }
    } else {
        for t in &tuples {
            let row = ast
                .select
                .iter()
                .map(|item| match &item.expr {
                    SelectExpr::Expr(e) => ctx.eval(t, e),
                    SelectExpr::Aggregate(_) => unreachable!("no aggregates here"),
                })
                .collect::<Result<Vec<_>, _>>()?;
            rows.push((row, 1));
        }
    }

    if !ast.order_by.is_empty() {
        rows.sort_by(|(a, _), (b, _)| {
            for o in &ast.order_by {
                let ord = a[o.output].sort_cmp(&b[o.output]);
                let ord = if o.descending { ord.reverse() } else { ord };
                if ord.is_ne() {
                    return ord;
                }
            }
            Ordering::Equal
        });
    }
    if let Some(n) = ast.limit {
        rows.truncate(n as usize);
    }
    let (rows, group_sizes) = rows.into_iter().unzip();
    Ok(ResultSet {
        columns,
        rows,
        group_sizes,
    })
}
