//! The policy pipeline: block list, injection screen, aggregate-only output
//! and small-group suppression. Structural checks work on the resolved AST.

mod policy;

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

pub use policy::{Policy, PolicyError};

use crate::exec::ResultSet;
use crate::mql::{Aggregate, BoundQuery, ColumnRef, Expr, OrderKey, QueryAst, SelectExpr};
use crate::relstore::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Rule {
    BlockedColumn,
    Injection,
    NonAggregateOutput,
    UngroupedColumn,
}

impl Rule {
    pub fn id(self) -> &'static str {
        match self {
            Rule::BlockedColumn => "BLOCKED_COLUMN",
            Rule::Injection => "INJECTION",
            Rule::NonAggregateOutput => "NON_AGGREGATE_OUTPUT",
            Rule::UngroupedColumn => "UNGROUPED_COLUMN",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub rule: Rule,
    pub detail: String,
    /// Where in the query: `select[0]`, `where`, `group_by[1]`, `param:start`, ...
    pub location: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({}) at {}", self.rule, self.detail, self.location)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PolicyVerdict {
    pub accepted: bool,
    pub violations: Vec<Violation>,
}

impl PolicyVerdict {
    pub fn from_violations(violations: Vec<Violation>) -> PolicyVerdict {
        PolicyVerdict {
            accepted: violations.is_empty(),
            violations,
        }
    }

    pub fn rules(&self) -> Vec<Rule> {
        self.violations.iter().map(|v| v.rule).collect()
    }

    fn merge(&mut self, other: PolicyVerdict) {
        self.violations.extend(other.violations);
        self.accepted = self.violations.is_empty();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Stored,
    Dynamic,
}

fn violation(rule: Rule, detail: impl Into<String>, location: impl Into<String>) -> Violation {
    Violation {
        rule,
        detail: detail.into(),
        location: location.into(),
    }
}

/// Rejects any reference to a block-listed name: column names, qualifiers and
/// aliases. `AGE_YEARS` counts as a reference to `age`.
pub fn check_deidentification(q: &QueryAst, p: &Policy) -> PolicyVerdict {
    let mut out = Vec::new();
    let column = |c: &ColumnRef, loc: &str, out: &mut Vec<Violation>| {
        if p.is_blocked(&c.name) {
            out.push(violation(Rule::BlockedColumn, &c.name, loc));
        }
        if let Some(qual) = &c.qualifier {
            if p.is_blocked(qual) {
                out.push(violation(Rule::BlockedColumn, qual, loc));
            }
        }
    };
    fn derived_age(e: &Expr, p: &Policy, loc: &str, out: &mut Vec<Violation>) {
        match e {
            Expr::AgeYears { .. } if p.is_blocked("age") => {
                out.push(violation(Rule::BlockedColumn, "AGE_YEARS", loc));
            }
            Expr::Bucket { input, .. } => derived_age(input, p, loc, out),
            _ => {}
        }
    }

    for (i, item) in q.select.iter().enumerate() {
        let loc = format!("select[{i}]");
        match &item.expr {
            SelectExpr::Expr(e) => {
                derived_age(e, p, &loc, &mut out);
                e.visit_columns(&mut |c| column(c, &loc, &mut out));
            }
            SelectExpr::Aggregate(Aggregate::Count(c) | Aggregate::CountDistinct(c)) => {
                column(c, &loc, &mut out)
            }
            SelectExpr::Aggregate(Aggregate::CountStar) => {}
        }
        if let Some(a) = item.alias.as_ref().filter(|a| p.is_blocked(a)) {
            out.push(violation(Rule::BlockedColumn, a, &loc));
        }
    }
    for (i, f) in q.from.iter().enumerate() {
        if let Some(a) = f.alias.as_ref().filter(|a| p.is_blocked(a)) {
            out.push(violation(Rule::BlockedColumn, a, format!("from[{i}]")));
        }
    }
    if let Some(w) = &q.where_clause {
        w.visit_columns(&mut |c| column(c, "where", &mut out));
    }
    for (i, g) in q.group_by.iter().enumerate() {
        let loc = format!("group_by[{i}]");
        derived_age(g, p, &loc, &mut out);
        g.visit_columns(&mut |c| column(c, &loc, &mut out));
    }
    for (i, o) in q.order_by.iter().enumerate() {
        let loc = format!("order_by[{i}]");
        match &o.key {
            OrderKey::Column(c) => column(c, &loc, &mut out),
            OrderKey::Alias(a) if p.is_blocked(a) => out.push(violation(Rule::BlockedColumn, a, &loc)),
            OrderKey::Alias(_) => {}
        }
    }
    PolicyVerdict::from_violations(out)
}

/// `true` when `raw` contains none of the policy's forbidden substrings.
pub fn check_injection(raw: &str, p: &Policy) -> bool {
    p.check_injection(raw)
}

/// Every output column must be an aggregate or a GROUP BY key.
pub fn check_aggregate_only(q: &QueryAst) -> PolicyVerdict {
    let mut out = Vec::new();
    for (i, item) in q.select.iter().enumerate() {
        if let SelectExpr::Expr(e) = &item.expr {
            if !q.group_by.iter().any(|g| g.same_as(e)) {
                out.push(violation(
                    Rule::UngroupedColumn,
                    item.label(),
                    format!("select[{i}]"),
                ));
            }
        }
    }
    if !q.has_aggregate() && q.group_by.is_empty() {
        out.push(violation(
            Rule::NonAggregateOutput,
            "query returns rows, not aggregates",
            "select",
        ));
    }
    PolicyVerdict::from_violations(out)
}

/// The full pipeline. Violations from every stage are accumulated.
pub fn validate(
    q: &QueryAst,
    params: &BTreeMap<String, String>,
    p: &Policy,
    origin: Origin,
) -> PolicyVerdict {
    let mut verdict = PolicyVerdict::from_violations(
        params
            .iter()
            .filter(|(_, raw)| !p.check_injection(raw))
            .map(|(name, _)| {
                violation(
                    Rule::Injection,
                    "forbidden sequence in value",
                    format!("param:{name}"),
                )
            })
            .collect(),
    );
    if origin == Origin::Dynamic || p.apply_block_list_to_stored {
        verdict.merge(check_deidentification(q, p));
    }
    verdict.merge(check_aggregate_only(q));
    verdict
}

/// Drops rows backed by fewer than `min_group_size` records. Rows are judged by
/// their COUNT columns; a query without aggregates is judged by group sizes.
pub fn apply_suppression(rs: ResultSet, q: &BoundQuery, p: &Policy) -> ResultSet {
    let k = p.min_group_size;
    if k <= 1 {
        return rs;
    }
    let counts: Vec<usize> = (0..q.ast.select.len())
        .filter(|&i| q.ast.select[i].is_aggregate())
        .collect();
    let ResultSet {
        columns,
        rows,
        group_sizes,
    } = rs;
    let (rows, group_sizes) = rows
        .into_iter()
        .zip(group_sizes)
        .filter(|(row, size)| {
            if counts.is_empty() {
                *size >= k
            } else {
                counts
                    .iter()
                    .all(|&i| matches!(row[i], Value::Int(n) if n >= k as i64))
            }
        })
        .unzip();
    ResultSet {
        columns,
        rows,
        group_sizes,
    }
}
