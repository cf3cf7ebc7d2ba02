//! Typed parameter binding. Placeholders can only ever occupy value positions
//! (the grammar has no other place for them), so binding swaps `Operand::Param`
//! for `Operand::Literal` and touches nothing else.

use std::collections::BTreeMap;

use super::ast::*;
use crate::relstore::{ScalarType, Value};

/// A caller-supplied parameter: the type the caller declares and the raw text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamValue {
    pub dtype: ScalarType,
    pub raw: String,
}

impl ParamValue {
    pub fn new(dtype: ScalarType, raw: impl Into<String>) -> ParamValue {
        ParamValue {
            dtype,
            raw: raw.into(),
        }
    }
}

/// Screens raw parameter text before it is parsed.
pub trait ParamScreen {
    fn admits(&self, raw: &str) -> bool;
}

/// Admits everything. For trusted callers and tests.
pub struct NoScreen;

impl ParamScreen for NoScreen {
    fn admits(&self, _raw: &str) -> bool {
        true
    }
}

/// A query with every placeholder replaced by a typed literal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundQuery {
    pub ast: QueryAst,
    /// Bound values in placeholder order.
    pub param_log: Vec<(String, Value)>,
}

impl BoundQuery {
    /// Wraps a query that has no placeholders.
    pub fn from_literal(ast: QueryAst) -> Option<BoundQuery> {
        ast.params.is_empty().then_some(BoundQuery {
            ast,
            param_log: Vec::new(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BindError {
    #[error("missing parameter `{0}`")]
    Missing(String),
    #[error("unexpected parameter `{0}`")]
    Extra(String),
    #[error("parameter `{name}` declared {declared} but used as {expected}")]
    TypeMismatch {
        name: String,
        declared: ScalarType,
        expected: ScalarType,
    },
    #[error("parameter `{name}`: {message}")]
    Parse { name: String, message: String },
    #[error("parameter `{0}` contains a forbidden sequence")]
    Injection(String),
    #[error("BETWEEN bounds out of order after binding: {0}")]
    Range(String),
}

impl BindError {
    /// The parameter the error concerns, if any.
    pub fn param(&self) -> Option<&str> {
        match self {
            BindError::Missing(n) | BindError::Extra(n) | BindError::Injection(n) => Some(n),
            BindError::TypeMismatch { name, .. } | BindError::Parse { name, .. } => Some(name),
            BindError::Range(_) => None,
        }
    }
}

/// Declares each raw value with the type its placeholder demands. Unknown names
/// are declared as strings so binding reports them as extra.
pub fn infer_types(ast: &QueryAst, raw: &BTreeMap<String, String>) -> BTreeMap<String, ParamValue> {
    raw.iter()
        .map(|(name, value)| {
            let dtype = ast
                .params
                .iter()
                .find(|p| &p.name == name)
                .map_or(ScalarType::Str, |p| p.dtype.scalar());
            (name.clone(), ParamValue::new(dtype, value.clone()))
        })
        .collect()
}

pub fn bind_params(
    ast: &QueryAst,
    params: &BTreeMap<String, ParamValue>,
    screen: &dyn ParamScreen,
) -> Result<BoundQuery, BindError> {
    let mut values = BTreeMap::new();
    let mut param_log = Vec::with_capacity(ast.params.len());
    for slot in &ast.params {
        let Some(p) = params.get(&slot.name) else {
            return Err(BindError::Missing(slot.name.clone()));
        };
        if !screen.admits(&p.raw) {
            return Err(BindError::Injection(slot.name.clone()));
        }
        if p.dtype != slot.dtype.scalar() {
            return Err(BindError::TypeMismatch {
                name: slot.name.clone(),
                declared: p.dtype,
                expected: slot.dtype.scalar(),
            });
        }
        let value = slot
            .dtype
            .parse_text(&p.raw)
            .map_err(|message| BindError::Parse {
                name: slot.name.clone(),
                message,
            })?;
        values.insert(slot.name.as_str(), value.clone());
        param_log.push((slot.name.clone(), value));
    }
    if let Some(extra) = params.keys().find(|k| !values.contains_key(k.as_str())) {
        return Err(BindError::Extra(extra.clone()));
    }

    let mut bound = ast.clone();
    bound.params.clear();
    let mut sub = |o: &mut Operand| {
        if let Operand::Param(name) = o {
            *o = Operand::Literal(values[name.as_str()].clone());
        }
    };
    for item in &mut bound.select {
        if let SelectExpr::Expr(e) = &mut item.expr {
            expr_operands_mut(e, &mut sub);
        }
    }
    for g in &mut bound.group_by {
        expr_operands_mut(g, &mut sub);
    }
    if let Some(w) = &mut bound.where_clause {
        bool_operands_mut(w, &mut sub);
        check_ranges(w)?;
    }
    Ok(BoundQuery {
        ast: bound,
        param_log,
    })
}

fn expr_operands_mut(e: &mut Expr, f: &mut impl FnMut(&mut Operand)) {
    match e {
        Expr::Column(_) => {}
        Expr::AgeYears { reference, .. } => f(reference),
        Expr::Bucket { input, .. } => expr_operands_mut(input, f),
    }
}

fn bool_operands_mut(b: &mut BoolExpr, f: &mut impl FnMut(&mut Operand)) {
    match b {
        BoolExpr::Compare { rhs, .. } => f(rhs),
        BoolExpr::Between { low, high, .. } => {
            f(low);
            f(high);
        }
        BoolExpr::And(a, c) | BoolExpr::Or(a, c) => {
            bool_operands_mut(a, f);
            bool_operands_mut(c, f);
        }
        BoolExpr::Paren(inner) => bool_operands_mut(inner, f),
    }
}

fn check_ranges(b: &BoolExpr) -> Result<(), BindError> {
    match b {
        BoolExpr::Between {
            low: Operand::Literal(lo),
            high: Operand::Literal(hi),
            column,
        } => {
            if lo.try_cmp(hi) == Some(std::cmp::Ordering::Greater) {
                return Err(BindError::Range(format!("{}: {lo} > {hi}", column.name)));
            }
            Ok(())
        }
        BoolExpr::And(a, c) | BoolExpr::Or(a, c) => {
            check_ranges(a)?;
            check_ranges(c)
        }
        BoolExpr::Paren(inner) => check_ranges(inner),
        _ => Ok(()),
    }
}
