//! One query, start to finish: parse or resolve, bind, check, execute,
//! suppress. The gateway and `ctl run` both go through here, so a query gives
//! the same document whichever door it came in by.

use std::collections::BTreeMap;

use crate::exec::{self, ExecError, ResultSet};
use crate::guard::{self, Origin, Policy, Rule, Violation};
use crate::mql::{self, BindError, BoundQuery, ParamValue, ParseError};
use crate::registry::{self, InstantiateError, StoredQuery};
use crate::relstore::Snapshot;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QueryError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Bind(BindError),
    #[error("query violates policy")]
    Policy(Vec<Violation>),
    #[error(transparent)]
    Exec(#[from] ExecError),
}

impl QueryError {
    /// Rule identifiers for policy failures. A screened parameter counts as
    /// an injection violation.
    pub fn violations(&self) -> Vec<Violation> {
        match self {
            QueryError::Policy(v) => v.clone(),
            QueryError::Bind(BindError::Injection(name)) => vec![Violation {
                rule: Rule::Injection,
                detail: "forbidden sequence in value".into(),
                location: format!("param:{name}"),
            }],
            _ => Vec::new(),
        }
    }
}

impl From<BindError> for QueryError {
    fn from(e: BindError) -> QueryError {
        QueryError::Bind(e)
    }
}

impl From<InstantiateError> for QueryError {
    fn from(e: InstantiateError) -> QueryError {
        match e {
            InstantiateError::Bind(b) => QueryError::Bind(b),
            InstantiateError::Policy(v) => QueryError::Policy(v),
        }
    }
}

/// Executes a bound, validated query and applies small-group suppression.
pub fn finish(q: &BoundQuery, snapshot: &Snapshot, policy: &Policy) -> Result<ResultSet, QueryError> {
    let rs = exec::execute(q, snapshot)?;
    Ok(guard::apply_suppression(rs, q, policy))
}

/// A stored query with raw request parameters.
pub fn run_stored(
    sq: &StoredQuery,
    raw: &BTreeMap<String, String>,
    snapshot: &Snapshot,
    policy: &Policy,
) -> Result<ResultSet, QueryError> {
    let bound = registry::instantiate(sq, raw, policy)?;
    finish(&bound, snapshot, policy)
}

/// Parses and binds query text. Parameters without a declared type take the
/// type of their placeholder.
pub fn prepare_text(
    text: &str,
    params: &BTreeMap<String, Param>,
    snapshot: &Snapshot,
    policy: &Policy,
    origin: Origin,
) -> Result<BoundQuery, QueryError> {
    let ast = mql::parse(text, &snapshot.schemas())?;
    let raw: BTreeMap<String, String> = params
        .iter()
        .map(|(k, p)| (k.clone(), p.raw().to_string()))
        .collect();
    let mut typed = mql::infer_types(&ast, &raw);
    for (name, p) in params {
        if let Param::Typed(v) = p {
            typed.insert(name.clone(), v.clone());
        }
    }
    let bound = mql::bind_params(&ast, &typed, policy)?;
    let verdict = guard::validate(&bound.ast, &raw, policy, origin);
    if !verdict.accepted {
        return Err(QueryError::Policy(verdict.violations));
    }
    Ok(bound)
}

pub fn run_text(
    text: &str,
    params: &BTreeMap<String, Param>,
    snapshot: &Snapshot,
    policy: &Policy,
    origin: Origin,
) -> Result<ResultSet, QueryError> {
    let bound = prepare_text(text, params, snapshot, policy, origin)?;
    finish(&bound, snapshot, policy)
}

/// A request parameter: bare text, or text with a declared type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Param {
    Raw(String),
    Typed(ParamValue),
}

impl Param {
    pub fn raw(&self) -> &str {
        match self {
            Param::Raw(s) => s,
            Param::Typed(v) => &v.raw,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relstore::ScalarType;
    use crate::synthgen::{generate_dataset, GenConfig};

    fn small() -> Snapshot {
        let cfg = GenConfig {
            n_patients: 40,
            n_examinations: 80,
            n_detections: 40,
            ..GenConfig::default()
        };
        generate_dataset(&cfg).unwrap().into_snapshot().unwrap()
    }

    fn params(kv: &[(&str, &str)]) -> BTreeMap<String, Param> {
        kv.iter()
            .map(|(k, v)| (k.to_string(), Param::Raw(v.to_string())))
            .collect()
    }

    #[test]
    fn dynamic_dialysis_by_country() {
        let snap = small();
        let text = "SELECT COUNT(*) AS Total FROM examination e, patient p \
                    WHERE e.Patient_ID = p.PID AND p.Country = :country \
                    AND e.Is_Dialysis = TRUE AND e.Endoscopy_Date BETWEEN :start AND :end";
        let ps = params(&[
            ("country", "Germany"),
            ("start", "2010-1-1"),
            ("end", "2010-12-31"),
        ]);
        let rs = run_text(text, &ps, &snap, &Policy::default(), Origin::Dynamic).unwrap();
        assert_eq!(rs.rows.len(), 1);
    }

    #[test]
    fn injection_surfaces_as_violation() {
        let snap = small();
        let text = "SELECT COUNT(*) FROM patient WHERE Country = :c";
        let err = run_text(
            text,
            &params(&[("c", "' OR '1'='1")]),
            &snap,
            &Policy::default(),
            Origin::Dynamic,
        )
        .unwrap_err();
        assert_eq!(err.violations()[0].rule, Rule::Injection);
    }

    #[test]
    fn typed_params_are_checked() {
        let snap = small();
        let text = "SELECT COUNT(*) FROM examination WHERE Endoscopy_Date > :d";
        let mut ps = BTreeMap::new();
        ps.insert(
            "d".to_string(),
            Param::Typed(ParamValue::new(ScalarType::Int, "3")),
        );
        let err = run_text(text, &ps, &snap, &Policy::default(), Origin::Dynamic).unwrap_err();
        assert!(matches!(err, QueryError::Bind(BindError::TypeMismatch { .. })));
    }
}
