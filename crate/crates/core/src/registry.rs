//! Stored, URL-addressed query templates and the role grants over them.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::guard::{self, Origin, Policy, Violation};
use crate::mql::{self, BindError, BoundQuery, ParamValue, ParseError, QueryAst};
use crate::relstore::{ScalarType, TableSchema};

/// Grant target meaning "may submit dynamic queries". Stored queries start at 1.
pub const DYNAMIC_QUERY_ID: u64 = 0;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub dtype: ScalarType,
    #[serde(default = "yes")]
    pub required: bool,
    /// Used when an optional parameter is not supplied.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<String>,
}

fn yes() -> bool {
    true
}

impl ParamSpec {
    pub fn required(name: &str, dtype: ScalarType) -> ParamSpec {
        ParamSpec {
            name: name.to_string(),
            dtype,
            required: true,
            default: None,
        }
    }
}

/// What an administrator submits: everything but the id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryDraft {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub url_path: String,
    pub sql: String,
    #[serde(default)]
    pub param_specs: Vec<ParamSpec>,
    #[serde(default = "yes")]
    pub enabled: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoredQuery {
    pub id: u64,
    pub name: String,
    pub description: String,
    pub url_path: String,
    pub sql: String,
    pub template: QueryAst,
    pub param_specs: Vec<ParamSpec>,
    pub enabled: bool,
}

impl StoredQuery {
    pub fn draft(&self) -> QueryDraft {
        QueryDraft {
            name: self.name.clone(),
            description: self.description.clone(),
            url_path: self.url_path.clone(),
            sql: self.sql.clone(),
            param_specs: self.param_specs.clone(),
            enabled: self.enabled,
        }
    }

    pub fn descriptor(&self) -> QueryDescriptor {
        QueryDescriptor {
            id: self.id,
            name: self.name.clone(),
            description: self.description.clone(),
            url_path: self.url_path.clone(),
            param_specs: self.param_specs.clone(),
        }
    }
}

/// What a role's members see about a query. The SQL text is withheld.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryDescriptor {
    pub id: u64,
    pub name: String,
    pub description: String,
    pub url_path: String,
    pub param_specs: Vec<ParamSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct QueryGrant {
    pub role_id: u64,
    pub query_id: u64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RegistryError {
    #[error("url path `{0}` must match [a-z0-9_-]+")]
    BadPath(String),
    #[error("query name `{0}` is not an identifier")]
    BadName(String),
    #[error("url path `{0}` is already registered")]
    DuplicatePath(String),
    #[error("query name `{0}` is already registered")]
    DuplicateName(String),
    #[error("template does not parse: {0}")]
    Parse(#[from] ParseError),
    #[error("parameter specs do not match the template: {0}")]
    Params(String),
    #[error("template violates policy")]
    Policy(Vec<Violation>),
    #[error("no query with id {0}")]
    UnknownQuery(u64),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum InstantiateError {
    #[error(transparent)]
    Bind(#[from] BindError),
    #[error("parameters violate policy")]
    Policy(Vec<Violation>),
}

fn valid_path(p: &str) -> bool {
    !p.is_empty()
        && p.bytes()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_' || b == b'-')
}

/// Checks a draft against the schema and policy and builds the stored form.
pub fn compile(
    id: u64,
    d: &QueryDraft,
    schemas: &[TableSchema],
    policy: &Policy,
) -> Result<StoredQuery, RegistryError> {
    if !valid_path(&d.url_path) {
        return Err(RegistryError::BadPath(d.url_path.clone()));
    }
    if !crate::relstore::is_identifier(&d.name) {
        return Err(RegistryError::BadName(d.name.clone()));
    }
    let template = mql::parse(&d.sql, schemas)?;
    for slot in &template.params {
        match d.param_specs.iter().find(|s| s.name == slot.name) {
            None => return Err(RegistryError::Params(format!("`{}` has no spec", slot.name))),
            Some(s) if s.dtype != slot.dtype.scalar() => {
                return Err(RegistryError::Params(format!(
                    "`{}` declared {} but used as {}",
                    s.name,
                    s.dtype,
                    slot.dtype.scalar()
                )))
            }
            Some(s) if !s.required && s.default.is_none() => {
                return Err(RegistryError::Params(format!(
                    "optional `{}` needs a default",
                    s.name
                )))
            }
            Some(_) => {}
        }
    }
    if let Some(s) = d
        .param_specs
        .iter()
        .find(|s| !template.params.iter().any(|p| p.name == s.name))
    {
        return Err(RegistryError::Params(format!("`{}` is not used", s.name)));
    }
    let verdict = guard::validate(&template, &BTreeMap::new(), policy, Origin::Stored);
    if !verdict.accepted {
        return Err(RegistryError::Policy(verdict.violations));
    }
    Ok(StoredQuery {
        id,
        name: d.name.clone(),
        description: d.description.clone(),
        url_path: d.url_path.clone(),
        sql: d.sql.clone(),
        template,
        param_specs: d.param_specs.clone(),
        enabled: d.enabled,
    })
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Catalog {
    queries: BTreeMap<u64, StoredQuery>,
    grants: BTreeSet<QueryGrant>,
    next_id: u64,
}

impl Catalog {
    pub fn new() -> Catalog {
        Catalog {
            next_id: 1,
            ..Catalog::default()
        }
    }

    pub fn next_id(&self) -> u64 {
        self.next_id.max(1)
    }

    pub fn queries(&self) -> impl Iterator<Item = &StoredQuery> {
        self.queries.values()
    }

    pub fn grants(&self) -> impl Iterator<Item = &QueryGrant> {
        self.grants.iter()
    }

    pub fn get(&self, id: u64) -> Option<&StoredQuery> {
        self.queries.get(&id)
    }

    pub fn by_name(&self, name: &str) -> Option<&StoredQuery> {
        self.queries.values().find(|q| q.name == name)
    }

    pub fn register(
        &mut self,
        draft: &QueryDraft,
        schemas: &[TableSchema],
        policy: &Policy,
    ) -> Result<u64, RegistryError> {
        let id = self.next_id();
        self.insert(compile(id, draft, schemas, policy)?)?;
        Ok(id)
    }

    /// Adds an already compiled query, keeping ids monotonic.
    pub(crate) fn insert(&mut self, q: StoredQuery) -> Result<(), RegistryError> {
        if self.queries.values().any(|o| o.url_path == q.url_path) {
            return Err(RegistryError::DuplicatePath(q.url_path));
        }
        if self.queries.values().any(|o| o.name == q.name) {
            return Err(RegistryError::DuplicateName(q.name));
        }
        self.next_id = self.next_id().max(q.id + 1);
        self.queries.insert(q.id, q);
        Ok(())
    }

    pub(crate) fn set_next_id(&mut self, next: u64) {
        self.next_id = self.next_id().max(next);
    }

    /// Removes a query and every grant on it.
    pub fn remove(&mut self, id: u64) -> Result<StoredQuery, RegistryError> {
        let q = self.queries.remove(&id).ok_or(RegistryError::UnknownQuery(id))?;
        self.grants.retain(|g| g.query_id != id);
        Ok(q)
    }

    pub fn set_enabled(&mut self, id: u64, enabled: bool) -> Result<(), RegistryError> {
        let q = self.queries.get_mut(&id).ok_or(RegistryError::UnknownQuery(id))?;
        q.enabled = enabled;
        Ok(())
    }

    /// Enabled query at `url_path`. Disabled and unknown paths look the same.
    pub fn resolve_path(&self, url_path: &str) -> Option<&StoredQuery> {
        self.queries
            .values()
            .find(|q| q.enabled && q.url_path == url_path)
    }

    /// Records a grant; `false` if it already existed.
    pub fn grant(&mut self, role_id: u64, query_id: u64) -> Result<bool, RegistryError> {
        if query_id != DYNAMIC_QUERY_ID && !self.queries.contains_key(&query_id) {
            return Err(RegistryError::UnknownQuery(query_id));
        }
        Ok(self.grants.insert(QueryGrant { role_id, query_id }))
    }

    pub fn revoke(&mut self, role_id: u64, query_id: u64) -> bool {
        self.grants.remove(&QueryGrant { role_id, query_id })
    }

    pub fn revoke_role(&mut self, role_id: u64) {
        self.grants.retain(|g| g.role_id != role_id);
    }

    pub fn is_granted(&self, role_id: u64, query_id: u64) -> bool {
        self.grants.contains(&QueryGrant { role_id, query_id })
    }

    /// Enabled queries granted to the role, by id.
    pub fn list_for_role(&self, role_id: u64) -> Vec<QueryDescriptor> {
        self.queries
            .values()
            .filter(|q| q.enabled && self.is_granted(role_id, q.id))
            .map(StoredQuery::descriptor)
            .collect()
    }
}

/// Binds raw request parameters to a stored query and re-runs the policy.
pub fn instantiate(
    sq: &StoredQuery,
    raw: &BTreeMap<String, String>,
    policy: &Policy,
) -> Result<BoundQuery, InstantiateError> {
    let mut values = BTreeMap::new();
    for (name, value) in raw {
        let dtype = sq
            .param_specs
            .iter()
            .find(|s| &s.name == name)
            .map_or(ScalarType::Str, |s| s.dtype);
        values.insert(name.clone(), ParamValue::new(dtype, value.clone()));
    }
    for s in &sq.param_specs {
        if let (false, Some(d)) = (values.contains_key(&s.name), &s.default) {
            values.insert(s.name.clone(), ParamValue::new(s.dtype, d.clone()));
        }
    }
    let bound = mql::bind_params(&sq.template, &values, policy)?;
    let verdict = guard::validate(&bound.ast, raw, policy, Origin::Stored);
    if !verdict.accepted {
        return Err(InstantiateError::Policy(verdict.violations));
    }
    Ok(bound)
}

const HEP_B_TABLES: &str = "clinicaldetection b1, clinicaldetection b2, \
    clinicaldetection s1, clinicaldetection s2";

const HEP_B_NEGATIVE: &str = "b1.Test_Name = 'HBsAg' AND b1.Phase = 'baseline' AND b1.Result = 'negative' \
    AND b2.Patient_ID = b1.Patient_ID AND b2.Test_Name = 'Anti-HBs' AND b2.Phase = 'baseline' \
    AND b2.Result = 'negative' \
    AND s1.Patient_ID = b1.Patient_ID AND s1.Test_Name = 'HBsAg' AND s1.Phase = 'second' \
    AND s1.Result = 'negative' \
    AND s2.Patient_ID = b1.Patient_ID AND s2.Test_Name = 'Anti-HBs' AND s2.Phase = 'second' \
    AND s2.Result = 'negative'";

/// The five stored queries of the seeded catalog, in id order.
pub fn seeded_queries() -> Vec<QueryDraft> {
    let range = || {
        vec![
            ParamSpec::required("start", ScalarType::Date),
            ParamSpec::required("end", ScalarType::Date),
        ]
    };
    let q = |name: &str, path: &str, description: &str, sql: String, param_specs| QueryDraft {
        name: name.into(),
        description: description.into(),
        url_path: path.into(),
        sql,
        param_specs,
        enabled: true,
    };
    vec![
        q(
            "q1",
            "queryone",
            "Endoscopic examinations per country between two dates",
            "SELECT Country, COUNT(Report_ID) AS TotalNum FROM examination, patient \
             WHERE examination.Patient_ID = patient.PID \
             AND Endoscopy_Date BETWEEN :start AND :end \
             GROUP BY Country ORDER BY TotalNum DESC"
                .into(),
            range(),
        ),
        q(
            "q2",
            "querytwo",
            "Top 5 diagnoses of dialysis patients, with case counts, between two dates",
            "SELECT Diagnoses_Text, COUNT(Report_ID) AS Cases FROM examination \
             WHERE Is_Dialysis = TRUE AND Endoscopy_Date BETWEEN :start AND :end \
             GROUP BY Diagnoses_Text ORDER BY Cases DESC LIMIT 5"
                .into(),
            range(),
        ),
        q(
            "q3",
            "querythree",
            "Dialysis patients examined between two dates, by age bracket at the end date",
            "SELECT BUCKET(AGE_YEARS(patient.DOB, :end), 18, 40, 60) AS AgeBracket, \
             COUNT(DISTINCT patient.PID) AS Patients FROM examination, patient \
             WHERE examination.Patient_ID = patient.PID AND examination.Is_Dialysis = TRUE \
             AND examination.Endoscopy_Date BETWEEN :start AND :end \
             GROUP BY AgeBracket ORDER BY AgeBracket"
                .into(),
            range(),
        ),
        q(
            "q4",
            "queryfour",
            "Patients still susceptible to Hepatitis B: HBsAg and Anti-HBs negative at baseline and second detection",
            format!(
                "SELECT COUNT(DISTINCT b1.Patient_ID) AS Susceptible FROM {HEP_B_TABLES} \
                 WHERE {HEP_B_NEGATIVE}"
            ),
            Vec::new(),
        ),
        q(
            "q5",
            "queryfive",
            "Patients still susceptible to Hepatitis B, per gender",
            format!(
                "SELECT patient.Gender, COUNT(DISTINCT b1.Patient_ID) AS Susceptible \
                 FROM {HEP_B_TABLES}, patient WHERE {HEP_B_NEGATIVE} \
                 AND patient.PID = b1.Patient_ID GROUP BY patient.Gender ORDER BY patient.Gender"
            ),
            Vec::new(),
        ),
    ]
}
