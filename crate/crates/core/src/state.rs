//! The persisted access-control state: roles, users, the stored-query
//! catalog and its grants, kept together in one JSON file.
//!
//! ```json
//! {
//!   "format": 1,
//!   "roles":   [{"id": 1, "name": "administrator"}],
//!   "users":   [{"id": 1, "username": "admin",
//!                "password": {"salt": "..", "digest": "..", "iterations": 100000},
//!                "roles": [1]}],
//!   "queries": [{"id": 1, "name": "q1", "description": "..", "url_path": "queryone",
//!                "sql": "SELECT ..", "param_specs": [..], "enabled": true}],
//!   "grants":  [{"role_id": 1, "query_id": 0}],
//!   "next_ids": {"role": 2, "user": 2, "query": 2}
//! }
//! ```

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};

use crate::guard::Policy;
use crate::rbac::{Directory, PasswordRecord, Role, User, ADMIN_ROLE, DEFAULT_ITERATIONS};
use crate::registry::{self, Catalog, QueryDraft, RegistryError, DYNAMIC_QUERY_ID};
use crate::relstore::TableSchema;
use crate::synthgen::Prng;

pub const FORMAT_VERSION: u32 = 1;

pub const ORG_A_ROLE: &str = "organization_a";

/// Fixture credentials written by `seed_state`.
pub const SEED_ADMIN: (&str, &str) = ("admin", "admin-password");
pub const SEED_ORG_A: (&str, &str) = ("org_a_user", "org-a-password");

#[derive(Debug, thiserror::Error)]
pub enum StateError {
    #[error("cannot access {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed state file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported state format {0}")]
    Format(u32),
    #[error("invalid state: {0}")]
    Invalid(String),
    #[error("stored query `{name}` no longer validates: {source}")]
    Query { name: String, source: RegistryError },
}

#[derive(Serialize, Deserialize)]
struct StoredForm {
    format: u32,
    roles: Vec<Role>,
    users: Vec<User>,
    queries: Vec<QueryRecord>,
    grants: Vec<registry::QueryGrant>,
    next_ids: NextIds,
}

#[derive(Serialize, Deserialize)]
struct QueryRecord {
    id: u64,
    #[serde(flatten)]
    draft: QueryDraft,
}

#[derive(Serialize, Deserialize)]
struct NextIds {
    role: u64,
    user: u64,
    query: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct State {
    pub directory: Directory,
    pub catalog: Catalog,
}

impl State {
    pub fn new() -> State {
        State {
            directory: Directory::new(),
            catalog: Catalog::new(),
        }
    }

    /// Parses a state file. Every stored query is compiled again against the
    /// current schema and policy, so a catalog that would now violate policy
    /// is refused as a whole.
    pub fn from_json(text: &str, schemas: &[TableSchema], policy: &Policy) -> Result<State, StateError> {
        let form: StoredForm = serde_json::from_str(text)?;
        if form.format != FORMAT_VERSION {
            return Err(StateError::Format(form.format));
        }
        let directory = Directory::restore(form.roles, form.users, (form.next_ids.role, form.next_ids.user))
            .map_err(StateError::Invalid)?;
        let mut catalog = Catalog::new();
        for r in form.queries {
            if r.id == DYNAMIC_QUERY_ID || catalog.get(r.id).is_some() {
                return Err(StateError::Invalid(format!("bad or duplicate query id {}", r.id)));
            }
            registry::compile(r.id, &r.draft, schemas, policy)
                .and_then(|q| catalog.insert(q))
                .map_err(|source| StateError::Query {
                    name: r.draft.name.clone(),
                    source,
                })?;
        }
        catalog.set_next_id(form.next_ids.query);
        for g in form.grants {
            if directory.role(g.role_id).is_none() {
                return Err(StateError::Invalid(format!(
                    "grant to unknown role id {}",
                    g.role_id
                )));
            }
            catalog
                .grant(g.role_id, g.query_id)
                .map_err(|e| StateError::Invalid(e.to_string()))?;
        }
        Ok(State { directory, catalog })
    }

    pub fn to_json(&self) -> String {
        let (role, user) = self.directory.next_ids();
        let form = StoredForm {
            format: FORMAT_VERSION,
            roles: self.directory.roles().cloned().collect(),
            users: self.directory.users().cloned().collect(),
            queries: self
                .catalog
                .queries()
                .map(|q| QueryRecord {
                    id: q.id,
                    draft: q.draft(),
                })
                .collect(),
            grants: self.catalog.grants().copied().collect(),
            next_ids: NextIds {
                role,
                user,
                query: self.catalog.next_id(),
            },
        };
        let mut s = serde_json::to_string_pretty(&form).expect("state serializes");
        s.push('\n');
        s
    }

    pub fn load(path: &Path, schemas: &[TableSchema], policy: &Policy) -> Result<State, StateError> {
        let text = std::fs::read_to_string(path).map_err(|source| StateError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        State::from_json(&text, schemas, policy)
    }

    /// Writes to a sibling temporary file and renames it into place.
    pub fn save(&self, path: &Path) -> Result<(), StateError> {
        let io = |source| StateError::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut tmp = path.as_os_str().to_owned();
        tmp.push(".tmp");
        let tmp = PathBuf::from(tmp);
        let mut f = std::fs::File::create(&tmp).map_err(io)?;
        f.write_all(self.to_json().as_bytes()).map_err(io)?;
        f.sync_all().map_err(io)?;
        std::fs::rename(&tmp, path).map_err(io)
    }

    /// Removes a role with everything hanging off it in the catalog.
    pub fn delete_role(&mut self, name: &str) -> Result<u64, crate::rbac::RbacError> {
        let id = self.directory.delete_role(name)?;
        self.catalog.revoke_role(id);
        Ok(id)
    }
}

/// The fixture state: roles administrator and organization_a, one user each,
/// the five seeded queries, organization_a granted q1, q2 and dynamic
/// queries, the administrator granted everything.
pub fn seed_state(seed: u64, schemas: &[TableSchema], policy: &Policy) -> Result<State, StateError> {
    seed_state_with(seed, DEFAULT_ITERATIONS, schemas, policy)
}

/// `seed_state` with a chosen hash iteration count, for fast tests.
pub fn seed_state_with(
    seed: u64,
    iterations: u32,
    schemas: &[TableSchema],
    policy: &Policy,
) -> Result<State, StateError> {
    let invalid = |e: crate::rbac::RbacError| StateError::Invalid(e.to_string());
    let mut rng = Prng::new(seed);
    let mut salt = || {
        let mut s = [0u8; 16];
        s[..8].copy_from_slice(&rng.next_u64().to_le_bytes());
        s[8..].copy_from_slice(&rng.next_u64().to_le_bytes());
        s
    };
    let mut st = State::new();
    let admin = st.directory.add_role(ADMIN_ROLE).map_err(invalid)?;
    let org_a = st.directory.add_role(ORG_A_ROLE).map_err(invalid)?;
    st.directory
        .add_user(
            SEED_ADMIN.0,
            PasswordRecord::new(SEED_ADMIN.1, salt(), iterations),
            &[ADMIN_ROLE],
        )
        .map_err(invalid)?;
    st.directory
        .add_user(
            SEED_ORG_A.0,
            PasswordRecord::new(SEED_ORG_A.1, salt(), iterations),
            &[ORG_A_ROLE],
        )
        .map_err(invalid)?;
    let mut ids = Vec::new();
    for d in registry::seeded_queries() {
        let id = st
            .catalog
            .register(&d, schemas, policy)
            .map_err(|source| StateError::Query {
                name: d.name.clone(),
                source,
            })?;
        ids.push(id);
    }
    let grant = |st: &mut State, role, q| st.catalog.grant(role, q).map(drop);
    let res: Result<(), RegistryError> = (|| {
        for &q in &ids[..2] {
            grant(&mut st, org_a, q)?;
        }
        grant(&mut st, org_a, DYNAMIC_QUERY_ID)?;
        for &q in &ids {
            grant(&mut st, admin, q)?;
        }
        grant(&mut st, admin, DYNAMIC_QUERY_ID)
    })();
    res.map_err(|e| StateError::Invalid(e.to_string()))?;
    Ok(st)
}

/// The live state behind the gateway. Readers take a cheap `Arc` of the
/// current version; writers are serialized, persist first, then publish.
pub struct StateStore {
    current: RwLock<Arc<State>>,
    writer: Mutex<()>,
    path: Option<PathBuf>,
}

impl StateStore {
    pub fn new(state: State, path: Option<PathBuf>) -> StateStore {
        StateStore {
            current: RwLock::new(Arc::new(state)),
            writer: Mutex::new(()),
            path,
        }
    }

    pub fn current(&self) -> Arc<State> {
        self.current.read().unwrap().clone()
    }

    /// Applies `f` to a copy of the current state. On success the copy is
    /// saved (when the store has a file) and becomes current; on any error
    /// nothing changes.
    pub fn mutate<T, E>(&self, f: impl FnOnce(&mut State) -> Result<T, E>) -> Result<T, MutateError<E>> {
        let _w = self.writer.lock().unwrap();
        let mut next = (*self.current()).clone();
        let out = f(&mut next).map_err(MutateError::Rejected)?;
        if let Some(p) = &self.path {
            next.save(p).map_err(MutateError::Persist)?;
        }
        *self.current.write().unwrap() = Arc::new(next);
        Ok(out)
    }
}

#[derive(Debug)]
pub enum MutateError<E> {
    Rejected(E),
    Persist(StateError),
}
