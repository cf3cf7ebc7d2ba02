//! Users, roles, password records and time-limited sessions.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::{Arc, Mutex};

use chrono::{DateTime, Duration, Utc};
use rand::RngCore;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use subtle::ConstantTimeEq;

pub const ADMIN_ROLE: &str = "administrator";
pub const DEFAULT_ITERATIONS: u32 = 100_000;
pub const DEFAULT_SESSION_TTL_MINUTES: i64 = 30;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PasswordRecord {
    /// Hex, 16 bytes.
    pub salt: String,
    /// Hex SHA-256 after `iterations` rounds.
    pub digest: String,
    pub iterations: u32,
}

fn stretch(salt: &[u8], password: &str, iterations: u32) -> [u8; 32] {
    let mut h: [u8; 32] = Sha256::new()
        .chain_update(salt)
        .chain_update(password.as_bytes())
        .finalize()
        .into();
    for _ in 1..iterations {
        h = Sha256::digest(h).into();
    }
    h
}

impl PasswordRecord {
    pub fn new(password: &str, salt: [u8; 16], iterations: u32) -> PasswordRecord {
        PasswordRecord {
            salt: hex::encode(salt),
            digest: hex::encode(stretch(&salt, password, iterations)),
            iterations,
        }
    }

    /// A record with a fresh random salt.
    pub fn generate(password: &str) -> PasswordRecord {
        let mut salt = [0u8; 16];
        rand::rngs::OsRng.fill_bytes(&mut salt);
        PasswordRecord::new(password, salt, DEFAULT_ITERATIONS)
    }

    /// Constant-time comparison of the stretched candidate with the stored digest.
    pub fn verify(&self, password: &str) -> bool {
        let (Ok(salt), Ok(expected)) = (hex::decode(&self.salt), hex::decode(&self.digest)) else {
            return false;
        };
        let got = stretch(&salt, password, self.iterations);
        got.ct_eq(expected.as_slice()).into()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Role {
    pub id: u64,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct User {
    pub id: u64,
    pub username: String,
    pub password: PasswordRecord,
    pub roles: BTreeSet<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RbacError {
    #[error("role `{0}` already exists")]
    DuplicateRole(String),
    #[error("user `{0}` already exists")]
    DuplicateUser(String),
    #[error("no role `{0}`")]
    UnknownRole(String),
    #[error("no user `{0}`")]
    UnknownUser(String),
    #[error("the administrator role cannot be deleted")]
    ProtectedRole,
    #[error("`{0}` is not a valid name")]
    BadName(String),
}

/// The persistent half of access control: roles and users.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Directory {
    roles: BTreeMap<u64, Role>,
    users: BTreeMap<u64, User>,
    next_role: u64,
    next_user: u64,
}

fn valid_name(s: &str) -> bool {
    !s.is_empty()
        && s.len() <= 64
        && s.bytes()
            .all(|b| b.is_ascii_alphanumeric() || matches!(b, b'_' | b'-' | b'.'))
}

impl Directory {
    pub fn new() -> Directory {
        Directory::default()
    }

    pub fn roles(&self) -> impl Iterator<Item = &Role> {
        self.roles.values()
    }

    pub fn users(&self) -> impl Iterator<Item = &User> {
        self.users.values()
    }

    pub fn role(&self, id: u64) -> Option<&Role> {
        self.roles.get(&id)
    }

    pub fn role_by_name(&self, name: &str) -> Option<&Role> {
        self.roles.values().find(|r| r.name == name)
    }

    pub fn user(&self, id: u64) -> Option<&User> {
        self.users.get(&id)
    }

    pub fn user_by_name(&self, username: &str) -> Option<&User> {
        self.users
            .values()
            .find(|u| u.username.eq_ignore_ascii_case(username))
    }

    pub fn add_role(&mut self, name: &str) -> Result<u64, RbacError> {
        if !valid_name(name) {
            return Err(RbacError::BadName(name.into()));
        }
        if self.role_by_name(name).is_some() {
            return Err(RbacError::DuplicateRole(name.into()));
        }
        let id = self.next_role.max(1);
        self.roles.insert(
            id,
            Role {
                id,
                name: name.into(),
            },
        );
        self.next_role = id + 1;
        Ok(id)
    }

    /// Removes the role from the directory and from every user holding it.
    /// Grants and sessions are the caller's to clear.
    pub fn delete_role(&mut self, name: &str) -> Result<u64, RbacError> {
        if name == ADMIN_ROLE {
            return Err(RbacError::ProtectedRole);
        }
        let id = self
            .role_by_name(name)
            .ok_or_else(|| RbacError::UnknownRole(name.into()))?
            .id;
        self.roles.remove(&id);
        for u in self.users.values_mut() {
            u.roles.remove(&id);
        }
        Ok(id)
    }

    pub fn add_user(
        &mut self,
        username: &str,
        password: PasswordRecord,
        roles: &[&str],
    ) -> Result<u64, RbacError> {
        if !valid_name(username) {
            return Err(RbacError::BadName(username.into()));
        }
        if self.user_by_name(username).is_some() {
            return Err(RbacError::DuplicateUser(username.into()));
        }
        let role_ids = roles
            .iter()
            .map(|r| {
                self.role_by_name(r)
                    .map(|r| r.id)
                    .ok_or_else(|| RbacError::UnknownRole(r.to_string()))
            })
            .collect::<Result<BTreeSet<_>, _>>()?;
        let id = self.next_user.max(1);
        self.users.insert(
            id,
            User {
                id,
                username: username.into(),
                password,
                roles: role_ids,
            },
        );
        self.next_user = id + 1;
        Ok(id)
    }

    pub fn delete_user(&mut self, username: &str) -> Result<u64, RbacError> {
        let id = self
            .user_by_name(username)
            .ok_or_else(|| RbacError::UnknownUser(username.into()))?
            .id;
        self.users.remove(&id);
        Ok(id)
    }

    /// Id counters, for persistence.
    pub fn next_ids(&self) -> (u64, u64) {
        (self.next_role.max(1), self.next_user.max(1))
    }

    /// Rebuilds a directory from persisted parts, checking its invariants.
    pub(crate) fn restore(
        roles: Vec<Role>,
        users: Vec<User>,
        (next_role, next_user): (u64, u64),
    ) -> Result<Directory, String> {
        let mut d = Directory {
            next_role,
            next_user,
            ..Directory::new()
        };
        for r in roles {
            if !valid_name(&r.name)
                || d.role_by_name(&r.name).is_some()
                || d.roles.contains_key(&r.id)
                || r.id == 0
            {
                return Err(format!("bad or duplicate role `{}`", r.name));
            }
            d.next_role = d.next_role.max(r.id + 1);
            d.roles.insert(r.id, r);
        }
        for u in users {
            if !valid_name(&u.username)
                || d.user_by_name(&u.username).is_some()
                || d.users.contains_key(&u.id)
                || u.id == 0
            {
                return Err(format!("bad or duplicate user `{}`", u.username));
            }
            if let Some(r) = u.roles.iter().find(|r| !d.roles.contains_key(r)) {
                return Err(format!("user `{}` holds unknown role id {r}", u.username));
            }
            if u.password.iterations == 0 || hex::decode(&u.password.salt).is_err() {
                return Err(format!("user `{}` has a malformed password record", u.username));
            }
            d.next_user = d.next_user.max(u.id + 1);
            d.users.insert(u.id, u);
        }
        Ok(d)
    }
}

pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
}

pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

/// A clock that only moves when told to.
pub struct ManualClock(Mutex<DateTime<Utc>>);

impl ManualClock {
    pub fn new(start: DateTime<Utc>) -> ManualClock {
        ManualClock(Mutex::new(start))
    }

    pub fn advance(&self, by: Duration) {
        *self.0.lock().unwrap() += by;
    }
}

impl Clock for ManualClock {
    fn now(&self) -> DateTime<Utc> {
        *self.0.lock().unwrap()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Session {
    #[serde(skip)]
    pub token: String,
    pub user_id: u64,
    pub role_id: u64,
    pub created_at: DateTime<Utc>,
    pub expires_at: DateTime<Utc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum AuthError {
    /// Unknown user or wrong password; deliberately not told apart.
    #[error("invalid credentials")]
    BadCredentials,
    #[error("role not held by this user")]
    RoleNotHeld,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum Deny {
    #[error("missing, unknown or expired session")]
    Unauthenticated,
    #[error("not permitted for this role")]
    Forbidden,
}

/// Live sessions. Expiry is checked when a token is presented.
pub struct SessionStore {
    sessions: Mutex<HashMap<String, Session>>,
    ttl: Duration,
    clock: Arc<dyn Clock>,
    dummy: PasswordRecord,
}

impl SessionStore {
    pub fn new(ttl: Duration, clock: Arc<dyn Clock>) -> SessionStore {
        SessionStore {
            sessions: Mutex::new(HashMap::new()),
            ttl,
            clock,
            dummy: PasswordRecord::new("", [0; 16], DEFAULT_ITERATIONS),
        }
    }

    pub fn ttl(&self) -> Duration {
        self.ttl
    }

    /// Verifies the password and opens a session in `role`. An unknown user
    /// costs the same hashing work as a known one.
    pub fn authenticate(
        &self,
        dir: &Directory,
        username: &str,
        password: &str,
        role: &str,
    ) -> Result<Session, AuthError> {
        let user = dir.user_by_name(username);
        let record = user.map_or(&self.dummy, |u| &u.password);
        let ok = record.verify(password);
        let user = match (user, ok) {
            (Some(u), true) => u,
            _ => return Err(AuthError::BadCredentials),
        };
        let role_id = dir
            .role_by_name(role)
            .map(|r| r.id)
            .filter(|id| user.roles.contains(id))
            .ok_or(AuthError::RoleNotHeld)?;
        let mut bytes = [0u8; 16];
        rand::rngs::OsRng.fill_bytes(&mut bytes);
        let now = self.clock.now();
        let session = Session {
            token: hex::encode(bytes),
            user_id: user.id,
            role_id,
            created_at: now,
            expires_at: now + self.ttl,
        };
        self.sessions
            .lock()
            .unwrap()
            .insert(session.token.clone(), session.clone());
        Ok(session)
    }

    /// The live session for `token`, if it is unexpired and its user still
    /// holds its role.
    pub fn validate(&self, dir: &Directory, token: &str) -> Result<Session, Deny> {
        let mut sessions = self.sessions.lock().unwrap();
        let Some(s) = sessions.get(token) else {
            return Err(Deny::Unauthenticated);
        };
        let live = self.clock.now() < s.expires_at
            && dir.user(s.user_id).is_some_and(|u| u.roles.contains(&s.role_id));
        if !live {
            sessions.remove(token);
            return Err(Deny::Unauthenticated);
        }
        Ok(s.clone())
    }

    /// Allowed iff the session is live and its role holds the grant.
    pub fn authorize(
        &self,
        dir: &Directory,
        catalog: &crate::registry::Catalog,
        token: &str,
        query_id: u64,
    ) -> Result<Session, Deny> {
        let s = self.validate(dir, token)?;
        if catalog.is_granted(s.role_id, query_id) {
            Ok(s)
        } else {
            Err(Deny::Forbidden)
        }
    }

    pub fn revoke(&self, token: &str) -> bool {
        self.sessions.lock().unwrap().remove(token).is_some()
    }

    /// Drops every session whose active role is `role_id`.
    pub fn drop_role(&self, role_id: u64) {
        self.sessions.lock().unwrap().retain(|_, s| s.role_id != role_id);
    }

    pub fn drop_user(&self, user_id: u64) {
        self.sessions.lock().unwrap().retain(|_, s| s.user_id != user_id);
    }

    pub fn len(&self) -> usize {
        self.sessions.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registry::Catalog;

    fn fast(password: &str, salt: u8) -> PasswordRecord {
        PasswordRecord::new(password, [salt; 16], 10)
    }

    fn dir() -> Directory {
        let mut d = Directory::new();
        d.add_role(ADMIN_ROLE).unwrap();
        d.add_role("organization_a").unwrap();
        d.add_user("admin", fast("admin-password", 1), &[ADMIN_ROLE])
            .unwrap();
        d.add_user("org_a_user", fast("org-a-password", 2), &["organization_a"])
            .unwrap();
        d
    }

    fn store() -> (SessionStore, Arc<ManualClock>) {
        let clock = Arc::new(ManualClock::new(
            DateTime::parse_from_rfc3339("2010-06-01T12:00:00Z")
                .unwrap()
                .into(),
        ));
        (SessionStore::new(Duration::minutes(30), clock.clone()), clock)
    }

    #[test]
    fn password_records() {
        let r = PasswordRecord::new("secret", [7; 16], 1000);
        assert!(r.verify("secret"));
        assert!(!r.verify("Secret"));
        assert_eq!(r.salt.len(), 32);
        assert_eq!(r.digest.len(), 64);
        assert!(!r.digest.contains("secret"));
        // One iteration is plain SHA-256(salt || password).
        let one = PasswordRecord::new("abc", [0; 16], 1);
        let mut input = vec![0u8; 16];
        input.extend_from_slice(b"abc");
        assert_eq!(one.digest, hex::encode(Sha256::digest(&input)));
    }

    #[test]
    fn login_outcomes() {
        let d = dir();
        let (s, _) = store();
        let sess = s.authenticate(&d, "admin", "admin-password", ADMIN_ROLE).unwrap();
        assert_eq!(sess.token.len(), 32);
        assert_eq!(sess.expires_at - sess.created_at, Duration::minutes(30));
        assert_eq!(
            s.authenticate(&d, "admin", "wrong", ADMIN_ROLE),
            Err(AuthError::BadCredentials)
        );
        assert_eq!(
            s.authenticate(&d, "nobody", "admin-password", ADMIN_ROLE),
            Err(AuthError::BadCredentials)
        );
        assert_eq!(
            s.authenticate(&d, "org_a_user", "org-a-password", ADMIN_ROLE),
            Err(AuthError::RoleNotHeld)
        );
        assert!(s.authenticate(&d, "ADMIN", "admin-password", ADMIN_ROLE).is_ok());
    }

    #[test]
    fn authorize_and_expiry() {
        let d = dir();
        let (s, clock) = store();
        let mut cat = Catalog::new();
        let org = d.role_by_name("organization_a").unwrap().id;
        cat.grant(org, crate::registry::DYNAMIC_QUERY_ID).unwrap();
        let t = s
            .authenticate(&d, "org_a_user", "org-a-password", "organization_a")
            .unwrap()
            .token;
        assert!(s.authorize(&d, &cat, &t, 0).is_ok());
        assert_eq!(s.authorize(&d, &cat, &t, 4).unwrap_err(), Deny::Forbidden);
        clock.advance(Duration::minutes(29));
        assert!(s.validate(&d, &t).is_ok());
        clock.advance(Duration::minutes(1));
        assert_eq!(s.validate(&d, &t).unwrap_err(), Deny::Unauthenticated);
        assert_eq!(s.authorize(&d, &cat, &t, 0).unwrap_err(), Deny::Unauthenticated);
        assert_eq!(s.validate(&d, "feed").unwrap_err(), Deny::Unauthenticated);
    }

    #[test]
    fn role_deletion() {
        let mut d = dir();
        let (s, _) = store();
        let t = s
            .authenticate(&d, "org_a_user", "org-a-password", "organization_a")
            .unwrap()
            .token;
        assert_eq!(d.delete_role(ADMIN_ROLE), Err(RbacError::ProtectedRole));
        d.delete_role("organization_a").unwrap();
        assert_eq!(s.validate(&d, &t).unwrap_err(), Deny::Unauthenticated);
        assert!(d.user_by_name("org_a_user").unwrap().roles.is_empty());
    }

    #[test]
    fn uniqueness() {
        let mut d = dir();
        assert_eq!(
            d.add_role(ADMIN_ROLE),
            Err(RbacError::DuplicateRole(ADMIN_ROLE.into()))
        );
        assert!(matches!(
            d.add_user("Admin", fast("x", 3), &[]),
            Err(RbacError::DuplicateUser(_))
        ));
        assert!(matches!(
            d.add_user("x", fast("x", 3), &["ghost"]),
            Err(RbacError::UnknownRole(_))
        ));
        assert!(matches!(d.add_role(""), Err(RbacError::BadName(_))));
        let id = d
            .add_user("multi", fast("x", 3), &[ADMIN_ROLE, "organization_a"])
            .unwrap();
        assert_eq!(d.user(id).unwrap().roles.len(), 2);
    }
}
