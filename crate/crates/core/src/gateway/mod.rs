//! The HTTP service.
//!
//! | route | who |
//! |---|---|
//! | `GET /healthz` | anyone |
//! | `POST /auth/login`, `POST /auth/logout` | anyone / session |
//! | `GET /queries` | session |
//! | `GET /q/{url_path}?name=value...` | session whose role holds the grant |
//! | `POST /dynamic` | session whose role holds the dynamic grant |
//! | `POST /admin/roles`, `DELETE /admin/roles/{name}` | administrator |
//! | `POST /admin/users`, `DELETE /admin/users/{name}` | administrator |
//! | `POST /admin/queries`, `DELETE /admin/queries/{name}`, `PUT /admin/queries/{name}/enabled` | administrator |
//! | `POST /admin/grants`, `DELETE /admin/grants/{role}/{query}` | administrator |
//!
//! Sessions travel as `Authorization: Bearer <token>`. Results are XML with
//! the column labels in `X-Columns`; everything else is JSON.

mod admin;
mod config;
mod error;
mod routes;

use std::path::PathBuf;
use std::sync::Arc;

use axum::routing::{delete, get, post, put};
use axum::Router;

pub use config::{ConfigError, GatewayConfig};
pub use error::ApiError;

use crate::guard::Policy;
use crate::rbac::{Clock, SessionStore, SystemClock};
use crate::relstore::Snapshot;
use crate::state::{State, StateStore};

/// Everything a request handler can reach. The snapshot and policy are fixed
/// for the life of the process; the state store publishes new versions.
pub struct AppState {
    pub snapshot: Arc<Snapshot>,
    pub policy: Arc<Policy>,
    pub state: StateStore,
    pub sessions: SessionStore,
}

impl AppState {
    pub fn new(
        snapshot: Snapshot,
        policy: Policy,
        state: State,
        state_path: Option<PathBuf>,
        ttl: chrono::Duration,
        clock: Arc<dyn Clock>,
    ) -> AppState {
        AppState {
            snapshot: Arc::new(snapshot),
            policy: Arc::new(policy),
            state: StateStore::new(state, state_path),
            sessions: SessionStore::new(ttl, clock),
        }
    }

    /// In-memory state with the system clock and the default session length.
    pub fn ephemeral(snapshot: Snapshot, policy: Policy, state: State) -> AppState {
        AppState::new(
            snapshot,
            policy,
            state,
            None,
            chrono::Duration::minutes(crate::rbac::DEFAULT_SESSION_TTL_MINUTES),
            Arc::new(SystemClock),
        )
    }
}

pub fn router(app: Arc<AppState>) -> Router {
    Router::new()
        .route("/healthz", get(routes::healthz))
        .route("/auth/login", post(routes::login))
        .route("/auth/logout", post(routes::logout))
        .route("/queries", get(routes::list_queries))
        .route("/q/{url_path}", get(routes::run_stored))
        .route("/dynamic", post(routes::run_dynamic))
        .route("/admin/roles", post(admin::add_role))
        .route("/admin/roles/{name}", delete(admin::delete_role))
        .route("/admin/users", post(admin::add_user))
        .route("/admin/users/{name}", delete(admin::delete_user))
        .route("/admin/queries", post(admin::add_query))
        .route("/admin/queries/{name}", delete(admin::delete_query))
        .route("/admin/queries/{name}/enabled", put(admin::set_enabled))
        .route("/admin/grants", post(admin::add_grant))
        .route("/admin/grants/{role}/{query}", delete(admin::delete_grant))
        .fallback(routes::fallback)
        .method_not_allowed_fallback(routes::wrong_method)
        .with_state(app)
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Policy(#[from] crate::guard::PolicyError),
    #[error(transparent)]
    Data(#[from] crate::relstore::StoreError),
    #[error(transparent)]
    State(#[from] crate::state::StateError),
    #[error("cannot listen on {addr}: {source}")]
    Bind {
        addr: std::net::SocketAddr,
        source: std::io::Error,
    },
    #[error("server failed: {0}")]
    Io(#[from] std::io::Error),
}

/// Loads everything the configuration names, checking it all before binding.
pub fn load(cfg: &GatewayConfig) -> Result<AppState, ServeError> {
    cfg.check()?;
    let policy = match &cfg.policy {
        Some(p) => Policy::load(p)?,
        None => Policy::default(),
    };
    let schemas = crate::relstore::gastros::schemas();
    let tables = crate::relstore::load_dir(&cfg.data_dir, &schemas)?;
    let snapshot = crate::relstore::build_snapshot(tables)?;
    let state = State::load(&cfg.state, &snapshot.schemas(), &policy)?;
    Ok(AppState::new(
        snapshot,
        policy,
        state,
        Some(cfg.state.clone()),
        chrono::Duration::minutes(cfg.session_ttl_minutes),
        Arc::new(SystemClock),
    ))
}

/// Serves until SIGINT or SIGTERM, then lets in-flight requests finish.
pub async fn serve(cfg: GatewayConfig) -> Result<(), ServeError> {
    let app = Arc::new(load(&cfg)?);
    let listener = tokio::net::TcpListener::bind(cfg.bind)
        .await
        .map_err(|source| ServeError::Bind {
            addr: cfg.bind,
            source,
        })?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(app))
        .with_graceful_shutdown(shutdown_signal())
        .await?;
    tracing::info!("stopped");
    Ok(())
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {}
        _ = term => {}
    }
    tracing::info!("shutting down");
}
