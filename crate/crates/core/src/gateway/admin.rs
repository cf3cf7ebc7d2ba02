use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State as Extract};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::{json, Value as Json_};

use super::error::ApiError;
use super::routes::{json_object, session, string_field};
use super::AppState;
use crate::rbac::{PasswordRecord, Session, ADMIN_ROLE};
use crate::registry::{Catalog, QueryDraft, DYNAMIC_QUERY_ID};
use crate::state::{MutateError, State};

type App = Extract<Arc<AppState>>;

fn admin(app: &AppState, headers: &HeaderMap) -> Result<Session, ApiError> {
    let s = session(app, headers)?;
    let st = app.state.current();
    match st.directory.role(s.role_id) {
        Some(r) if r.name == ADMIN_ROLE => Ok(s),
        _ => Err(ApiError::forbidden()),
    }
}

fn mutate<T>(app: &AppState, f: impl FnOnce(&mut State) -> Result<T, ApiError>) -> Result<T, ApiError> {
    app.state.mutate(f).map_err(|e| match e {
        MutateError::Rejected(e) => e,
        MutateError::Persist(e) => {
            tracing::error!(error = %e, "state not saved");
            ApiError::internal()
        }
    })
}

fn created(body: Json_) -> Response {
    (StatusCode::CREATED, Json(body)).into_response()
}

/// A query named by its name, by numeric id, or `dynamic` for the dynamic grant.
fn query_ref(cat: &Catalog, r: &str) -> Option<u64> {
    if r == "dynamic" {
        return Some(DYNAMIC_QUERY_ID);
    }
    cat.by_name(r)
        .map(|q| q.id)
        .or_else(|| r.parse().ok().filter(|id| cat.get(*id).is_some()))
}

pub(crate) async fn add_role(app: App, headers: HeaderMap, body: Bytes) -> Result<Response, ApiError> {
    let who = admin(&app, &headers)?;
    let m = json_object(&body)?;
    let name = string_field(&m, "name")?;
    let id = mutate(&app, |s| Ok(s.directory.add_role(name)?))?;
    tracing::info!(target: "aqg::audit", user = who.user_id, role_added = id);
    Ok(created(json!({ "id": id, "name": name })))
}

pub(crate) async fn delete_role(
    app: App,
    headers: HeaderMap,
    Path(name): Path<String>,
) -> Result<Response, ApiError> {
    let who = admin(&app, &headers)?;
    let id = mutate(&app, |s| Ok(s.delete_role(&name)?))?;
    app.sessions.drop_role(id);
    tracing::info!(target: "aqg::audit", user = who.user_id, role_deleted = id);
    Ok(Json(json!({ "id": id })).into_response())
}

pub(crate) async fn add_user(app: App, headers: HeaderMap, body: Bytes) -> Result<Response, ApiError> {
    let who = admin(&app, &headers)?;
    let m = json_object(&body)?;
    let username = string_field(&m, "username")?.to_string();
    let password = string_field(&m, "password")?.to_string();
    if password.is_empty() {
        return Err(ApiError::bad_request("password must not be empty"));
    }
    let roles: Vec<String> = match m.get("roles") {
        None => Vec::new(),
        Some(v) => serde_json::from_value(v.clone())
            .map_err(|_| ApiError::bad_request("`roles` must be a list of role names"))?,
    };
    let record = tokio::task::spawn_blocking(move || PasswordRecord::generate(&password))
        .await
        .map_err(|_| ApiError::internal())?;
    let id = mutate(&app, |s| {
        let roles: Vec<&str> = roles.iter().map(String::as_str).collect();
        Ok(s.directory.add_user(&username, record, &roles)?)
    })?;
    tracing::info!(target: "aqg::audit", user = who.user_id, user_added = id);
    Ok(created(json!({ "id": id, "username": username })))
}

pub(crate) async fn delete_user(
    app: App,
    headers: HeaderMap,
    Path(name): Path<String>,
) -> Result<Response, ApiError> {
    let who = admin(&app, &headers)?;
    let id = mutate(&app, |s| {
        if s.directory
            .user_by_name(&name)
            .is_some_and(|u| u.id == who.user_id)
        {
            return Err(ApiError::new(
                StatusCode::CONFLICT,
                "SELF_DELETE",
                "administrators cannot delete their own account",
            ));
        }
        Ok(s.directory.delete_user(&name)?)
    })?;
    app.sessions.drop_user(id);
    tracing::info!(target: "aqg::audit", user = who.user_id, user_deleted = id);
    Ok(Json(json!({ "id": id })).into_response())
}

pub(crate) async fn add_query(app: App, headers: HeaderMap, body: Bytes) -> Result<Response, ApiError> {
    let who = admin(&app, &headers)?;
    let draft: QueryDraft =
        serde_json::from_slice(&body).map_err(|e| ApiError::bad_request(format!("malformed query: {e}")))?;
    let schemas = app.snapshot.schemas();
    let id = mutate(&app, |s| Ok(s.catalog.register(&draft, &schemas, &app.policy)?))?;
    tracing::info!(target: "aqg::audit", user = who.user_id, query_added = id);
    Ok(created(
        json!({ "id": id, "name": draft.name, "url_path": draft.url_path }),
    ))
}

pub(crate) async fn delete_query(
    app: App,
    headers: HeaderMap,
    Path(name): Path<String>,
) -> Result<Response, ApiError> {
    let who = admin(&app, &headers)?;
    let id = mutate(&app, |s| {
        let id = query_ref(&s.catalog, &name)
            .filter(|&id| id != DYNAMIC_QUERY_ID)
            .ok_or_else(ApiError::not_found)?;
        s.catalog.remove(id)?;
        Ok(id)
    })?;
    tracing::info!(target: "aqg::audit", user = who.user_id, query_deleted = id);
    Ok(Json(json!({ "id": id })).into_response())
}

pub(crate) async fn set_enabled(
    app: App,
    headers: HeaderMap,
    Path(name): Path<String>,
    body: Bytes,
) -> Result<Response, ApiError> {
    admin(&app, &headers)?;
    let m = json_object(&body)?;
    let Some(Json_::Bool(enabled)) = m.get("enabled") else {
        return Err(ApiError::bad_request("field `enabled` must be a boolean"));
    };
    let id = mutate(&app, |s| {
        let id = query_ref(&s.catalog, &name)
            .filter(|&id| id != DYNAMIC_QUERY_ID)
            .ok_or_else(ApiError::not_found)?;
        s.catalog.set_enabled(id, *enabled)?;
        Ok(id)
    })?;
    Ok(Json(json!({ "id": id, "enabled": enabled })).into_response())
}

pub(crate) async fn add_grant(app: App, headers: HeaderMap, body: Bytes) -> Result<Response, ApiError> {
    let who = admin(&app, &headers)?;
    let m = json_object(&body)?;
    let role = string_field(&m, "role")?;
    let query = match m.get("query") {
        Some(Json_::String(s)) => s.clone(),
        Some(Json_::Number(n)) => n.to_string(),
        _ => return Err(ApiError::bad_request("field `query` must be a query name or id")),
    };
    let (role_id, query_id, fresh) = mutate(&app, |s| {
        let role_id = s.directory.role_by_name(role).ok_or_else(ApiError::not_found)?.id;
        let query_id = query_ref(&s.catalog, &query).ok_or_else(ApiError::not_found)?;
        let fresh = s.catalog.grant(role_id, query_id)?;
        Ok((role_id, query_id, fresh))
    })?;
    tracing::info!(target: "aqg::audit", user = who.user_id, grant_role = role_id, grant_query = query_id);
    let body = json!({ "role_id": role_id, "query_id": query_id });
    Ok(if fresh {
        created(body)
    } else {
        Json(body).into_response()
    })
}

pub(crate) async fn delete_grant(
    app: App,
    headers: HeaderMap,
    Path((role, query)): Path<(String, String)>,
) -> Result<StatusCode, ApiError> {
    let who = admin(&app, &headers)?;
    mutate(&app, |s| {
        let role_id = s
            .directory
            .role_by_name(&role)
            .ok_or_else(ApiError::not_found)?
            .id;
        let query_id = query_ref(&s.catalog, &query).ok_or_else(ApiError::not_found)?;
        if s.catalog.revoke(role_id, query_id) {
            Ok(())
        } else {
            Err(ApiError::not_found())
        }
    })?;
    tracing::info!(target: "aqg::audit", user = who.user_id, revoked = %format!("{role}/{query}"));
    Ok(StatusCode::NO_CONTENT)
}
