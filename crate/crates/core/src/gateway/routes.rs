use std::collections::BTreeMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::QueryRejection;
use axum::extract::{OriginalUri, Path, Query, State as Extract};
use axum::http::{header, HeaderMap, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::{json, Map, Value as Json_};
use sha2::{Digest, Sha256};

use super::error::{method_not_allowed, ApiError};
use super::AppState;
use crate::exec::ResultSet;
use crate::guard::Origin;
use crate::mql::ParamValue;
use crate::pipeline::{self, Param, QueryError};
use crate::rbac::Session;
use crate::registry::DYNAMIC_QUERY_ID;
use crate::relstore::ScalarType;
use crate::xmlout;

type App = Extract<Arc<AppState>>;

pub(crate) fn bearer(headers: &HeaderMap) -> Option<&str> {
    let v = headers.get(header::AUTHORIZATION)?.to_str().ok()?;
    let (scheme, token) = v.split_once(' ')?;
    scheme
        .eq_ignore_ascii_case("bearer")
        .then(|| token.trim())
        .filter(|t| !t.is_empty())
}

pub(crate) fn session(app: &AppState, headers: &HeaderMap) -> Result<Session, ApiError> {
    let token = bearer(headers).ok_or_else(ApiError::unauthenticated)?;
    Ok(app.sessions.validate(&app.state.current().directory, token)?)
}

pub(crate) fn json_object(body: &[u8]) -> Result<Map<String, Json_>, ApiError> {
    match serde_json::from_slice(body) {
        Ok(Json_::Object(m)) => Ok(m),
        Ok(_) => Err(ApiError::bad_request("body must be a JSON object")),
        Err(e) => Err(ApiError::bad_request(format!("malformed JSON: {e}"))),
    }
}

pub(crate) fn string_field<'a>(m: &'a Map<String, Json_>, name: &str) -> Result<&'a str, ApiError> {
    match m.get(name) {
        Some(Json_::String(s)) => Ok(s),
        Some(_) => Err(ApiError::bad_request(format!("field `{name}` must be a string"))),
        None => Err(ApiError::bad_request(format!("missing field `{name}`"))),
    }
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|_| ApiError::internal())
}

fn xml_response(rs: &ResultSet) -> Response {
    let mut r = (StatusCode::OK, xmlout::serialize(rs)).into_response();
    let h = r.headers_mut();
    h.insert(
        header::CONTENT_TYPE,
        HeaderValue::from_static(xmlout::CONTENT_TYPE),
    );
    if let Ok(v) = HeaderValue::from_str(&xmlout::columns_header(rs)) {
        h.insert("x-columns", v);
    }
    r
}

/// One audit line per query request. Parameter values and tokens stay out.
fn audit(s: &Session, query: &str, result: &Result<ResultSet, QueryError>) {
    let (verdict, rows) = match result {
        Ok(rs) => ("accepted".to_string(), rs.rows.len()),
        Err(e) => {
            let rules: Vec<_> = e.violations().iter().map(|v| v.rule.id()).collect();
            let verdict = if rules.is_empty() {
                "error".to_string()
            } else {
                format!("rejected:{}", rules.join("+"))
            };
            (verdict, 0)
        }
    };
    tracing::info!(
        target: "aqg::audit",
        user = s.user_id,
        role = s.role_id,
        query,
        verdict,
        rows,
    );
}

pub(crate) async fn healthz() -> impl IntoResponse {
    Json(json!({ "status": "ok" }))
}

pub(crate) async fn login(app: App, body: Bytes) -> Result<Response, ApiError> {
    let m = json_object(&body)?;
    let username = string_field(&m, "username")?.to_string();
    let password = string_field(&m, "password")?.to_string();
    let role = string_field(&m, "role")?.to_string();
    let app = app.0;
    let session = blocking(move || {
        let st = app.state.current();
        app.sessions
            .authenticate(&st.directory, &username, &password, &role)
    })
    .await??;
    tracing::info!(target: "aqg::audit", user = session.user_id, role = session.role_id, "login");
    Ok(Json(json!({
        "token": session.token,
        "expires_at": session.expires_at,
    }))
    .into_response())
}

pub(crate) async fn logout(app: App, headers: HeaderMap) -> Result<StatusCode, ApiError> {
    session(&app, &headers)?;
    if let Some(t) = bearer(&headers) {
        app.sessions.revoke(t);
    }
    Ok(StatusCode::NO_CONTENT)
}

pub(crate) async fn list_queries(app: App, headers: HeaderMap) -> Result<Response, ApiError> {
    let s = session(&app, &headers)?;
    let st = app.state.current();
    let role = st.directory.role(s.role_id).map(|r| r.name.clone());
    Ok(Json(json!({
        "role": role,
        "dynamic": st.catalog.is_granted(s.role_id, DYNAMIC_QUERY_ID),
        "queries": st.catalog.list_for_role(s.role_id),
    }))
    .into_response())
}

pub(crate) async fn run_stored(
    app: App,
    Path(url_path): Path<String>,
    query: Result<Query<Vec<(String, String)>>, QueryRejection>,
    headers: HeaderMap,
) -> Result<Response, ApiError> {
    let s = session(&app, &headers)?;
    let st = app.state.current();
    let sq = st
        .catalog
        .resolve_path(&url_path)
        .ok_or_else(ApiError::not_found)?
        .clone();
    if !st.catalog.is_granted(s.role_id, sq.id) {
        return Err(ApiError::forbidden());
    }
    let Query(pairs) = query.map_err(|e| ApiError::bad_request(e.body_text()))?;
    let mut raw = BTreeMap::new();
    for (k, v) in pairs {
        if raw.insert(k.clone(), v).is_some() {
            return Err(ApiError::bad_request(format!("parameter `{k}` given twice")));
        }
    }
    let app = app.0;
    let result = blocking(move || pipeline::run_stored(&sq, &raw, &app.snapshot, &app.policy)).await?;
    audit(&s, &url_path, &result);
    Ok(xml_response(&result?))
}

fn dynamic_params(m: &Map<String, Json_>) -> Result<BTreeMap<String, Param>, ApiError> {
    let Some(ps) = m.get("params") else {
        return Ok(BTreeMap::new());
    };
    let Json_::Object(ps) = ps else {
        return Err(ApiError::bad_request("`params` must be an object"));
    };
    let mut out = BTreeMap::new();
    for (name, v) in ps {
        let p = match v {
            Json_::String(s) => Param::Raw(s.clone()),
            Json_::Number(n) => Param::Raw(n.to_string()),
            Json_::Bool(b) => Param::Raw(b.to_string()),
            Json_::Object(o) => {
                let dtype: ScalarType = o
                    .get("type")
                    .cloned()
                    .and_then(|t| serde_json::from_value(t).ok())
                    .ok_or_else(|| {
                        ApiError::bad_request(format!(
                            "parameter `{name}`: `type` must be one of int, str, date, bool"
                        ))
                    })?;
                let value = match o.get("value") {
                    Some(Json_::String(s)) => s.clone(),
                    Some(Json_::Number(n)) => n.to_string(),
                    Some(Json_::Bool(b)) => b.to_string(),
                    _ => {
                        return Err(ApiError::bad_request(format!(
                            "parameter `{name}` needs a scalar `value`"
                        )))
                    }
                };
                Param::Typed(ParamValue::new(dtype, value))
            }
            _ => {
                return Err(ApiError::bad_request(format!(
                    "parameter `{name}` must be a scalar"
                )))
            }
        };
        out.insert(name.clone(), p);
    }
    Ok(out)
}

pub(crate) async fn run_dynamic(app: App, headers: HeaderMap, body: Bytes) -> Result<Response, ApiError> {
    let s = session(&app, &headers)?;
    if !app
        .state
        .current()
        .catalog
        .is_granted(s.role_id, DYNAMIC_QUERY_ID)
    {
        return Err(ApiError::forbidden());
    }
    let m = json_object(&body)?;
    let text = string_field(&m, "query_text")?.to_string();
    let params = dynamic_params(&m)?;
    let app = app.0;
    let (digest, result) = blocking(move || {
        let canonical = crate::mql::parse(&text, &app.snapshot.schemas())
            .map(|q| crate::mql::render(&q))
            .unwrap_or(text.clone());
        let digest = hex::encode(&Sha256::digest(canonical.as_bytes())[..8]);
        let result = pipeline::run_text(&text, &params, &app.snapshot, &app.policy, Origin::Dynamic);
        (digest, result)
    })
    .await?;
    audit(&s, &format!("dynamic:{digest}"), &result);
    Ok(xml_response(&result?))
}

fn is_data_path(path: &str) -> bool {
    path == "/q" || path.starts_with("/q/")
}

/// Unknown paths: the read-only data surface answers 405 to any writing verb;
/// elsewhere an anonymous caller learns nothing beyond 401.
pub(crate) async fn fallback(
    app: App,
    method: Method,
    OriginalUri(uri): OriginalUri,
    headers: HeaderMap,
) -> Response {
    if is_data_path(uri.path()) && method != Method::GET && method != Method::HEAD {
        return method_not_allowed(Some("GET, HEAD"));
    }
    match session(&app, &headers) {
        Ok(_) => ApiError::not_found().into_response(),
        Err(e) => e.into_response(),
    }
}

pub(crate) async fn wrong_method(OriginalUri(uri): OriginalUri) -> Response {
    if is_data_path(uri.path()) {
        method_not_allowed(Some("GET, HEAD"))
    } else {
        method_not_allowed(None)
    }
}
