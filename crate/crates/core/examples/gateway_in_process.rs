//! Drives the HTTP router in-process: log in, list queries, run one stored and
//! one dynamic query, and try a few things that are refused.
//!
//! To serve over TCP instead use `ctl serve --config gateway.toml`.

use std::sync::Arc;

use aqg::gateway::{router, AppState};
use aqg::guard::Policy;
use aqg::relstore::gastros;
use aqg::state::{seed_state_with, ORG_A_ROLE, SEED_ORG_A};
use aqg::synthgen::{generate_dataset, GenConfig};
use axum::body::Body;
use axum::http::{header, Request};
use axum::Router;
use serde_json::json;
use tower::ServiceExt;

async fn send(
    app: &Router,
    method: &str,
    uri: &str,
    token: Option<&str>,
    body: Option<serde_json::Value>,
) -> String {
    let mut req = Request::builder().method(method).uri(uri);
    if let Some(t) = token {
        req = req.header(header::AUTHORIZATION, format!("Bearer {t}"));
    }
    let body = body.map_or(Body::empty(), |b| Body::from(b.to_string()));
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let cols = resp
        .headers()
        .get("x-columns")
        .map(|v| v.to_str().unwrap().to_string());
    let bytes = axum::body::to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    let text = String::from_utf8_lossy(&bytes).into_owned();
    println!(
        "{method} {uri} -> {status}{}",
        cols.map(|c| format!("  [X-Columns: {c}]")).unwrap_or_default()
    );
    println!("{}\n", text.trim_end());
    text
}

#[tokio::main(flavor = "current_thread")]
async fn main() {
    let snapshot = generate_dataset(&GenConfig::default())
        .unwrap()
        .into_snapshot()
        .unwrap();
    let policy = Policy::default();
    let state = seed_state_with(42, 1000, &gastros::schemas(), &policy).unwrap();
    let app = router(Arc::new(AppState::ephemeral(snapshot, policy, state)));

    let (user, password) = SEED_ORG_A;
    let login = send(
        &app,
        "POST",
        "/auth/login",
        None,
        Some(json!({ "username": user, "password": password, "role": ORG_A_ROLE })),
    )
    .await;
    let token: serde_json::Value = serde_json::from_str(&login).unwrap();
    let token = token["token"].as_str().unwrap().to_string();
    let t = Some(token.as_str());

    send(&app, "GET", "/queries", t, None).await;
    send(&app, "GET", "/q/queryone?start=2010-1-1&end=2010-12-30", t, None).await;
    send(&app, "GET", "/q/queryfour", t, None).await;
    send(
        &app,
        "POST",
        "/dynamic",
        t,
        Some(json!({
            "query_text": "SELECT Gender, COUNT(*) AS n FROM patient WHERE DOB < :d GROUP BY Gender",
            "params": { "d": { "type": "date", "value": "1950-01-01" } }
        })),
    )
    .await;
    send(
        &app,
        "POST",
        "/dynamic",
        t,
        Some(json!({ "query_text": "SELECT Name FROM patient" })),
    )
    .await;
    send(&app, "DELETE", "/q/queryone", t, None).await;
    send(&app, "GET", "/queries", None, None).await;
}
