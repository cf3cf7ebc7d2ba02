//! An in-process gateway driven through `tower::ServiceExt::oneshot`.

use std::sync::Arc;

use aqg::gateway::{router, AppState};
use aqg::guard::Policy;
use aqg::relstore::{gastros, Snapshot};
use aqg::state::{seed_state_with, State};
use axum::body::Body;
use axum::http::{header, HeaderMap, Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value as Json};
use tower::ServiceExt;

pub struct Reply {
    pub status: StatusCode,
    pub headers: HeaderMap,
    pub body: String,
}

impl Reply {
    pub fn json(&self) -> Json {
        serde_json::from_str(&self.body).unwrap_or_else(|e| panic!("{e}: {}", self.body))
    }

    pub fn code(&self) -> String {
        self.json()["code"].as_str().unwrap_or_default().to_string()
    }
}

pub struct Gateway {
    pub app: Arc<AppState>,
    router: Router,
}

/// The seeded state with cheap password hashing.
pub fn seeded(policy: &Policy) -> State {
    seed_state_with(42, 1000, &gastros::schemas(), policy).unwrap()
}

impl Gateway {
    pub fn new(snapshot: Snapshot, policy: Policy) -> Gateway {
        let state = seeded(&policy);
        Gateway::from_app(AppState::ephemeral(snapshot, policy, state))
    }

    pub fn from_app(app: AppState) -> Gateway {
        let app = Arc::new(app);
        Gateway {
            router: router(app.clone()),
            app,
        }
    }

    pub async fn call(&self, method: Method, uri: &str, token: Option<&str>, body: Option<Json>) -> Reply {
        let mut req = Request::builder().method(method).uri(uri);
        if let Some(t) = token {
            req = req.header(header::AUTHORIZATION, format!("Bearer {t}"));
        }
        let body = match body {
            Some(b) => {
                req = req.header(header::CONTENT_TYPE, "application/json");
                Body::from(b.to_string())
            }
            None => Body::empty(),
        };
        let resp = self
            .router
            .clone()
            .oneshot(req.body(body).unwrap())
            .await
            .unwrap();
        let status = resp.status();
        let headers = resp.headers().clone();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        Reply {
            status,
            headers,
            body: String::from_utf8(bytes.to_vec()).unwrap(),
        }
    }

    pub async fn get(&self, uri: &str, token: Option<&str>) -> Reply {
        self.call(Method::GET, uri, token, None).await
    }

    pub async fn post(&self, uri: &str, token: Option<&str>, body: Json) -> Reply {
        self.call(Method::POST, uri, token, Some(body)).await
    }

    pub async fn delete(&self, uri: &str, token: Option<&str>) -> Reply {
        self.call(Method::DELETE, uri, token, None).await
    }

    pub async fn login(&self, user: &str, password: &str, role: &str) -> String {
        let r = self
            .post(
                "/auth/login",
                None,
                json!({ "username": user, "password": password, "role": role }),
            )
            .await;
        assert_eq!(r.status, StatusCode::OK, "{}", r.body);
        r.json()["token"].as_str().unwrap().to_string()
    }

    pub async fn admin(&self) -> String {
        let (u, p) = aqg::state::SEED_ADMIN;
        self.login(u, p, aqg::rbac::ADMIN_ROLE).await
    }

    pub async fn org_a(&self) -> String {
        let (u, p) = aqg::state::SEED_ORG_A;
        self.login(u, p, aqg::state::ORG_A_ROLE).await
    }
}

/// Every route with the method it answers to.
pub const ROUTES: &[(&str, &str)] = &[
    ("POST", "/auth/logout"),
    ("GET", "/queries"),
    ("GET", "/q/queryone?start=2010-1-1&end=2010-12-30"),
    ("GET", "/q/queryfour"),
    ("GET", "/q/nosuchquery"),
    ("POST", "/dynamic"),
    ("POST", "/admin/roles"),
    ("DELETE", "/admin/roles/organization_a"),
    ("POST", "/admin/users"),
    ("DELETE", "/admin/users/org_a_user"),
    ("POST", "/admin/queries"),
    ("DELETE", "/admin/queries/q1"),
    ("PUT", "/admin/queries/q1/enabled"),
    ("POST", "/admin/grants"),
    ("DELETE", "/admin/grants/organization_a/q1"),
    ("GET", "/no/such/route"),
];
