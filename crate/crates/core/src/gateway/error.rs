use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;

use crate::guard::Violation;
use crate::pipeline::QueryError;
use crate::rbac::{AuthError, Deny, RbacError};
use crate::registry::RegistryError;

/// A structured error response: `{"code", "message", "violations"}`.
#[derive(Debug, Clone, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<Violation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub offset: Option<usize>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> ApiError {
        ApiError {
            status,
            code,
            message: message.into(),
            violations: Vec::new(),
            offset: None,
        }
    }

    pub fn bad_request(message: impl Into<String>) -> ApiError {
        ApiError::new(StatusCode::BAD_REQUEST, "BAD_REQUEST", message)
    }

    pub fn unauthenticated() -> ApiError {
        ApiError::new(
            StatusCode::UNAUTHORIZED,
            "UNAUTHENTICATED",
            "missing, unknown or expired session",
        )
    }

    pub fn forbidden() -> ApiError {
        ApiError::new(StatusCode::FORBIDDEN, "FORBIDDEN", "not permitted for this role")
    }

    pub fn not_found() -> ApiError {
        ApiError::new(StatusCode::NOT_FOUND, "NOT_FOUND", "no such resource")
    }

    pub fn internal() -> ApiError {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "INTERNAL", "internal error")
    }

    fn policy(violations: Vec<Violation>) -> ApiError {
        ApiError {
            violations,
            ..ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "POLICY_VIOLATION",
                "query rejected by policy",
            )
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut r = (self.status, Json(&self)).into_response();
        if self.status == StatusCode::UNAUTHORIZED {
            r.headers_mut()
                .insert(header::WWW_AUTHENTICATE, HeaderValue::from_static("Bearer"));
        }
        r
    }
}

pub(crate) fn method_not_allowed(allow: Option<&'static str>) -> Response {
    let mut r = ApiError::new(
        StatusCode::METHOD_NOT_ALLOWED,
        "METHOD_NOT_ALLOWED",
        "method not allowed on this resource",
    )
    .into_response();
    if let Some(a) = allow {
        r.headers_mut().insert(header::ALLOW, HeaderValue::from_static(a));
    }
    r
}

impl From<Deny> for ApiError {
    fn from(d: Deny) -> ApiError {
        match d {
            Deny::Unauthenticated => ApiError::unauthenticated(),
            Deny::Forbidden => ApiError::forbidden(),
        }
    }
}

impl From<AuthError> for ApiError {
    fn from(e: AuthError) -> ApiError {
        match e {
            AuthError::BadCredentials => {
                ApiError::new(StatusCode::UNAUTHORIZED, "BAD_CREDENTIALS", e.to_string())
            }
            AuthError::RoleNotHeld => ApiError::new(StatusCode::FORBIDDEN, "ROLE_NOT_HELD", e.to_string()),
        }
    }
}

impl From<QueryError> for ApiError {
    fn from(e: QueryError) -> ApiError {
        let violations = e.violations();
        if !violations.is_empty() {
            return ApiError::policy(violations);
        }
        match e {
            QueryError::Parse(p) => ApiError {
                offset: p.offset(),
                ..ApiError::new(StatusCode::BAD_REQUEST, "PARSE_ERROR", p.to_string())
            },
            QueryError::Bind(b) => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "PARAMETER_ERROR", b.to_string())
            }
            QueryError::Policy(_) => unreachable!("policy errors carry violations"),
            QueryError::Exec(x) => {
                tracing::error!(error = %x, "execution failed");
                ApiError::internal()
            }
        }
    }
}

impl From<RbacError> for ApiError {
    fn from(e: RbacError) -> ApiError {
        let (status, code) = match e {
            RbacError::DuplicateRole(_) | RbacError::DuplicateUser(_) => (StatusCode::CONFLICT, "CONFLICT"),
            RbacError::ProtectedRole => (StatusCode::CONFLICT, "PROTECTED_ROLE"),
            RbacError::UnknownRole(_) | RbacError::UnknownUser(_) => (StatusCode::NOT_FOUND, "NOT_FOUND"),
            RbacError::BadName(_) => (StatusCode::BAD_REQUEST, "BAD_REQUEST"),
        };
        ApiError::new(status, code, e.to_string())
    }
}

impl From<RegistryError> for ApiError {
    fn from(e: RegistryError) -> ApiError {
        match e {
            RegistryError::Policy(v) => ApiError::policy(v),
            RegistryError::DuplicatePath(_) | RegistryError::DuplicateName(_) => {
                ApiError::new(StatusCode::CONFLICT, "CONFLICT", e.to_string())
            }
            RegistryError::UnknownQuery(_) => ApiError::not_found(),
            RegistryError::Parse(p) => ApiError {
                offset: p.offset(),
                ..ApiError::new(StatusCode::BAD_REQUEST, "PARSE_ERROR", p.to_string())
            },
            RegistryError::BadPath(_) | RegistryError::BadName(_) | RegistryError::Params(_) => {
                ApiError::bad_request(e.to_string())
            }
        }
    }
}
