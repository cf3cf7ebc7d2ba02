use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use serde::Deserialize;

/// Gateway settings, read from TOML. Every field can be overridden by an
/// `AQG_`-prefixed environment variable (`AQG_BIND`, `AQG_DATA_DIR`,
/// `AQG_POLICY`, `AQG_STATE`, `AQG_SESSION_TTL_MINUTES`, `AQG_LOG`).
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GatewayConfig {
    #[serde(default = "default_bind")]
    pub bind: SocketAddr,
    pub data_dir: PathBuf,
    /// Built-in defaults apply when absent.
    #[serde(default)]
    pub policy: Option<PathBuf>,
    pub state: PathBuf,
    #[serde(default = "default_ttl")]
    pub session_ttl_minutes: i64,
    /// Log file; standard error when absent.
    #[serde(default)]
    pub log: Option<PathBuf>,
}

fn default_bind() -> SocketAddr {
    SocketAddr::from(([127, 0, 0, 1], 8080))
}

fn default_ttl() -> i64 {
    crate::rbac::DEFAULT_SESSION_TTL_MINUTES
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("{what} does not exist: {path}")]
    Missing { what: &'static str, path: PathBuf },
}

impl GatewayConfig {
    pub fn from_toml(text: &str) -> Result<GatewayConfig, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Invalid(e.message().to_string()))
    }

    /// Reads the file, applies environment overrides and checks the result.
    pub fn load(path: &Path) -> Result<GatewayConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = GatewayConfig::from_toml(&text)?;
        cfg.apply_env(|k| std::env::var(k).ok())?;
        // Relative paths are taken from the config file's directory.
        if let Some(base) = path.parent() {
            cfg.rebase(base);
        }
        cfg.check()?;
        Ok(cfg)
    }

    pub fn apply_env(&mut self, var: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        if let Some(v) = var("AQG_BIND") {
            self.bind = v
                .parse()
                .map_err(|_| ConfigError::Invalid(format!("AQG_BIND `{v}` is not host:port")))?;
        }
        if let Some(v) = var("AQG_DATA_DIR") {
            self.data_dir = v.into();
        }
        if let Some(v) = var("AQG_POLICY") {
            self.policy = Some(v.into());
        }
        if let Some(v) = var("AQG_STATE") {
            self.state = v.into();
        }
        if let Some(v) = var("AQG_SESSION_TTL_MINUTES") {
            self.session_ttl_minutes = v.parse().map_err(|_| {
                ConfigError::Invalid(format!("AQG_SESSION_TTL_MINUTES `{v}` is not an integer"))
            })?;
        }
        if let Some(v) = var("AQG_LOG") {
            self.log = Some(v.into());
        }
        Ok(())
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.data_dir);
        fix(&mut self.state);
        if let Some(p) = &mut self.policy {
            fix(p);
        }
        if let Some(p) = &mut self.log {
            fix(p);
        }
    }

    pub fn check(&self) -> Result<(), ConfigError> {
        if self.session_ttl_minutes < 1 {
            return Err(ConfigError::Invalid(
                "session_ttl_minutes must be at least 1".into(),
            ));
        }
        if !self.data_dir.is_dir() {
            return Err(ConfigError::Missing {
                what: "data directory",
                path: self.data_dir.clone(),
            });
        }
        if !self.state.is_file() {
            return Err(ConfigError::Missing {
                what: "state file",
                path: self.state.clone(),
            });
        }
        if let Some(p) = self.policy.as_ref().filter(|p| !p.is_file()) {
            return Err(ConfigError::Missing {
                what: "policy file",
                path: p.clone(),
            });
        }
        Ok(())
    }
}
