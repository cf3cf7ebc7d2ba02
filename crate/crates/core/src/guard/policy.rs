use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Policy {
    /// Column base names that may not be referenced, compared case-insensitively.
    pub block_list: BTreeSet<String>,
    /// Substrings forbidden in raw parameter values.
    pub anti_injection_list: Vec<String>,
    pub min_group_size: u64,
    pub apply_block_list_to_stored: bool,
}

impl Default for Policy {
    fn default() -> Policy {
        Policy {
            block_list: ["name", "age", "address", "zipcode"]
                .into_iter()
                .map(String::from)
                .collect(),
            anti_injection_list: ["'", "''", ";", "--", "/*", "*/"]
                .into_iter()
                .map(String::from)
                .collect(),
            min_group_size: 1,
            apply_block_list_to_stored: false,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PolicyError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("policy: {0}")]
    Invalid(String),
}

impl Policy {
    pub fn from_toml(text: &str) -> Result<Policy, PolicyError> {
        let p: Policy = toml::from_str(text).map_err(|e| PolicyError::Invalid(e.to_string()))?;
        p.check()?;
        Ok(p)
    }

    pub fn load(path: &Path) -> Result<Policy, PolicyError> {
        let text = std::fs::read_to_string(path).map_err(|e| PolicyError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Policy::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("policy serializes")
    }

    pub fn check(&self) -> Result<(), PolicyError> {
        if self.min_group_size < 1 {
            return Err(PolicyError::Invalid("min_group_size must be at least 1".into()));
        }
        if self.anti_injection_list.iter().any(String::is_empty) {
            return Err(PolicyError::Invalid(
                "anti_injection_list has an empty entry".into(),
            ));
        }
        Ok(())
    }

    pub fn is_blocked(&self, identifier: &str) -> bool {
        self.block_list.iter().any(|b| b.eq_ignore_ascii_case(identifier))
    }

    /// The injection check: `true` when `raw` contains no forbidden substring.
    pub fn check_injection(&self, raw: &str) -> bool {
        !self
            .anti_injection_list
            .iter()
            .any(|bad| raw.contains(bad.as_str()))
    }
}

impl crate::mql::ParamScreen for Policy {
    fn admits(&self, raw: &str) -> bool {
        self.check_injection(raw)
    }
}
