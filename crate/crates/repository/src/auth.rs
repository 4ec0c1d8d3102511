use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Creator,
    Tutor,
    Learner,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Principal {
    pub name: String,
    pub role: Role,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cohort_id: Option<String>,
}

/// Cohort assigned to sessions uploaded by a learner without one.
pub const DEFAULT_COHORT: &str = "default";

impl Principal {
    pub fn cohort(&self) -> &str {
        self.cohort_id.as_deref().unwrap_or(DEFAULT_COHORT)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TokenFileError {
    #[error("cannot read tokens file: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid tokens file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("tokens file defines no tokens")]
    Empty,
}

/// Static bearer tokens: a JSON object mapping token to principal, e.g.
/// `{"s3cret": {"name": "ada", "role": "creator"}}`.
#[derive(Clone, Debug, Default)]
pub struct TokenTable(BTreeMap<String, Principal>);

impl TokenTable {
    pub fn new(tokens: BTreeMap<String, Principal>) -> Self {
        Self(tokens)
    }

    pub fn from_json(text: &str) -> Result<Self, TokenFileError> {
        let map: BTreeMap<String, Principal> = serde_json::from_str(text)?;
        if map.is_empty() {
            return Err(TokenFileError::Empty);
        }
        Ok(Self(map))
    }

    pub fn load(path: &Path) -> Result<Self, TokenFileError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn get(&self, token: &str) -> Option<&Principal> {
        self.0.get(token)
    }

    /// Resolves an `Authorization` header value.
    pub fn authenticate(&self, header: Option<&str>) -> Option<&Principal> {
        let token = header?.strip_prefix("Bearer ")?.trim();
        self.get(token)
    }
}
