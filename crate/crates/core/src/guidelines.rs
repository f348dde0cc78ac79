//! Versioned annotation guidelines with stable rule ids (`1`, `1b`, `1b.ii`, ...)
//! that annotators can cite next to a manual label.

use std::path::Path;

use serde::{Deserialize, Serialize};

const BUNDLED: &str = include_str!("../guidelines/labeling-rules-v1.json");

#[derive(Debug, thiserror::Error)]
pub enum GuidelineError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid guideline file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("duplicate rule id {0:?}")]
    DuplicateRule(String),
    #[error("unknown rule id {0:?}")]
    UnknownRule(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rule {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<Rule>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Guidelines {
    pub version: String,
    pub title: String,
    pub rules: Vec<Rule>,
}

impl Guidelines {
    /// The rule set shipped with the crate.
    pub fn bundled() -> Guidelines {
        Self::from_json(BUNDLED).expect("bundled guidelines are valid")
    }

    pub fn from_json(text: &str) -> Result<Guidelines, GuidelineError> {
        let g: Guidelines = serde_json::from_str(text)?;
        let mut seen = std::collections::HashSet::new();
        for rule in g.iter() {
            if !seen.insert(rule.id.as_str()) {
                return Err(GuidelineError::DuplicateRule(rule.id.clone()));
            }
        }
        Ok(g)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Guidelines, GuidelineError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Depth-first walk over every rule.
    pub fn iter(&self) -> impl Iterator<Item = &Rule> {
        let mut stack: Vec<&Rule> = self.rules.iter().rev().collect();
        std::iter::from_fn(move || {
            let rule = stack.pop()?;
            stack.extend(rule.children.iter().rev());
            Some(rule)
        })
    }

    pub fn find(&self, id: &str) -> Option<&Rule> {
        self.iter().find(|r| r.id == id)
    }

    /// Checks that every cited id exists.
    pub fn check_citations<'a, I: IntoIterator<Item = &'a str>>(&self, ids: I) -> Result<(), GuidelineError> {
        for id in ids {
            if self.find(id).is_none() {
                return Err(GuidelineError::UnknownRule(id.to_string()));
            }
        }
        Ok(())
    }
}
