use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Binary relevance label. `Negative` orders before `Positive`; that order is
/// the class index used by the classifier and the samplers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Negative, Label::Positive];

    pub fn index(self) -> usize {
        match self {
            Label::Negative => 0,
            Label::Positive => 1,
        }
    }

    pub fn from_index(idx: usize) -> Option<Label> {
        Label::ALL.get(idx).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Negative => "negative",
            Label::Positive => "positive",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid label {0:?}: expected \"positive\" or \"negative\"")]
pub struct ParseLabelError(pub String);

impl FromStr for Label {
    type Err = ParseLabelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "positive" | "pos" | "1" => Ok(Label::Positive),
            "negative" | "neg" | "0" => Ok(Label::Negative),
            _ => Err(ParseLabelError(s.to_string())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display() {
        assert_eq!("positive".parse::<Label>().unwrap(), Label::Positive);
        assert_eq!(" NEG ".parse::<Label>().unwrap(), Label::Negative);
        assert!("maybe".parse::<Label>().is_err());
        assert_eq!(Label::Positive.to_string(), "positive");
    }

    #[test]
    fn json_form() {
        assert_eq!(serde_json::to_string(&Label::Negative).unwrap(), "\"negative\"");
        let l: Label = serde_json::from_str("\"positive\"").unwrap();
        assert_eq!(l, Label::Positive);
    }
}
