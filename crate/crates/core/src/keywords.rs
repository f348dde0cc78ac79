//! Glossary-driven keyword classifier.
//!
//! A sentence is positive when any glossary phrase occurs in it as a
//! contiguous run of whole tokens. Matching is case-insensitive and uses the
//! same Unicode-aware tokenization as the feature extractor; there is no
//! stemming.

use std::collections::{BTreeSet, HashMap};
use std::io::BufRead;
use std::path::Path;

use crate::label::Label;
use crate::text::tokens;

#[derive(Debug, thiserror::Error)]
pub enum GlossaryError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("glossary {0:?} has no keywords")]
    Empty(String),
    #[error("glossary {name:?} line {line}: phrase has no word characters")]
    NoTokens { name: String, line: usize },
    #[error("no glossaries to combine")]
    NothingToUnion,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Glossary {
    name: String,
    keywords: BTreeSet<String>,
    // first token -> token sequences starting with it
    phrases: HashMap<String, Vec<Vec<String>>>,
}

impl Glossary {
    /// Builds a glossary from raw phrases: trimmed, lowercased, deduplicated.
    pub fn new<I, S>(name: impl Into<String>, phrases: I) -> Result<Glossary, GlossaryError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let name = name.into();
        let mut keywords = BTreeSet::new();
        for (i, raw) in phrases.into_iter().enumerate() {
            let phrase = raw.as_ref().trim().to_lowercase();
            if phrase.is_empty() {
                continue;
            }
            if tokens(&phrase).is_empty() {
                return Err(GlossaryError::NoTokens {
                    name,
                    line: i + 1,
                });
            }
            keywords.insert(phrase);
        }
        Self::from_keywords(name, keywords)
    }

    fn from_keywords(name: String, keywords: BTreeSet<String>) -> Result<Glossary, GlossaryError> {
        if keywords.is_empty() {
            return Err(GlossaryError::Empty(name));
        }
        let mut phrases: HashMap<String, Vec<Vec<String>>> = HashMap::new();
        for k in &keywords {
            let toks = tokens(k);
            phrases.entry(toks[0].clone()).or_default().push(toks);
        }
        Ok(Glossary {
            name,
            keywords,
            phrases,
        })
    }

    /// One phrase per line; `#` comment lines and blank lines are skipped.
    pub fn from_reader<R: BufRead>(name: impl Into<String>, reader: R) -> Result<Glossary, GlossaryError> {
        let name = name.into();
        let mut keywords = BTreeSet::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let phrase = line.trim();
            if phrase.is_empty() || phrase.starts_with('#') {
                continue;
            }
            if tokens(phrase).is_empty() {
                return Err(GlossaryError::NoTokens { name, line: i + 1 });
            }
            keywords.insert(phrase.to_lowercase());
        }
        Self::from_keywords(name, keywords)
    }

    pub fn load(path: impl AsRef<Path>, name: impl Into<String>) -> Result<Glossary, GlossaryError> {
        let file = std::fs::File::open(path)?;
        Self::from_reader(name, std::io::BufReader::new(file))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn keywords(&self) -> &BTreeSet<String> {
        &self.keywords
    }

    pub fn len(&self) -> usize {
        self.keywords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keywords.is_empty()
    }

    pub fn matches(&self, sentence: &str) -> bool {
        let toks = tokens(sentence);
        toks.iter().enumerate().any(|(i, t)| {
            self.phrases.get(t).is_some_and(|candidates| {
                candidates
                    .iter()
                    .any(|p| toks.len() - i >= p.len() && toks[i..i + p.len()] == p[..])
            })
        })
    }

    pub fn classify(&self, sentence: &str) -> Label {
        if self.matches(sentence) {
            Label::Positive
        } else {
            Label::Negative
        }
    }
}

/// Set union of several glossaries, named by joining their names with `+`.
pub fn union_glossaries(glossaries: &[Glossary]) -> Result<Glossary, GlossaryError> {
    match glossaries {
        [] => Err(GlossaryError::NothingToUnion),
        [only] => Ok(only.clone()),
        many => {
            let name = many.iter().map(Glossary::name).collect::<Vec<_>>().join("+");
            let keywords = many.iter().flat_map(|g| g.keywords.iter().cloned()).collect();
            Glossary::from_keywords(name, keywords)
        }
    }
}

pub fn classify_keywords(sentence: &str, glossary: &Glossary) -> Label {
    glossary.classify(sentence)
}
