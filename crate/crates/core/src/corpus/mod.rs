//! Sentence records and the operations that produce them from labeled
//! documents: splitting, label propagation, sampling and rater consensus.

mod sampling;
mod sentences;
mod split;

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::label::Label;

pub use sampling::{prediction_based_sample, sample_balanced};
pub use sentences::{split_sentences, ABBREVIATIONS};
pub use split::{ClassCounts, Split, SplitSpec};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("document {0:?} has no label")]
    UnlabeledDocument(String),
    #[error("not enough {class} records: need {needed}, have {available}")]
    InsufficientClass {
        class: Label,
        needed: usize,
        available: usize,
    },
    #[error("predicted-{class} pool empty")]
    PredictedPoolEmpty { class: Label },
    #[error("predicted-{class} pool has {available} records, need {needed}")]
    PredictedPoolTooSmall {
        class: Label,
        needed: usize,
        available: usize,
    },
    #[error("{predictions} predictions for {records} records")]
    PredictionCountMismatch { records: usize, predictions: usize },
    #[error("consensus needs at least one rater label")]
    NoRaterLabels,
    #[error("record {id:?}: {reason}")]
    InvalidRecord { id: String, reason: String },
    #[error("document {0:?} assigned to more than one split")]
    SplitOverlap(String),
    #[error("split fractions must be in [0, 1] and sum to at most 1")]
    InvalidFractions,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Wiki,
    Tenk,
    Claims,
    #[default]
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Heuristic,
    Manual,
    ActiveLearning,
    Consensus,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RaterLabel {
    pub rater_id: String,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceRecord {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub source: Source,
    /// Empty when the sentence has no source document; `null` reads as empty.
    #[serde(default, deserialize_with = "null_as_empty")]
    pub doc_id: String,
    pub label: Option<Label>,
    pub provenance: Provenance,
    #[serde(default)]
    pub rater_labels: Option<Vec<RaterLabel>>,
    /// Guideline rule citations attached by the annotator, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule_ids: Option<Vec<String>>,
}

fn null_as_empty<'de, D: serde::Deserializer<'de>>(d: D) -> Result<String, D::Error> {
    Ok(Option::<String>::deserialize(d)?.unwrap_or_default())
}

impl SentenceRecord {
    pub fn new(id: impl Into<String>, text: impl Into<String>, provenance: Provenance) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            source: Source::Other,
            doc_id: String::new(),
            label: None,
            provenance,
            rater_labels: None,
            rule_ids: None,
        }
    }

    pub fn with_label(mut self, label: Label) -> Self {
        self.label = Some(label);
        self
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        let invalid = |reason: &str| CorpusError::InvalidRecord {
            id: self.id.clone(),
            reason: reason.to_string(),
        };
        match self.provenance {
            Provenance::Consensus => {
                let raters = self.rater_labels.as_ref().map_or(0, Vec::len);
                if raters < 2 {
                    return Err(invalid("consensus label needs at least two rater labels"));
                }
                if self.label.is_none() {
                    return Err(invalid("consensus record has no label"));
                }
            }
            Provenance::Heuristic => {
                if self.doc_id.is_empty() || self.label.is_none() {
                    return Err(invalid("heuristic label needs a labeled origin document"));
                }
            }
            Provenance::Manual | Provenance::ActiveLearning => {}
        }
        Ok(())
    }
}

/// A document with a document-level relevance label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub source: Source,
    pub label: Option<Label>,
}

/// Splits every document into sentences, each inheriting its document's
/// label. Record ids are `<doc_id>-<sentence index>`.
pub fn propagate_labels(docs: &[Document]) -> Result<Vec<SentenceRecord>, CorpusError> {
    let mut out = Vec::new();
    for doc in docs {
        let label = doc
            .label
            .ok_or_else(|| CorpusError::UnlabeledDocument(doc.id.clone()))?;
        for (i, sentence) in split_sentences(&doc.text).into_iter().enumerate() {
            out.push(SentenceRecord {
                id: format!("{}-{}", doc.id, i),
                text: sentence,
                source: doc.source,
                doc_id: doc.id.clone(),
                label: Some(label),
                provenance: Provenance::Heuristic,
                rater_labels: None,
                rule_ids: None,
            });
        }
    }
    Ok(out)
}

/// Negative only when every rater said negative.
pub fn consensus_label(labels: &[Label]) -> Result<Label, CorpusError> {
    if labels.is_empty() {
        return Err(CorpusError::NoRaterLabels);
    }
    if labels.iter().all(|&l| l == Label::Negative) {
        Ok(Label::Negative)
    } else {
        Ok(Label::Positive)
    }
}

/// Resolves rater labels on each record. Two or more raters produce a
/// consensus record; a single rater's label is taken as a manual label.
/// Records without rater labels pass through unchanged.
pub fn apply_consensus(records: Vec<SentenceRecord>) -> Vec<SentenceRecord> {
    records
        .into_iter()
        .map(|mut r| {
            let labels: Vec<Label> = r
                .rater_labels
                .iter()
                .flatten()
                .map(|rl| rl.label)
                .collect();
            if let Ok(label) = consensus_label(&labels) {
                r.label = Some(label);
                r.provenance = if labels.len() >= 2 {
                    Provenance::Consensus
                } else {
                    Provenance::Manual
                };
            }
            r
        })
        .collect()
}

/// Reads one JSON record per line; blank lines are skipped.
pub fn read_records<R: BufRead>(reader: R) -> Result<Vec<SentenceRecord>, CorpusError> {
    read_jsonl(reader)
}

pub fn read_documents<R: BufRead>(reader: R) -> Result<Vec<Document>, CorpusError> {
    read_jsonl(reader)
}

fn read_jsonl<R: BufRead, T: serde::de::DeserializeOwned>(reader: R) -> Result<Vec<T>, CorpusError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|source| CorpusError::Json {
            line: i + 1,
            source,
        })?;
        out.push(value);
    }
    Ok(out)
}

pub fn write_records<'a, W, I>(out: &mut W, records: I) -> io::Result<()>
where
    W: Write + ?Sized,
    I: IntoIterator<Item = &'a SentenceRecord>,
{
    for r in records {
        serde_json::to_writer(&mut *out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(id: &str, text: &str, label: Option<Label>) -> Document {
        Document {
            id: id.into(),
            text: text.into(),
            source: Source::Wiki,
            label,
        }
    }

    #[test]
    fn propagation_inherits_document_label() {
        let recs = propagate_labels(&[doc("d1", "One here. Two here. Three here.", Some(Label::Positive))])
            .unwrap();
        assert_eq!(recs.len(), 3);
        assert!(recs.iter().all(|r| r.label == Some(Label::Positive)
            && r.provenance == Provenance::Heuristic
            && r.doc_id == "d1"));
        assert_eq!(recs[2].id, "d1-2");
        recs.iter().for_each(|r| r.validate().unwrap());
    }

    #[test]
    fn propagation_mixed_corpus() {
        let docs = [
            doc("a", "A one. A two.", Some(Label::Positive)),
            doc("b", "B one. B two.", Some(Label::Positive)),
            doc("c", "C only.", Some(Label::Negative)),
        ];
        let recs = propagate_labels(&docs).unwrap();
        let pos = recs.iter().filter(|r| r.label == Some(Label::Positive)).count();
        assert_eq!((pos, recs.len() - pos), (4, 1));
        assert!(propagate_labels(&[]).unwrap().is_empty());
    }

    #[test]
    fn propagation_rejects_unlabeled() {
        let err = propagate_labels(&[doc("x", "Text.", None)]).unwrap_err();
        assert!(matches!(err, CorpusError::UnlabeledDocument(id) if id == "x"));
    }

    #[test]
    fn consensus_rule() {
        use Label::*;
        assert_eq!(consensus_label(&[Negative; 4]).unwrap(), Negative);
        assert_eq!(
            consensus_label(&[Negative, Negative, Positive, Negative]).unwrap(),
            Positive
        );
        assert_eq!(consensus_label(&[Positive]).unwrap(), Positive);
        assert!(matches!(consensus_label(&[]), Err(CorpusError::NoRaterLabels)));
    }

    #[test]
    fn apply_consensus_sets_provenance() {
        let rl = |r: &str, l| RaterLabel {
            rater_id: r.into(),
            label: l,
        };
        let mut multi = SentenceRecord::new("s1", "x", Provenance::Manual);
        multi.rater_labels = Some(vec![rl("a", Label::Negative), rl("b", Label::Positive)]);
        let mut single = SentenceRecord::new("s2", "y", Provenance::Manual);
        single.rater_labels = Some(vec![rl("a", Label::Negative)]);
        let bare = SentenceRecord::new("s3", "z", Provenance::Manual);
        let out = apply_consensus(vec![multi, single, bare.clone()]);
        assert_eq!(out[0].label, Some(Label::Positive));
        assert_eq!(out[0].provenance, Provenance::Consensus);
        out[0].validate().unwrap();
        assert_eq!(out[1].label, Some(Label::Negative));
        assert_eq!(out[1].provenance, Provenance::Manual);
        assert_eq!(out[2], bare);
    }

    #[test]
    fn invariants_checked() {
        let mut r = SentenceRecord::new("s", "t", Provenance::Consensus).with_label(Label::Positive);
        assert!(r.validate().is_err());
        r.provenance = Provenance::Heuristic;
        assert!(r.validate().is_err());
        r.doc_id = "d".into();
        r.validate().unwrap();
    }

    #[test]
    fn jsonl_format() {
        let mut r = SentenceRecord::new("s1", "Warm.", Provenance::ActiveLearning).with_label(Label::Positive);
        r.source = Source::Tenk;
        r.doc_id = "d".into();
        let mut buf = Vec::new();
        write_records(&mut buf, [&r]).unwrap();
        let line = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(
            line,
            "{\"id\":\"s1\",\"text\":\"Warm.\",\"source\":\"tenk\",\"doc_id\":\"d\",\"label\":\"positive\",\"provenance\":\"active_learning\",\"rater_labels\":null}\n"
        );
        let back = read_records(&buf[..]).unwrap();
        assert_eq!(back, vec![r]);
    }

    #[test]
    fn jsonl_errors_carry_line() {
        let text = "{\"id\":\"a\",\"text\":\"t\",\"label\":null,\"provenance\":\"manual\"}\n\nnot json\n";
        match read_records(text.as_bytes()) {
            Err(CorpusError::Json { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }
}
