use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CorpusError, SentenceRecord};
use crate::label::Label;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub positive: usize,
    pub negative: usize,
}

/// Document-level train/dev/test partition. Sentences follow their document.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    train: BTreeSet<String>,
    dev: BTreeSet<String>,
    test: BTreeSet<String>,
}

impl SplitSpec {
    pub fn new<I, J, K>(train: I, dev: J, test: K) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = String>,
        J: IntoIterator<Item = String>,
        K: IntoIterator<Item = String>,
    {
        let spec = SplitSpec {
            train: train.into_iter().collect(),
            dev: dev.into_iter().collect(),
            test: test.into_iter().collect(),
        };
        for id in &spec.train {
            if spec.dev.contains(id) || spec.test.contains(id) {
                return Err(CorpusError::SplitOverlap(id.clone()));
            }
        }
        if let Some(id) = spec.dev.intersection(&spec.test).next() {
            return Err(CorpusError::SplitOverlap(id.clone()));
        }
        Ok(spec)
    }

    /// Shuffles the distinct document ids of `records` with `seed` and cuts
    /// them by fraction; the remainder after train and dev goes to test.
    pub fn by_fraction(
        records: &[SentenceRecord],
        train_fraction: f64,
        dev_fraction: f64,
        seed: u64,
    ) -> Result<Self, CorpusError> {
        let valid = |f: f64| (0.0..=1.0).contains(&f);
        if !valid(train_fraction) || !valid(dev_fraction) || train_fraction + dev_fraction > 1.0 {
            return Err(CorpusError::InvalidFractions);
        }
        let docs: BTreeSet<&str> = records.iter().map(|r| r.doc_id.as_str()).collect();
        let mut docs: Vec<String> = docs.into_iter().map(str::to_string).collect();
        docs.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let n = docs.len() as f64;
        let n_train = (n * train_fraction).round() as usize;
        let n_dev = ((n * dev_fraction).round() as usize).min(docs.len() - n_train);
        let test = docs.split_off(n_train + n_dev);
        let dev = docs.split_off(n_train);
        SplitSpec::new(docs, dev, test)
    }

    pub fn split_of(&self, doc_id: &str) -> Option<Split> {
        if self.train.contains(doc_id) {
            Some(Split::Train)
        } else if self.dev.contains(doc_id) {
            Some(Split::Dev)
        } else if self.test.contains(doc_id) {
            Some(Split::Test)
        } else {
            None
        }
    }

    pub fn documents(&self, split: Split) -> &BTreeSet<String> {
        match split {
            Split::Train => &self.train,
            Split::Dev => &self.dev,
            Split::Test => &self.test,
        }
    }

    /// Groups records by the split of their document. Records whose document
    /// is in no split are dropped.
    pub fn partition<'r>(&self, records: &'r [SentenceRecord]) -> BTreeMap<Split, Vec<&'r SentenceRecord>> {
        let mut out: BTreeMap<Split, Vec<&SentenceRecord>> = BTreeMap::new();
        for r in records {
            if let Some(split) = self.split_of(&r.doc_id) {
                out.entry(split).or_default().push(r);
            }
        }
        out
    }

    pub fn counts(&self, records: &[SentenceRecord]) -> BTreeMap<Split, ClassCounts> {
        let mut out = BTreeMap::new();
        for (split, recs) in self.partition(records) {
            let mut c = ClassCounts::default();
            for r in recs {
                match r.label {
                    Some(Label::Positive) => c.positive += 1,
                    Some(Label::Negative) => c.negative += 1,
                    None => {}
                }
            }
            out.insert(split, c);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Provenance;
    use proptest::prelude::*;

    fn rec(id: usize, doc: usize, label: Label) -> SentenceRecord {
        let mut r = SentenceRecord::new(format!("s{id}"), "t", Provenance::Heuristic).with_label(label);
        r.doc_id = format!("d{doc}");
        r
    }

    #[test]
    fn overlap_rejected() {
        let err = SplitSpec::new(vec!["a".into()], vec!["a".into()], vec![]).unwrap_err();
        assert!(matches!(err, CorpusError::SplitOverlap(d) if d == "a"));
        assert!(SplitSpec::new(vec![], vec!["b".into()], vec!["b".into()]).is_err());
    }

    #[test]
    fn counts_per_split() {
        let recs = vec![
            rec(0, 0, Label::Positive),
            rec(1, 0, Label::Positive),
            rec(2, 1, Label::Negative),
            rec(3, 2, Label::Negative),
        ];
        let spec = SplitSpec::new(vec!["d0".into()], vec!["d1".into()], vec!["d2".into()]).unwrap();
        let counts = spec.counts(&recs);
        assert_eq!(counts[&Split::Train], ClassCounts { positive: 2, negative: 0 });
        assert_eq!(counts[&Split::Dev], ClassCounts { positive: 0, negative: 1 });
        assert_eq!(counts[&Split::Test], ClassCounts { positive: 0, negative: 1 });
    }

    #[test]
    fn bad_fractions() {
        assert!(SplitSpec::by_fraction(&[], 0.8, 0.3, 0).is_err());
        assert!(SplitSpec::by_fraction(&[], -0.1, 0.3, 0).is_err());
    }

    proptest! {
        #[test]
        fn documents_never_straddle_splits(
            docs in prop::collection::vec(0usize..20, 1..80),
            train in 0.0f64..0.7,
            seed in any::<u64>(),
        ) {
            let recs: Vec<_> = docs.iter().enumerate().map(|(i, &d)| rec(i, d, Label::Negative)).collect();
            let spec = SplitSpec::by_fraction(&recs, train, 0.2, seed).unwrap();
            let mut seen: BTreeMap<&str, Split> = BTreeMap::new();
            for (split, rs) in spec.partition(&recs) {
                for r in rs {
                    let prev = seen.insert(r.doc_id.as_str(), split);
                    prop_assert!(prev.is_none() || prev == Some(split));
                }
            }
            // every record assigned exactly once
            let total: usize = spec.partition(&recs).values().map(Vec::len).sum();
            prop_assert_eq!(total, recs.len());
            prop_assert_eq!(spec, SplitSpec::by_fraction(&recs, train, 0.2, seed).unwrap());
        }
    }
}
