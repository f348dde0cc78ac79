//! Multinomial Naive Bayes over unigram and bigram features, with oracle
//! labeled features folded in as pseudo-counts.
//!
//! For class `c` and feature `f` in the vocabulary `V`:
//!
//! ```text
//! theta(c, f) = (n(c, f) + alpha + boost(f, c)) / (sum over V of n(c, g) + alpha * |V|)
//! prior(c)    = (docs(c) + alpha) / (docs + alpha * |classes|)
//! ```
//!
//! The boost is added to the feature's count but not to the class normaliser,
//! so raising a boost only ever raises the class score of sentences that
//! contain the feature. Posteriors are computed in log space. Features
//! outside the vocabulary are ignored.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::label::Label;
use crate::text::tokens;

pub const DEFAULT_ALPHA: f64 = 1.0;
pub const DEFAULT_FEATURE_BOOST: f64 = 50.0;
pub const BIGRAM_SEPARATOR: char = '_';

const MODEL_FORMAT: &str = "topic-forge-nb";
const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NbError {
    #[error("no class evidence: need labeled instances or labeled features")]
    NoEvidence,
    #[error("smoothing alpha must be positive and finite, got {0}")]
    InvalidAlpha(f64),
    #[error("feature boost must be non-negative and finite, got {0}")]
    InvalidBoost(f64),
    #[error("unsupported model document: {0}")]
    BadDocument(String),
}

/// A lowercased token, or two adjacent tokens joined by `_`. Tokens never
/// contain `_` (it is not alphanumeric), so the join is unambiguous.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Feature(String);

impl Feature {
    /// Normalises free text the way the featurizer would: tokens joined by `_`.
    pub fn new(text: &str) -> Feature {
        Feature(tokens(text).join("_"))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// 1 for unigrams, 2 for bigrams.
    pub fn order(&self) -> usize {
        self.0.matches(BIGRAM_SEPARATOR).count() + 1
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ngrams {
    Unigrams,
    #[default]
    UnigramsAndBigrams,
}

/// All unigrams followed by all adjacent bigrams, with repetition.
pub fn featurize(sentence: &str) -> Vec<Feature> {
    featurize_with(sentence, Ngrams::UnigramsAndBigrams)
}

pub fn featurize_with(sentence: &str, ngrams: Ngrams) -> Vec<Feature> {
    let toks = tokens(sentence);
    let mut out: Vec<Feature> = toks.iter().cloned().map(Feature).collect();
    if ngrams == Ngrams::UnigramsAndBigrams {
        out.extend(
            toks.windows(2)
                .map(|w| Feature(format!("{}{BIGRAM_SEPARATOR}{}", w[0], w[1]))),
        );
    }
    out
}

/// Oracle feature labels and their pseudo-count boosts.
pub type FeatureBoosts = BTreeMap<(Feature, Label), f64>;

/// Gives every `(feature, class)` pair the same boost.
pub fn uniform_boosts<'a, I>(pairs: I, boost: f64) -> FeatureBoosts
where
    I: IntoIterator<Item = &'a (Feature, Label)>,
{
    pairs.into_iter().map(|p| (p.clone(), boost)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NbConfig {
    pub alpha: f64,
    pub feature_boost: f64,
    pub ngrams: Ngrams,
    /// Add one round of fractional counts from the model's own predictions
    /// on the unlabeled sentences. Priors are not updated by this pass.
    pub em_pass: bool,
}

impl Default for NbConfig {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            feature_boost: DEFAULT_FEATURE_BOOST,
            ngrams: Ngrams::default(),
            em_pass: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NbModel {
    classes: Vec<Label>,
    ngrams: Ngrams,
    alpha: f64,
    prior_counts: Vec<f64>,
    feature_counts: Vec<BTreeMap<Feature, f64>>,
    vocabulary: BTreeSet<Feature>,
    labeled_features: FeatureBoosts,
    log_prior: Vec<f64>,
    log_theta: HashMap<Feature, Vec<f64>>,
}

pub fn train(
    labeled: &[(&str, Label)],
    labeled_features: &FeatureBoosts,
    unlabeled: &[&str],
    config: &NbConfig,
) -> Result<NbModel, NbError> {
    if !(config.alpha > 0.0 && config.alpha.is_finite()) {
        return Err(NbError::InvalidAlpha(config.alpha));
    }
    if let Some(&b) = labeled_features.values().find(|b| !(**b >= 0.0 && b.is_finite())) {
        return Err(NbError::InvalidBoost(b));
    }
    if labeled.is_empty() && labeled_features.is_empty() {
        return Err(NbError::NoEvidence);
    }
    let classes = Label::ALL.to_vec();
    let mut prior_counts = vec![0.0; classes.len()];
    let mut feature_counts = vec![BTreeMap::new(); classes.len()];
    let mut vocabulary = BTreeSet::new();

    for &(text, label) in labeled {
        prior_counts[label.index()] += 1.0;
        for f in featurize_with(text, config.ngrams) {
            *feature_counts[label.index()].entry(f.clone()).or_insert(0.0) += 1.0;
            vocabulary.insert(f);
        }
    }
    let unlabeled_features: Vec<Vec<Feature>> = unlabeled
        .iter()
        .map(|t| featurize_with(t, config.ngrams))
        .collect();
    vocabulary.extend(unlabeled_features.iter().flatten().cloned());
    vocabulary.extend(labeled_features.keys().map(|(f, _)| f.clone()));

    let mut model = NbModel {
        classes,
        ngrams: config.ngrams,
        alpha: config.alpha,
        prior_counts,
        feature_counts,
        vocabulary,
        labeled_features: labeled_features.clone(),
        log_prior: Vec::new(),
        log_theta: HashMap::new(),
    };
    model.refresh();

    if config.em_pass && !unlabeled_features.is_empty() {
        let mut extra: Vec<BTreeMap<Feature, f64>> = vec![BTreeMap::new(); model.classes.len()];
        for feats in &unlabeled_features {
            let dist = model.posterior(feats);
            for f in feats {
                for (c, p) in dist.iter().enumerate() {
                    *extra[c].entry(f.clone()).or_insert(0.0) += p;
                }
            }
        }
        for (c, counts) in extra.into_iter().enumerate() {
            for (f, n) in counts {
                *model.feature_counts[c].entry(f).or_insert(0.0) += n;
            }
        }
        model.refresh();
    }
    Ok(model)
}

impl NbModel {
    fn refresh(&mut self) {
        let k = self.classes.len() as f64;
        let docs: f64 = self.prior_counts.iter().sum();
        self.log_prior = self
            .prior_counts
            .iter()
            .map(|n| ((n + self.alpha) / (docs + self.alpha * k)).ln())
            .collect();
        let v = self.vocabulary.len() as f64;
        let log_norm: Vec<f64> = self
            .feature_counts
            .iter()
            .map(|counts| (counts.values().sum::<f64>() + self.alpha * v).ln())
            .collect();
        self.log_theta = self
            .vocabulary
            .iter()
            .map(|f| {
                let row = self
                    .classes
                    .iter()
                    .enumerate()
                    .map(|(c, &label)| {
                        let n = self.feature_counts[c].get(f).copied().unwrap_or(0.0);
                        let boost = self
                            .labeled_features
                            .get(&(f.clone(), label))
                            .copied()
                            .unwrap_or(0.0);
                        (n + self.alpha + boost).ln() - log_norm[c]
                    })
                    .collect();
                (f.clone(), row)
            })
            .collect();
    }

    pub fn classes(&self) -> &[Label] {
        &self.classes
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn ngrams(&self) -> Ngrams {
        self.ngrams
    }

    pub fn vocabulary(&self) -> &BTreeSet<Feature> {
        &self.vocabulary
    }

    pub fn prior_counts(&self) -> &[f64] {
        &self.prior_counts
    }

    pub fn feature_count(&self, class: Label, feature: &Feature) -> f64 {
        self.feature_counts[class.index()]
            .get(feature)
            .copied()
            .unwrap_or(0.0)
    }

    pub fn labeled_features(&self) -> &FeatureBoosts {
        &self.labeled_features
    }

    /// Smoothed P(feature | class); a labeled-feature boost is added on top
    /// of the same denominator, so boosted weights can exceed 1. `None`
    /// outside the vocabulary.
    pub fn feature_probability(&self, class: Label, feature: &Feature) -> Option<f64> {
        self.log_theta.get(feature).map(|row| row[class.index()].exp())
    }

    pub fn featurize(&self, sentence: &str) -> Vec<Feature> {
        featurize_with(sentence, self.ngrams)
    }

    /// Class posterior for an already featurized sentence, ordered like
    /// [`NbModel::classes`].
    pub fn posterior(&self, features: &[Feature]) -> Vec<f64> {
        let mut scores = self.log_prior.clone();
        for f in features {
            if let Some(row) = self.log_theta.get(f) {
                for (s, lt) in scores.iter_mut().zip(row) {
                    *s += lt;
                }
            }
        }
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut probs: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
        let z: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= z);
        probs
    }

    pub fn predict_proba(&self, sentence: &str) -> Vec<f64> {
        self.posterior(&self.featurize(sentence))
    }

    /// Positive only when its posterior is strictly larger.
    pub fn predict(&self, sentence: &str) -> Label {
        let p = self.predict_proba(sentence);
        if p[Label::Positive.index()] > p[Label::Negative.index()] {
            Label::Positive
        } else {
            Label::Negative
        }
    }

    pub fn to_document(&self) -> ModelDocument {
        ModelDocument {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            classes: self.classes.clone(),
            ngrams: self.ngrams,
            alpha: self.alpha,
            prior_counts: self.prior_counts.clone(),
            vocabulary: self.vocabulary.iter().cloned().collect(),
            feature_counts: self
                .classes
                .iter()
                .zip(&self.feature_counts)
                .map(|(&l, c)| (l, c.clone()))
                .collect(),
            labeled_features: self
                .labeled_features
                .iter()
                .map(|((feature, class), &boost)| LabeledFeatureEntry {
                    feature: feature.clone(),
                    class: *class,
                    boost,
                })
                .collect(),
        }
    }

    pub fn from_document(doc: ModelDocument) -> Result<NbModel, NbError> {
        if doc.format != MODEL_FORMAT || doc.version != MODEL_VERSION {
            return Err(NbError::BadDocument(format!(
                "expected {MODEL_FORMAT} v{MODEL_VERSION}, found {} v{}",
                doc.format, doc.version
            )));
        }
        if doc.classes != Label::ALL.to_vec() || doc.prior_counts.len() != doc.classes.len() {
            return Err(NbError::BadDocument("classes must be [negative, positive]".into()));
        }
        if !(doc.alpha > 0.0 && doc.alpha.is_finite()) {
            return Err(NbError::InvalidAlpha(doc.alpha));
        }
        let vocabulary: BTreeSet<Feature> = doc.vocabulary.into_iter().collect();
        let mut feature_counts = Vec::new();
        for class in &doc.classes {
            let counts = doc.feature_counts.get(class).cloned().unwrap_or_default();
            if let Some(f) = counts.keys().find(|f| !vocabulary.contains(*f)) {
                return Err(NbError::BadDocument(format!("counted feature {f} not in vocabulary")));
            }
            if counts.values().chain(&doc.prior_counts).any(|n| n.is_nan() || *n < 0.0) {
                return Err(NbError::BadDocument("negative count".into()));
            }
            feature_counts.push(counts);
        }
        let mut labeled_features = BTreeMap::new();
        for e in doc.labeled_features {
            if !(e.boost >= 0.0 && e.boost.is_finite()) {
                return Err(NbError::InvalidBoost(e.boost));
            }
            if !vocabulary.contains(&e.feature) {
                return Err(NbError::BadDocument(format!("labeled feature {} not in vocabulary", e.feature)));
            }
            labeled_features.insert((e.feature, e.class), e.boost);
        }
        let mut model = NbModel {
            classes: doc.classes,
            ngrams: doc.ngrams,
            alpha: doc.alpha,
            prior_counts: doc.prior_counts,
            feature_counts,
            vocabulary,
            labeled_features,
            log_prior: Vec::new(),
            log_theta: HashMap::new(),
        };
        model.refresh();
        Ok(model)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("model document serializes")
    }

    pub fn from_json(text: &str) -> Result<NbModel, NbError> {
        let doc: ModelDocument =
            serde_json::from_str(text).map_err(|e| NbError::BadDocument(e.to_string()))?;
        Self::from_document(doc)
    }
}

/// Versioned JSON form of a trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub format: String,
    pub version: u32,
    pub classes: Vec<Label>,
    pub ngrams: Ngrams,
    pub alpha: f64,
    pub prior_counts: Vec<f64>,
    pub vocabulary: Vec<Feature>,
    pub feature_counts: BTreeMap<Label, BTreeMap<Feature, f64>>,
    pub labeled_features: Vec<LabeledFeatureEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledFeatureEntry {
    pub feature: Feature,
    pub class: Label,
    pub boost: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unigram() -> NbConfig {
        NbConfig {
            ngrams: Ngrams::Unigrams,
            ..NbConfig::default()
        }
    }

    fn toy() -> NbModel {
        train(
            &[("warm climate", Label::Positive), ("cold beer", Label::Negative)],
            &FeatureBoosts::new(),
            &[],
            &unigram(),
        )
        .unwrap()
    }

    fn names(fs: &[Feature]) -> Vec<&str> {
        fs.iter().map(Feature::as_str).collect()
    }

    #[test]
    fn featurize_examples() {
        assert_eq!(names(&featurize("Climate change")), vec!["climate", "change", "climate_change"]);
        assert_eq!(names(&featurize("a a")), vec!["a", "a", "a_a"]);
        assert!(featurize("").is_empty());
        assert_eq!(names(&featurize_with("a b", Ngrams::Unigrams)), vec!["a", "b"]);
        assert_eq!(Feature::new("Carbon  Tax").as_str(), "carbon_tax");
        assert_eq!(Feature::new("carbon tax").order(), 2);
    }

    #[test]
    fn toy_laplace_estimates() {
        // vocabulary {warm, climate, cold, beer}: (1 + 1) / (2 + 4) and (0 + 1) / (2 + 4)
        let m = toy();
        let climate = Feature::new("climate");
        assert_eq!(m.vocabulary().len(), 4);
        assert!((m.feature_probability(Label::Positive, &climate).unwrap() - 2.0 / 6.0).abs() < 1e-12);
        assert!((m.feature_probability(Label::Negative, &climate).unwrap() - 1.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn toy_posterior() {
        // equal priors: (2/6) / (2/6 + 1/6)
        let p = toy().predict_proba("climate");
        assert!((p[Label::Positive.index()] - 2.0 / 3.0).abs() < 1e-12);
        assert!((p[Label::Negative.index()] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn empty_sentence_gives_prior() {
        let m = train(
            &[("a", Label::Positive), ("b", Label::Positive), ("c", Label::Negative)],
            &FeatureBoosts::new(),
            &[],
            &unigram(),
        )
        .unwrap();
        let p = m.predict_proba("");
        // (2 + 1) / (3 + 2)
        assert!((p[1] - 0.6).abs() < 1e-12);
        assert_eq!(m.predict_proba("zzz unknown"), p);
    }

    #[test]
    fn symmetric_model_on_oov_is_uniform() {
        let p = toy().predict_proba("nothing known here");
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn labeled_feature_alone_decides() {
        let boosts = uniform_boosts(&[(Feature::new("climate"), Label::Positive)], DEFAULT_FEATURE_BOOST);
        let m = train(&[], &boosts, &[], &NbConfig::default()).unwrap();
        assert_eq!(m.predict("climate"), Label::Positive);
        let m = train(&[], &boosts, &["weather report", "climate"], &NbConfig::default()).unwrap();
        assert_eq!(m.predict("climate"), Label::Positive);
    }

    #[test]
    fn no_evidence_and_bad_params() {
        let none = FeatureBoosts::new();
        assert_eq!(train(&[], &none, &["x"], &NbConfig::default()), Err(NbError::NoEvidence));
        let cfg = NbConfig {
            alpha: 0.0,
            ..NbConfig::default()
        };
        assert!(matches!(
            train(&[("a", Label::Positive)], &none, &[], &cfg),
            Err(NbError::InvalidAlpha(_))
        ));
        let bad = BTreeMap::from([((Feature::new("a"), Label::Positive), -1.0)]);
        assert!(matches!(
            train(&[("a", Label::Positive)], &bad, &[], &NbConfig::default()),
            Err(NbError::InvalidBoost(_))
        ));
    }

    #[test]
    fn single_class_evidence_is_enough() {
        let m = train(&[("hot sun", Label::Positive)], &FeatureBoosts::new(), &["cold"], &unigram()).unwrap();
        assert_eq!(m.predict("hot"), Label::Positive);
    }

    #[test]
    fn em_pass_adds_fractional_counts_only() {
        let labeled = [("warm climate", Label::Positive), ("cold beer", Label::Negative)];
        let unlabeled = ["climate climate", "beer"];
        let cfg = NbConfig {
            em_pass: true,
            ..unigram()
        };
        let plain = train(&labeled, &FeatureBoosts::new(), &unlabeled, &unigram()).unwrap();
        let em = train(&labeled, &FeatureBoosts::new(), &unlabeled, &cfg).unwrap();
        assert_eq!(em.prior_counts(), plain.prior_counts());
        let climate = Feature::new("climate");
        let p = plain.predict_proba("climate climate");
        let added_pos = em.feature_count(Label::Positive, &climate) - plain.feature_count(Label::Positive, &climate);
        assert!((added_pos - 2.0 * p[1]).abs() < 1e-12);
        let total_added: f64 = Label::ALL
            .iter()
            .map(|&l| em.feature_count(l, &climate) - plain.feature_count(l, &climate))
            .sum();
        assert!((total_added - 2.0).abs() < 1e-12);
        assert!(em.predict_proba("climate")[1] > plain.predict_proba("climate")[1]);
    }

    #[test]
    fn json_round_trip() {
        let boosts = uniform_boosts(&[(Feature::new("carbon"), Label::Positive)], 50.0);
        let m = train(
            &[("carbon tax", Label::Positive), ("beer", Label::Negative)],
            &boosts,
            &["the carbon budget"],
            &NbConfig {
                em_pass: true,
                ..NbConfig::default()
            },
        )
        .unwrap();
        let text = m.to_json();
        let back = NbModel::from_json(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_json(), text);
        assert!(NbModel::from_json("{\"format\":\"other\"}").is_err());
    }

    #[test]
    fn long_sentences_stay_finite() {
        let m = toy();
        let s = vec!["climate"; 1000].join(" ");
        let p = m.predict_proba(&s);
        assert!(p.iter().all(|x| x.is_finite()));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p[1] > 0.999);
    }
}
