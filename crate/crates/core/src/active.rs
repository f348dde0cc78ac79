//! Active-learning queries and the labeling loop.
//!
//! Instance queries rank unlabeled sentences by the entropy of the model's
//! class posterior. Feature queries rank unigrams and bigrams per class by
//! that class's share of the mutual information between feature presence and
//! the label, estimated from hard labels plus the model's soft labels on the
//! unlabeled pool. All logarithms are natural.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::eval::{point_metrics, PointMetrics};
use crate::label::Label;
use crate::nb::{self, featurize_with, Feature, FeatureBoosts, NbConfig, NbModel};

const DIST_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AlError {
    #[error("not a probability distribution: {0:?}")]
    NotADistribution(Vec<f64>),
    #[error("no documents to estimate feature statistics from")]
    EmptyCorpus,
    #[error("unknown or already labeled instance {0:?}")]
    UnknownInstance(String),
    #[error("instance {0:?} answered twice in one round")]
    DuplicateAnswer(String),
    #[error("feature {0:?} does not occur in the corpus")]
    UnknownFeature(String),
    #[error("duplicate instance id {0:?}")]
    DuplicateId(String),
}

/// `-Σ p ln p`, with `0 ln 0 = 0`.
pub fn entropy(dist: &[f64]) -> Result<f64, AlError> {
    let valid = !dist.is_empty()
        && dist.iter().all(|p| p.is_finite() && *p >= 0.0)
        && (dist.iter().sum::<f64>() - 1.0).abs() <= DIST_TOLERANCE;
    if !valid {
        return Err(AlError::NotADistribution(dist.to_vec()));
    }
    Ok(dist
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.ln())
        .sum::<f64>()
        .max(0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceQuery {
    pub sentence_id: String,
    pub entropy: f64,
    /// 1-based.
    pub rank: usize,
}

/// Top `k` by entropy, highest first; ties go to the smaller id.
pub fn rank_posteriors<I, S>(posteriors: I, k: usize) -> Result<Vec<InstanceQuery>, AlError>
where
    I: IntoIterator<Item = (S, Vec<f64>)>,
    S: Into<String>,
{
    let mut scored = posteriors
        .into_iter()
        .map(|(id, dist)| Ok((id.into(), entropy(&dist)?)))
        .collect::<Result<Vec<(String, f64)>, AlError>>()?;
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(scored
        .into_iter()
        .take(k)
        .enumerate()
        .map(|(i, (sentence_id, entropy))| InstanceQuery {
            sentence_id,
            entropy,
            rank: i + 1,
        })
        .collect())
}

/// Ranks `(id, text)` pairs by the entropy of `model`'s posterior.
pub fn rank_instances<'a, I>(model: &NbModel, unlabeled: I, k: usize) -> Vec<InstanceQuery>
where
    I: IntoIterator<Item = (&'a str, &'a str)>,
{
    let posteriors = unlabeled
        .into_iter()
        .map(|(id, text)| (id, model.predict_proba(text)));
    rank_posteriors(posteriors, k).expect("model posteriors are distributions")
}

/// Joint distribution of a feature's presence indicator and the class:
/// `cells[i][j] = P(I = i, y = class j)`, `i = 0` absent, `i = 1` present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointTable {
    pub cells: [Vec<f64>; 2],
}

impl JointTable {
    pub fn new(absent: Vec<f64>, present: Vec<f64>) -> JointTable {
        JointTable {
            cells: [absent, present],
        }
    }

    pub fn p_presence(&self, i: usize) -> f64 {
        self.cells[i].iter().sum()
    }

    pub fn p_class(&self, j: usize) -> f64 {
        self.cells[0][j] + self.cells[1][j]
    }

    pub fn classes(&self) -> usize {
        self.cells[0].len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfoGain {
    /// Inner sum at fixed class `j`.
    pub per_class: Vec<f64>,
    /// Sum over classes: the mutual information.
    pub total: f64,
}

/// `IG = Σ_I Σ_j P(I, y_j) ln[P(I, y_j) / (P(I) P(y_j))]`, zero cells dropped.
pub fn info_gain(table: &JointTable) -> InfoGain {
    let per_class: Vec<f64> = (0..table.classes())
        .map(|j| {
            let pj = table.p_class(j);
            (0..2)
                .map(|i| {
                    let pij = table.cells[i][j];
                    if pij > 0.0 {
                        pij * (pij / (table.p_presence(i) * pj)).ln()
                    } else {
                        0.0
                    }
                })
                .sum()
        })
        .collect();
    let total = per_class.iter().sum();
    InfoGain { per_class, total }
}

/// One document's evidence: its distinct features and a class weight vector
/// (one-hot for a hard label, the posterior for a soft label).
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedDoc<'a> {
    pub features: &'a [Feature],
    pub weights: Vec<f64>,
}

impl<'a> WeightedDoc<'a> {
    pub fn hard(features: &'a [Feature], label: Label) -> Self {
        let mut weights = vec![0.0; Label::ALL.len()];
        weights[label.index()] = 1.0;
        Self { features, weights }
    }

    pub fn soft(features: &'a [Feature], posterior: Vec<f64>) -> Self {
        Self {
            features,
            weights: posterior,
        }
    }
}

/// Per-feature joint tables over every feature present in `docs`. Each
/// document contributes its class weights to the `present` row of the
/// features it contains and to the `absent` row of the rest; each table is
/// normalized by the total weight, so it sums to 1.
pub fn feature_stats(docs: &[WeightedDoc<'_>]) -> Result<BTreeMap<Feature, JointTable>, AlError> {
    let Some(first) = docs.first() else {
        return Err(AlError::EmptyCorpus);
    };
    let k = first.weights.len();
    for d in docs {
        let sum: f64 = d.weights.iter().sum();
        if d.weights.len() != k || d.weights.iter().any(|w| w.is_nan() || *w < 0.0) || (sum - 1.0).abs() > DIST_TOLERANCE {
            return Err(AlError::NotADistribution(d.weights.clone()));
        }
    }
    let mut class_totals = vec![0.0; k];
    let mut present: BTreeMap<&Feature, Vec<f64>> = BTreeMap::new();
    for d in docs {
        for (t, w) in class_totals.iter_mut().zip(&d.weights) {
            *t += w;
        }
        let distinct: BTreeSet<&Feature> = d.features.iter().collect();
        for f in distinct {
            let row = present.entry(f).or_insert_with(|| vec![0.0; k]);
            for (r, w) in row.iter_mut().zip(&d.weights) {
                *r += w;
            }
        }
    }
    let total: f64 = class_totals.iter().sum();
    Ok(present
        .into_iter()
        .map(|(f, row)| {
            let absent = row.iter().zip(&class_totals).map(|(p, t)| (t - p).max(0.0) / total).collect();
            let present = row.iter().map(|p| p / total).collect();
            (f.clone(), JointTable::new(absent, present))
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureQuery {
    pub feature: Feature,
    pub class: Label,
    pub score: f64,
    /// 1-based within the class.
    pub rank: usize,
}

/// For each class, the `m_per_class` best features by that class's IG share.
/// A feature is a candidate for class `j` only when presence is positively
/// associated with `j` (`P(1, y_j) > P(1) P(y_j)`); pairs in `exclude` are
/// skipped. Ties go to the lexicographically smaller feature.
pub fn rank_features(
    stats: &BTreeMap<Feature, JointTable>,
    m_per_class: usize,
    exclude: &BTreeSet<(Feature, Label)>,
) -> Vec<FeatureQuery> {
    let mut out = Vec::new();
    if m_per_class == 0 {
        return out;
    }
    for class in Label::ALL {
        let j = class.index();
        let mut candidates: Vec<(&Feature, f64)> = stats
            .iter()
            .filter(|(f, t)| {
                t.cells[1][j] > t.p_presence(1) * t.p_class(j) && !exclude.contains(&((*f).clone(), class))
            })
            .map(|(f, t)| (f, info_gain(t).per_class[j]))
            .collect();
        candidates.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        out.extend(
            candidates
                .into_iter()
                .take(m_per_class)
                .enumerate()
                .map(|(i, (f, score))| FeatureQuery {
                    feature: f.clone(),
                    class,
                    score,
                    rank: i + 1,
                }),
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledInstance {
    pub id: String,
    pub text: String,
    pub label: Label,
}

/// Oracle answers for one round.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundAnswers {
    pub instances: Vec<(String, Label)>,
    pub features: Vec<(Feature, Label)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Queries {
    pub instances: Vec<InstanceQuery>,
    pub features: Vec<FeatureQuery>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlRoundLog {
    pub round: u32,
    pub new_instances: usize,
    pub new_features: usize,
    pub labeled: usize,
    pub unlabeled: usize,
    pub labeled_features: usize,
    pub model_trained: bool,
    /// Metrics on the held-out evaluation set, when one is configured.
    pub metrics: Option<PointMetrics>,
}

/// Pools, labeled features and the current model of one labeling session.
#[derive(Debug, Clone)]
pub struct AlState {
    config: NbConfig,
    seed: u64,
    labeled: Vec<LabeledInstance>,
    unlabeled: BTreeMap<String, String>,
    labeled_features: BTreeSet<(Feature, Label)>,
    corpus_features: HashSet<Feature>,
    evaluation: Vec<(String, Label)>,
    model: Option<NbModel>,
    round: u32,
}

impl AlState {
    /// `seed_labels` train the initial model; `seed` drives cold-start
    /// sampling before any model exists.
    pub fn new(
        unlabeled: Vec<Instance>,
        seed_labels: Vec<LabeledInstance>,
        config: NbConfig,
        seed: u64,
    ) -> Result<AlState, AlError> {
        let mut ids = HashSet::new();
        for id in unlabeled.iter().map(|i| &i.id).chain(seed_labels.iter().map(|l| &l.id)) {
            if !ids.insert(id.clone()) {
                return Err(AlError::DuplicateId(id.clone()));
            }
        }
        let corpus_features = unlabeled
            .iter()
            .map(|i| &i.text)
            .chain(seed_labels.iter().map(|l| &l.text))
            .flat_map(|t| featurize_with(t, config.ngrams))
            .collect();
        let mut state = AlState {
            config,
            seed,
            labeled: seed_labels,
            unlabeled: unlabeled.into_iter().map(|i| (i.id, i.text)).collect(),
            labeled_features: BTreeSet::new(),
            corpus_features,
            evaluation: Vec::new(),
            model: None,
            round: 0,
        };
        state.retrain();
        Ok(state)
    }

    /// Held-out gold sentences used for the metrics in each round log.
    pub fn with_evaluation(mut self, evaluation: Vec<(String, Label)>) -> AlState {
        self.evaluation = evaluation;
        self
    }

    pub fn config(&self) -> &NbConfig {
        &self.config
    }

    pub fn model(&self) -> Option<&NbModel> {
        self.model.as_ref()
    }

    pub fn round(&self) -> u32 {
        self.round
    }

    pub fn labeled(&self) -> &[LabeledInstance] {
        &self.labeled
    }

    pub fn unlabeled(&self) -> impl Iterator<Item = (&str, &str)> {
        self.unlabeled.iter().map(|(id, t)| (id.as_str(), t.as_str()))
    }

    pub fn unlabeled_len(&self) -> usize {
        self.unlabeled.len()
    }

    pub fn labeled_features(&self) -> &BTreeSet<(Feature, Label)> {
        &self.labeled_features
    }

    pub fn retrain(&mut self) {
        let labeled: Vec<(&str, Label)> = self.labeled.iter().map(|l| (l.text.as_str(), l.label)).collect();
        let unlabeled: Vec<&str> = self.unlabeled.values().map(String::as_str).collect();
        let boosts: FeatureBoosts = nb::uniform_boosts(&self.labeled_features, self.config.feature_boost);
        self.model = nb::train(&labeled, &boosts, &unlabeled, &self.config).ok();
    }

    /// Instance and feature queries against the current model. Without a
    /// model, instances are a seeded uniform draw (all at the maximum binary
    /// entropy) and no features are queried.
    pub fn queries(&self, k_instances: usize, m_features: usize) -> Queries {
        let Some(model) = &self.model else {
            return Queries {
                instances: self.cold_start(k_instances),
                features: Vec::new(),
            };
        };
        let instances = rank_instances(model, self.unlabeled(), k_instances);
        let features = if m_features == 0 {
            Vec::new()
        } else {
            let labeled_feats: Vec<Vec<Feature>> = self.labeled.iter().map(|l| model.featurize(&l.text)).collect();
            let unlabeled_feats: Vec<Vec<Feature>> = self.unlabeled.values().map(|t| model.featurize(t)).collect();
            let docs: Vec<WeightedDoc<'_>> = self
                .labeled
                .iter()
                .zip(&labeled_feats)
                .map(|(l, f)| WeightedDoc::hard(f, l.label))
                .chain(unlabeled_feats.iter().map(|f| WeightedDoc::soft(f, model.posterior(f))))
                .collect();
            match feature_stats(&docs) {
                Ok(stats) => rank_features(&stats, m_features, &self.labeled_features),
                Err(_) => Vec::new(),
            }
        };
        Queries { instances, features }
    }

    fn cold_start(&self, k: usize) -> Vec<InstanceQuery> {
        let ids: Vec<&String> = self.unlabeled.keys().collect();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ u64::from(self.round));
        index::sample(&mut rng, ids.len(), k.min(ids.len()))
            .into_iter()
            .enumerate()
            .map(|(r, i)| InstanceQuery {
                sentence_id: ids[i].clone(),
                entropy: std::f64::consts::LN_2,
                rank: r + 1,
            })
            .collect()
    }

    /// Checks answers without applying them.
    pub fn validate(&self, answers: &RoundAnswers) -> Result<(), AlError> {
        let mut seen = HashSet::new();
        for (id, _) in &answers.instances {
            if !self.unlabeled.contains_key(id) {
                return Err(AlError::UnknownInstance(id.clone()));
            }
            if !seen.insert(id) {
                return Err(AlError::DuplicateAnswer(id.clone()));
            }
        }
        for (f, _) in &answers.features {
            if f.is_empty() || !self.corpus_features.contains(f) {
                return Err(AlError::UnknownFeature(f.to_string()));
            }
        }
        Ok(())
    }

    /// Moves answered instances into the labeled pool, records feature
    /// labels (a new class for a feature replaces its old one), then
    /// retrains unless `retrain` is false.
    pub fn apply(&mut self, answers: &RoundAnswers, retrain: bool) -> Result<AlRoundLog, AlError> {
        self.validate(answers)?;
        for (id, label) in &answers.instances {
            let text = self.unlabeled.remove(id).expect("validated");
            self.labeled.push(LabeledInstance {
                id: id.clone(),
                text,
                label: *label,
            });
        }
        let mut new_features = 0;
        for (f, label) in &answers.features {
            self.labeled_features.retain(|(g, l)| g != f || l == label);
            if self.labeled_features.insert((f.clone(), *label)) {
                new_features += 1;
            }
        }
        if retrain {
            self.retrain();
        }
        self.round += 1;
        Ok(self.log(answers.instances.len(), new_features))
    }

    /// Applies one round and retrains.
    pub fn run_round(&mut self, answers: &RoundAnswers) -> Result<AlRoundLog, AlError> {
        self.apply(answers, true)
    }

    fn log(&self, new_instances: usize, new_features: usize) -> AlRoundLog {
        AlRoundLog {
            round: self.round,
            new_instances,
            new_features,
            labeled: self.labeled.len(),
            unlabeled: self.unlabeled.len(),
            labeled_features: self.labeled_features.len(),
            model_trained: self.model.is_some(),
            metrics: self.evaluate(),
        }
    }

    /// Point metrics of the current model on the evaluation set.
    pub fn evaluate(&self) -> Option<PointMetrics> {
        let model = self.model.as_ref()?;
        if self.evaluation.is_empty() {
            return None;
        }
        let preds: Vec<Label> = self.evaluation.iter().map(|(t, _)| model.predict(t)).collect();
        let gold: Vec<Label> = self.evaluation.iter().map(|(_, l)| *l).collect();
        point_metrics(&preds, &gold).ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(id: &str, text: &str) -> Instance {
        Instance {
            id: id.into(),
            text: text.into(),
        }
    }

    fn lab(id: &str, text: &str, label: Label) -> LabeledInstance {
        LabeledInstance {
            id: id.into(),
            text: text.into(),
            label,
        }
    }

    #[test]
    fn entropy_examples() {
        assert!((entropy(&[0.5, 0.5]).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(entropy(&[1.0, 0.0]).unwrap(), 0.0);
        // -(0.9 ln 0.9 + 0.1 ln 0.1)
        assert!((entropy(&[0.9, 0.1]).unwrap() - 0.325_082_973_391_448_2).abs() < 1e-12);
        assert!(entropy(&[0.5, 0.4]).is_err());
        assert!(entropy(&[1.5, -0.5]).is_err());
        assert!(entropy(&[]).is_err());
    }

    #[test]
    fn instance_ranking() {
        let q = rank_posteriors([("b", vec![0.99, 0.01]), ("a", vec![0.5, 0.5])], 1).unwrap();
        assert_eq!(q.len(), 1);
        assert_eq!(q[0].sentence_id, "a");
        assert_eq!(q[0].rank, 1);
        assert!(rank_posteriors([("a", vec![0.5, 0.5])], 0).unwrap().is_empty());
        let tie = rank_posteriors([("z", vec![0.3, 0.7]), ("m", vec![0.3, 0.7])], 5).unwrap();
        assert_eq!(tie.iter().map(|q| q.sentence_id.as_str()).collect::<Vec<_>>(), vec!["m", "z"]);
        assert_eq!(tie[1].rank, 2);
    }

    fn feats(words: &[&str]) -> Vec<Feature> {
        words.iter().map(|w| Feature::new(w)).collect()
    }

    #[test]
    fn stats_from_hard_labels() {
        let with_f = feats(&["f"]);
        let without = feats(&["g"]);
        let docs = vec![
            WeightedDoc::hard(&with_f, Label::Positive),
            WeightedDoc::hard(&with_f, Label::Positive),
            WeightedDoc::hard(&without, Label::Negative),
            WeightedDoc::hard(&without, Label::Negative),
        ];
        let stats = feature_stats(&docs).unwrap();
        let t = &stats[&Feature::new("f")];
        let (neg, pos) = (Label::Negative.index(), Label::Positive.index());
        assert_eq!(t.cells[1][pos], 0.5);
        assert_eq!(t.cells[0][neg], 0.5);
        assert_eq!(t.cells[1][neg], 0.0);
        assert_eq!(t.cells[0][pos], 0.0);
        assert!(feature_stats(&[]).is_err());
    }

    #[test]
    fn stats_feature_everywhere() {
        let f = feats(&["f"]);
        let docs = vec![WeightedDoc::hard(&f, Label::Positive), WeightedDoc::hard(&f, Label::Negative)];
        let t = &feature_stats(&docs).unwrap()[&Feature::new("f")];
        assert_eq!(t.cells[0], vec![0.0, 0.0]);
        assert_eq!(t.p_presence(1), 1.0);
    }

    #[test]
    fn stats_soft_weights() {
        let f = feats(&["f"]);
        let none = feats(&["g"]);
        let docs = vec![
            WeightedDoc::soft(&f, vec![0.5, 0.5]),
            WeightedDoc::hard(&none, Label::Positive),
        ];
        let t = &feature_stats(&docs).unwrap()[&Feature::new("f")];
        assert_eq!(t.cells[1], vec![0.25, 0.25]);
        assert_eq!(t.cells[0], vec![0.0, 0.5]);
        assert!(feature_stats(&[WeightedDoc::soft(&f, vec![0.5, 0.6])]).is_err());
    }

    #[test]
    fn info_gain_aligned_and_independent() {
        let aligned = JointTable::new(vec![0.5, 0.0], vec![0.0, 0.5]);
        let ig = info_gain(&aligned);
        assert!((ig.total - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((ig.per_class[1] - std::f64::consts::LN_2 / 2.0).abs() < 1e-15);
        let independent = JointTable::new(vec![0.3, 0.3], vec![0.2, 0.2]);
        let ig = info_gain(&independent);
        assert!(ig.total.abs() < 1e-15);
        assert!(ig.per_class.iter().all(|s| s.abs() < 1e-15));
    }

    #[test]
    fn feature_ranking() {
        let carbon_doc = feats(&["carbon", "the"]);
        let plain_doc = feats(&["beer", "the"]);
        let docs = vec![
            WeightedDoc::hard(&carbon_doc, Label::Positive),
            WeightedDoc::hard(&carbon_doc, Label::Positive),
            WeightedDoc::hard(&plain_doc, Label::Negative),
            WeightedDoc::hard(&plain_doc, Label::Negative),
            WeightedDoc::hard(&plain_doc, Label::Negative),
        ];
        let stats = feature_stats(&docs).unwrap();
        let q = rank_features(&stats, 3, &BTreeSet::new());
        let pos: Vec<_> = q.iter().filter(|q| q.class == Label::Positive).collect();
        assert_eq!(pos[0].feature.as_str(), "carbon");
        assert_eq!(pos[0].rank, 1);
        // "the" is everywhere: independent of the class, never a candidate
        assert!(q.iter().all(|q| q.feature.as_str() != "the"));
        assert!(rank_features(&stats, 0, &BTreeSet::new()).is_empty());
        let exclude = BTreeSet::from([(Feature::new("carbon"), Label::Positive)]);
        let q = rank_features(&stats, 3, &exclude);
        assert!(!q.iter().any(|q| q.class == Label::Positive && q.feature.as_str() == "carbon"));
    }

    fn state() -> AlState {
        AlState::new(
            vec![
                inst("u1", "carbon tax rises"),
                inst("u2", "beer is cold"),
                inst("u3", "carbon emissions warm the planet"),
                inst("u4", "a quiet afternoon"),
            ],
            vec![
                lab("s1", "warming climate carbon", Label::Positive),
                lab("s2", "cold beer football", Label::Negative),
            ],
            NbConfig::default(),
            1,
        )
        .unwrap()
    }

    #[test]
    fn round_bookkeeping() {
        let mut st = state();
        assert!(st.model().is_some());
        let before = st.labeled().len() + st.unlabeled_len();
        let log = st
            .run_round(&RoundAnswers {
                instances: vec![("u1".into(), Label::Positive)],
                features: vec![],
            })
            .unwrap();
        assert_eq!((log.labeled, log.unlabeled, log.round), (3, 3, 1));
        assert_eq!(st.labeled().len() + st.unlabeled_len(), before);
        let log = st.run_round(&RoundAnswers::default()).unwrap();
        assert_eq!((log.labeled, log.unlabeled, log.new_instances), (3, 3, 0));
    }

    #[test]
    fn round_rejects_unknown_ids_atomically() {
        let mut st = state();
        let err = st
            .run_round(&RoundAnswers {
                instances: vec![("u1".into(), Label::Positive), ("nope".into(), Label::Negative)],
                features: vec![],
            })
            .unwrap_err();
        assert_eq!(err, AlError::UnknownInstance("nope".into()));
        assert_eq!(st.unlabeled_len(), 4);
        assert!(st
            .run_round(&RoundAnswers {
                instances: vec![("s1".into(), Label::Positive)],
                features: vec![],
            })
            .is_err());
        assert!(matches!(
            st.run_round(&RoundAnswers {
                instances: vec![],
                features: vec![(Feature::new("zebra"), Label::Positive)],
            }),
            Err(AlError::UnknownFeature(_))
        ));
    }

    #[test]
    fn feature_labels_replace_opposite_class() {
        let mut st = state();
        let carbon = Feature::new("carbon");
        st.run_round(&RoundAnswers {
            instances: vec![],
            features: vec![(carbon.clone(), Label::Negative)],
        })
        .unwrap();
        let log = st
            .run_round(&RoundAnswers {
                instances: vec![],
                features: vec![(carbon.clone(), Label::Positive)],
            })
            .unwrap();
        assert_eq!(log.labeled_features, 1);
        assert!(st.labeled_features().contains(&(carbon, Label::Positive)));
    }

    #[test]
    fn queries_are_stable_and_exclude_labeled() {
        let st = state();
        let q = st.queries(2, 2);
        assert_eq!(q, st.queries(2, 2));
        assert!(q.instances.len() <= 2);
        assert!(q.instances.windows(2).all(|w| w[0].entropy >= w[1].entropy));
        for class in Label::ALL {
            assert!(q.features.iter().filter(|f| f.class == class).count() <= 2);
        }
        assert_eq!(st.queries(0, 0), Queries { instances: vec![], features: vec![] });
    }

    #[test]
    fn cold_start_is_seeded_uniform() {
        let pool: Vec<Instance> = (0..20).map(|i| inst(&format!("u{i:02}"), "some text")).collect();
        let st = AlState::new(pool.clone(), vec![], NbConfig::default(), 9).unwrap();
        assert!(st.model().is_none());
        let q = st.queries(5, 5);
        assert_eq!(q.instances.len(), 5);
        assert!(q.features.is_empty());
        assert_eq!(q, AlState::new(pool, vec![], NbConfig::default(), 9).unwrap().queries(5, 5));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let err = AlState::new(vec![inst("a", "x"), inst("a", "y")], vec![], NbConfig::default(), 0).unwrap_err();
        assert_eq!(err, AlError::DuplicateId("a".into()));
    }

    #[test]
    fn evaluation_metrics_in_log() {
        let mut st = state().with_evaluation(vec![
            ("carbon warming".into(), Label::Positive),
            ("cold beer".into(), Label::Negative),
        ]);
        let log = st.run_round(&RoundAnswers::default()).unwrap();
        let m = log.metrics.unwrap();
        assert_eq!(m.accuracy, 1.0);
    }
}
