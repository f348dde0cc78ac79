//! Classification metrics with bootstrap standard deviations, and
//! inter-rater agreement (Fleiss' and Cohen's kappa).

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::label::Label;

pub const DEFAULT_BOOTSTRAP: usize = 1000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("{predictions} predictions but {labels} gold labels")]
    LengthMismatch { predictions: usize, labels: usize },
    #[error("nothing to evaluate")]
    Empty,
    #[error("n_bootstrap must be at least 1")]
    NoResamples,
    #[error("rating matrix row {row}: {reason}")]
    RaggedMatrix { row: usize, reason: String },
    #[error("every item needs at least two ratings")]
    TooFewRaters,
    #[error("cannot parse rating matrix line {line}: {reason}")]
    BadRatings { line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn from_pairs<'a, I>(pairs: I) -> Confusion
    where
        I: IntoIterator<Item = (&'a Label, &'a Label)>,
    {
        let mut c = Confusion::default();
        for (p, g) in pairs {
            match (p, g) {
                (Label::Positive, Label::Positive) => c.tp += 1,
                (Label::Positive, Label::Negative) => c.fp += 1,
                (Label::Negative, Label::Negative) => c.tn += 1,
                (Label::Negative, Label::Positive) => c.fn_ += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// Metrics with the positive class as target.
    pub fn metrics(&self) -> PointMetrics {
        let ratio = |num: usize, den: usize| {
            if den == 0 {
                (0.0, true)
            } else {
                (num as f64 / den as f64, false)
            }
        };
        let (mut precision, precision_undefined) = ratio(self.tp, self.tp + self.fp);
        let (mut recall, recall_undefined) = ratio(self.tp, self.tp + self.fn_);
        if precision_undefined && recall_undefined {
            // no positives predicted and none to find: nothing was missed
            precision = 1.0;
            recall = 1.0;
        }
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        PointMetrics {
            accuracy: ratio(self.tp + self.tn, self.total()).0,
            precision,
            recall,
            f1,
            precision_undefined,
            recall_undefined,
        }
    }

    /// The same counts with the negative class as target.
    pub fn flipped(&self) -> Confusion {
        Confusion {
            tp: self.tn,
            fp: self.fn_,
            tn: self.tp,
            fn_: self.fp,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// No positive predictions. Precision reads 0, or 1 when recall is
    /// undefined as well.
    pub precision_undefined: bool,
    /// No positive gold labels. Recall reads 0, or 1 when precision is
    /// undefined as well.
    pub recall_undefined: bool,
}

fn check_lengths(predictions: &[Label], labels: &[Label]) -> Result<(), EvalError> {
    if predictions.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            predictions: predictions.len(),
            labels: labels.len(),
        });
    }
    if predictions.is_empty() {
        return Err(EvalError::Empty);
    }
    Ok(())
}

pub fn point_metrics(predictions: &[Label], labels: &[Label]) -> Result<PointMetrics, EvalError> {
    check_lengths(predictions, labels)?;
    Ok(Confusion::from_pairs(predictions.iter().zip(labels)).metrics())
}

/// Mean of the per-class F1 scores.
pub fn macro_f1(predictions: &[Label], labels: &[Label]) -> Result<f64, EvalError> {
    check_lengths(predictions, labels)?;
    let c = Confusion::from_pairs(predictions.iter().zip(labels));
    Ok((c.metrics().f1 + c.flipped().metrics().f1) / 2.0)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub std: f64,
}

impl MetricSummary {
    /// Mean and population standard deviation.
    pub fn of(values: &[f64]) -> MetricSummary {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        MetricSummary {
            mean,
            std: var.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: MetricSummary,
    pub precision: MetricSummary,
    pub recall: MetricSummary,
    pub f1: MetricSummary,
    pub n_bootstrap: usize,
    pub seed: u64,
}

/// Indices of resample `b`. Each resample draws from its own ChaCha stream,
/// so resamples are independent of evaluation order.
pub fn resample_indices(n: usize, seed: u64, b: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(b as u64);
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

pub fn bootstrap_metrics(
    predictions: &[Label],
    labels: &[Label],
    n_bootstrap: usize,
    seed: u64,
) -> Result<EvalReport, EvalError> {
    check_lengths(predictions, labels)?;
    if n_bootstrap == 0 {
        return Err(EvalError::NoResamples);
    }
    let n = predictions.len();
    let mut cols: [Vec<f64>; 4] = Default::default();
    for b in 0..n_bootstrap {
        let idx = resample_indices(n, seed, b);
        let m = Confusion::from_pairs(idx.iter().map(|&i| (&predictions[i], &labels[i]))).metrics();
        for (col, v) in cols.iter_mut().zip([m.accuracy, m.precision, m.recall, m.f1]) {
            col.push(v);
        }
    }
    let [accuracy, precision, recall, f1] = cols.map(|c| MetricSummary::of(&c));
    Ok(EvalReport {
        accuracy,
        precision,
        recall,
        f1,
        n_bootstrap,
        seed,
    })
}

impl EvalReport {
    /// Aligned text table: one row per model, each cell `mean (std)`.
    pub fn table(rows: &[(&str, &EvalReport)]) -> String {
        let header = ["Model", "Accuracy", "F1", "Precision", "Recall"];
        let mut cells: Vec<Vec<String>> = vec![header.iter().map(|h| h.to_string()).collect()];
        for (name, r) in rows {
            let cell = |m: &MetricSummary| format!("{:.2} ({:.2})", m.mean, m.std);
            cells.push(vec![
                name.to_string(),
                cell(&r.accuracy),
                cell(&r.f1),
                cell(&r.precision),
                cell(&r.recall),
            ]);
        }
        let widths: Vec<usize> = (0..header.len())
            .map(|c| cells.iter().map(|row| row[c].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for row in &cells {
            let line: Vec<String> = row
                .iter()
                .zip(&widths)
                .map(|(s, w)| format!("{s:<w$}"))
                .collect();
            let _ = writeln!(out, "{}", line.join("  ").trim_end());
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AgreementLevel {
    None,
    Minimal,
    Weak,
    Moderate,
    Strong,
    AlmostPerfect,
}

impl AgreementLevel {
    /// Contiguous half-open bands: [0,.20) none, [.20,.40) minimal,
    /// [.40,.60) weak, [.60,.80) moderate, [.80,.90) strong, [.90,1]
    /// almost perfect. Negative kappa maps to none.
    pub fn from_kappa(kappa: f64) -> AgreementLevel {
        match kappa {
            k if k >= 0.90 => AgreementLevel::AlmostPerfect,
            k if k >= 0.80 => AgreementLevel::Strong,
            k if k >= 0.60 => AgreementLevel::Moderate,
            k if k >= 0.40 => AgreementLevel::Weak,
            k if k >= 0.20 => AgreementLevel::Minimal,
            _ => AgreementLevel::None,
        }
    }
}

impl fmt::Display for AgreementLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AgreementLevel::None => "None",
            AgreementLevel::Minimal => "Minimal",
            AgreementLevel::Weak => "Weak",
            AgreementLevel::Moderate => "Moderate",
            AgreementLevel::Strong => "Strong",
            AgreementLevel::AlmostPerfect => "Almost perfect",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaReport {
    pub kappa: f64,
    pub agreement_level: AgreementLevel,
}

impl KappaReport {
    fn new(kappa: f64) -> KappaReport {
        KappaReport {
            kappa,
            agreement_level: AgreementLevel::from_kappa(kappa),
        }
    }
}

/// Fleiss' kappa. `counts[i][j]` is how many raters put item `i` in
/// category `j`; every item must have the same number (≥ 2) of ratings.
pub fn fleiss_kappa(counts: &[Vec<u32>]) -> Result<KappaReport, EvalError> {
    let first = counts.first().ok_or(EvalError::Empty)?;
    let categories = first.len();
    let raters: u32 = first.iter().sum();
    for (row, item) in counts.iter().enumerate() {
        if item.len() != categories {
            return Err(EvalError::RaggedMatrix {
                row: row + 1,
                reason: format!("{} categories, expected {categories}", item.len()),
            });
        }
        let sum: u32 = item.iter().sum();
        if sum != raters {
            return Err(EvalError::RaggedMatrix {
                row: row + 1,
                reason: format!("{sum} ratings, expected {raters}"),
            });
        }
    }
    if raters < 2 {
        return Err(EvalError::TooFewRaters);
    }
    let n = raters as f64;
    let items = counts.len() as f64;
    let p_bar = counts
        .iter()
        .map(|item| {
            let sq: f64 = item.iter().map(|&c| (c as f64).powi(2)).sum();
            (sq - n) / (n * (n - 1.0))
        })
        .sum::<f64>()
        / items;
    let p_e: f64 = (0..categories)
        .map(|j| {
            let share = counts.iter().map(|item| item[j] as f64).sum::<f64>() / (items * n);
            share * share
        })
        .sum();
    if p_e >= 1.0 {
        // every rating in one category: agreement is trivially perfect
        return Ok(KappaReport::new(1.0));
    }
    Ok(KappaReport::new((p_bar - p_e) / (1.0 - p_e)))
}

/// Cohen's kappa for two raters over the same items.
pub fn cohen_kappa<T: Ord>(a: &[T], b: &[T]) -> Result<KappaReport, EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::LengthMismatch {
            predictions: a.len(),
            labels: b.len(),
        });
    }
    if a.is_empty() {
        return Err(EvalError::Empty);
    }
    let n = a.len() as f64;
    let observed = a.iter().zip(b).filter(|(x, y)| x == y).count() as f64 / n;
    let mut marginals: BTreeMap<&T, (f64, f64)> = BTreeMap::new();
    for x in a {
        marginals.entry(x).or_default().0 += 1.0;
    }
    for y in b {
        marginals.entry(y).or_default().1 += 1.0;
    }
    let expected: f64 = marginals.values().map(|(ca, cb)| (ca / n) * (cb / n)).sum();
    if expected >= 1.0 {
        return Ok(KappaReport::new(1.0));
    }
    Ok(KappaReport::new((observed - expected) / (1.0 - expected)))
}

/// Parses comma-separated per-item category counts. A first line that is
/// not numeric is taken as a header; blank lines and `#` lines are skipped.
pub fn parse_rating_matrix(text: &str) -> Result<Vec<Vec<u32>>, EvalError> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parsed: Result<Vec<u32>, _> = line.split(',').map(|c| c.trim().parse::<u32>()).collect();
        match parsed {
            Ok(row) => rows.push(row),
            Err(_) if rows.is_empty() && i == 0 => continue,
            Err(e) => {
                return Err(EvalError::BadRatings {
                    line: i + 1,
                    reason: e.to_string(),
                })
            }
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::{Negative as N, Positive as P};

    #[test]
    fn perfect_predictions() {
        let gold = [P, N, P, N, N];
        let m = point_metrics(&gold, &gold).unwrap();
        assert_eq!((m.accuracy, m.precision, m.recall, m.f1), (1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn all_positive_predictor() {
        // TP=2 FP=2 FN=0: precision 1/2, recall 1, F1 = 2 * (1/2) / (3/2)
        let m = point_metrics(&[P, P, P, P], &[P, P, N, N]).unwrap();
        assert_eq!(m.precision, 0.5);
        assert_eq!(m.recall, 1.0);
        assert!((m.f1 - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.accuracy, 0.5);
    }

    #[test]
    fn no_predicted_positives_is_flagged() {
        let m = point_metrics(&[N, N], &[P, N]).unwrap();
        assert!(m.precision_undefined);
        assert_eq!((m.precision, m.f1), (0.0, 0.0));
        assert!(!m.recall_undefined);
        let m = point_metrics(&[N, N], &[N, N]).unwrap();
        assert!(m.precision_undefined && m.recall_undefined);
        assert_eq!((m.precision, m.recall, m.f1), (1.0, 1.0, 1.0));
        let m = point_metrics(&[P, N], &[N, N]).unwrap();
        assert!(m.recall_undefined && !m.precision_undefined);
        assert_eq!((m.precision, m.recall, m.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn length_mismatch() {
        assert_eq!(
            point_metrics(&[P], &[P, N]),
            Err(EvalError::LengthMismatch {
                predictions: 1,
                labels: 2
            })
        );
        assert_eq!(point_metrics(&[], &[]), Err(EvalError::Empty));
    }

    #[test]
    fn macro_f1_averages_classes() {
        // positive F1 = 2/3; negative: TP=0 so F1 = 0
        assert!((macro_f1(&[P, P, P, P], &[P, P, N, N]).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn bootstrap_of_perfect_classifier() {
        let gold = [P, N, N, P, P, N];
        let r = bootstrap_metrics(&gold, &gold, 200, 5).unwrap();
        let one = MetricSummary { mean: 1.0, std: 0.0 };
        assert_eq!([r.accuracy, r.precision, r.recall, r.f1], [one; 4]);
        assert_eq!(r, bootstrap_metrics(&gold, &gold, 200, 5).unwrap());
        assert!(bootstrap_metrics(&gold, &gold, 0, 5).is_err());
    }

    #[test]
    fn single_resample_matches_point_metric() {
        let pred = [P, N, P, P, N, N, P];
        let gold = [P, P, N, P, N, N, N];
        let r = bootstrap_metrics(&pred, &gold, 1, 11).unwrap();
        let idx = resample_indices(pred.len(), 11, 0);
        let p: Vec<Label> = idx.iter().map(|&i| pred[i]).collect();
        let g: Vec<Label> = idx.iter().map(|&i| gold[i]).collect();
        let m = point_metrics(&p, &g).unwrap();
        assert_eq!(r.f1, MetricSummary { mean: m.f1, std: 0.0 });
        assert_eq!(r.accuracy.mean, m.accuracy);
    }

    #[test]
    fn table_layout() {
        let r = EvalReport {
            accuracy: MetricSummary { mean: 0.734, std: 0.012 },
            precision: MetricSummary { mean: 0.75, std: 0.02 },
            recall: MetricSummary { mean: 0.7, std: 0.02 },
            f1: MetricSummary { mean: 0.72, std: 0.015 },
            n_bootstrap: 10,
            seed: 1,
        };
        let t = EvalReport::table(&[("NB", &r)]);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines[0], "Model  Accuracy     F1           Precision    Recall");
        assert_eq!(lines[1], "NB     0.73 (0.01)  0.72 (0.01)  0.75 (0.02)  0.70 (0.02)");
    }

    #[test]
    fn fleiss_unanimous() {
        let k = fleiss_kappa(&[vec![4, 0], vec![0, 4], vec![4, 0]]).unwrap();
        assert_eq!(k.kappa, 1.0);
        assert_eq!(k.agreement_level, AgreementLevel::AlmostPerfect);
        assert_eq!(fleiss_kappa(&[vec![3, 0], vec![3, 0]]).unwrap().kappa, 1.0);
    }

    #[test]
    fn fleiss_balanced_disagreement() {
        // P_i = 1, 1, 0, 0 so P̄ = 1/2; p_j = 1/2 each so P̄e = 1/2
        let k = fleiss_kappa(&[vec![2, 0], vec![0, 2], vec![1, 1], vec![1, 1]]).unwrap();
        assert!(k.kappa.abs() < 1e-12);
        assert_eq!(k.agreement_level, AgreementLevel::None);
    }

    #[test]
    fn fleiss_rejects_ragged() {
        assert!(matches!(
            fleiss_kappa(&[vec![2, 0], vec![1, 2]]),
            Err(EvalError::RaggedMatrix { row: 2, .. })
        ));
        assert!(matches!(
            fleiss_kappa(&[vec![2, 0], vec![1, 1, 0]]),
            Err(EvalError::RaggedMatrix { .. })
        ));
        assert_eq!(fleiss_kappa(&[vec![1, 0]]), Err(EvalError::TooFewRaters));
        assert_eq!(fleiss_kappa(&[]), Err(EvalError::Empty));
    }

    #[test]
    fn agreement_bands() {
        use AgreementLevel::*;
        let cases = [
            (-0.3, None),
            (0.0, None),
            (0.19, None),
            (0.2, Minimal),
            (0.45, Weak),
            (0.65, Moderate),
            (0.8, Strong),
            (0.9, AlmostPerfect),
            (1.0, AlmostPerfect),
        ];
        for (k, level) in cases {
            assert_eq!(AgreementLevel::from_kappa(k), level, "{k}");
        }
    }

    #[test]
    fn cohen_examples() {
        assert_eq!(cohen_kappa(&[P, N, P], &[P, N, P]).unwrap().kappa, 1.0);
        // observed 1/2, expected 1/2
        assert!(cohen_kappa(&[P, P, N, N], &[P, N, P, N]).unwrap().kappa.abs() < 1e-15);
        assert!(cohen_kappa(&[P], &[P, N]).is_err());
    }

    #[test]
    fn rating_csv() {
        let m = parse_rating_matrix("negative,positive\n4,0\n\n1,3\n").unwrap();
        assert_eq!(m, vec![vec![4, 0], vec![1, 3]]);
        assert!(matches!(
            parse_rating_matrix("1,2\nx,1\n"),
            Err(EvalError::BadRatings { line: 2, .. })
        ));
    }
}
