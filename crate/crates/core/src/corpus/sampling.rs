use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{CorpusError, SentenceRecord};
use crate::label::Label;

/// Draws `n_per_class` labeled records per class without replacement.
///
/// Pools are visited in label order (negative, then positive) with one RNG
/// stream seeded from `seed`. Within each class the sampled records keep
/// their input order. Unlabeled records are ignored.
pub fn sample_balanced(
    records: &[SentenceRecord],
    n_per_class: usize,
    seed: u64,
) -> Result<Vec<SentenceRecord>, CorpusError> {
    let pools = Label::ALL.map(|class| {
        records
            .iter()
            .filter(|r| r.label == Some(class))
            .collect::<Vec<_>>()
    });
    for class in Label::ALL {
        let available = pools[class.index()].len();
        if available < n_per_class {
            return Err(CorpusError::InsufficientClass {
                class,
                needed: n_per_class,
                available,
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(pools
        .iter()
        .flat_map(|pool| draw(&mut rng, pool, n_per_class))
        .collect())
}

/// Draws `k_per_class` records from each predicted class. `predictions[i]`
/// is the classifier's label for `records[i]`.
pub fn prediction_based_sample(
    records: &[SentenceRecord],
    predictions: &[Label],
    k_per_class: usize,
    seed: u64,
) -> Result<Vec<SentenceRecord>, CorpusError> {
    if records.len() != predictions.len() {
        return Err(CorpusError::PredictionCountMismatch {
            records: records.len(),
            predictions: predictions.len(),
        });
    }
    let pools = Label::ALL.map(|class| {
        records
            .iter()
            .zip(predictions)
            .filter(|(_, &p)| p == class)
            .map(|(r, _)| r)
            .collect::<Vec<_>>()
    });
    // Report the positive pool first: it is the one that runs dry in practice.
    for class in [Label::Positive, Label::Negative] {
        let available = pools[class.index()].len();
        if available < k_per_class {
            return Err(if available == 0 {
                CorpusError::PredictedPoolEmpty { class }
            } else {
                CorpusError::PredictedPoolTooSmall {
                    class,
                    needed: k_per_class,
                    available,
                }
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(pools
        .iter()
        .flat_map(|pool| draw(&mut rng, pool, k_per_class))
        .collect())
}

fn draw(rng: &mut ChaCha8Rng, pool: &[&SentenceRecord], n: usize) -> Vec<SentenceRecord> {
    let mut picked = index::sample(rng, pool.len(), n).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| pool[i].clone()).collect()
}
