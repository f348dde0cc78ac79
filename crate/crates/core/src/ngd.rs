//! Normalized Google Distance over inlink sets, and the frontier traversal
//! that collects articles related to a seed.
//!
//! For articles `a`, `b` with inlink sets `A`, `B` in a graph of `|W|` articles:
//!
//! ```text
//!          ln max(|A|,|B|) - ln |A ∩ B|
//! sr(a,b) = ------------------------------
//!            ln |W| - ln min(|A|,|B|)
//! ```
//!
//! The value is a ratio of log differences, so it does not depend on the log
//! base. Natural logs are used throughout. An empty intersection (or an empty
//! inlink set) has no finite distance and yields [`Relatedness::Unrelated`].

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::link_index::{sorted_intersection_len, ArticleId, LinkIndex};

pub const DEFAULT_THRESHOLD: f64 = 0.5;
pub const DEFAULT_MAX_ITERATIONS: u32 = 2;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NgdError {
    #[error("unknown article {0:?}")]
    UnknownTitle(String),
    #[error("degenerate graph: an inlink set spans every article")]
    DegenerateGraph,
    #[error("threshold must be a positive finite number, got {0}")]
    InvalidThreshold(f64),
    #[error("max_iterations must be at least 1")]
    InvalidIterations,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Relatedness {
    Distance(f64),
    /// No article links to both; there is no finite distance.
    Unrelated,
}

impl Relatedness {
    pub fn distance(self) -> Option<f64> {
        match self {
            Relatedness::Distance(d) => Some(d),
            Relatedness::Unrelated => None,
        }
    }

    pub fn is_unrelated(self) -> bool {
        matches!(self, Relatedness::Unrelated)
    }
}

/// NGD from set cardinalities.
pub fn ngd_from_counts(
    a_len: usize,
    b_len: usize,
    common: usize,
    total: usize,
) -> Result<Relatedness, NgdError> {
    if a_len == 0 || b_len == 0 || common == 0 {
        return Ok(Relatedness::Unrelated);
    }
    let (lo, hi) = if a_len <= b_len { (a_len, b_len) } else { (b_len, a_len) };
    if lo >= total {
        return Err(NgdError::DegenerateGraph);
    }
    let numerator = (hi as f64).ln() - (common as f64).ln();
    let denominator = (total as f64).ln() - (lo as f64).ln();
    Ok(Relatedness::Distance(numerator / denominator))
}

pub fn ngd_ids(index: &LinkIndex, a: ArticleId, b: ArticleId) -> Result<Relatedness, NgdError> {
    let ia = index.inlinks_of(a);
    let ib = index.inlinks_of(b);
    ngd_from_counts(
        ia.len(),
        ib.len(),
        sorted_intersection_len(ia, ib),
        index.total_articles(),
    )
}

pub fn ngd(index: &LinkIndex, a: &str, b: &str) -> Result<Relatedness, NgdError> {
    let ia = resolve(index, a)?;
    let ib = resolve(index, b)?;
    ngd_ids(index, ia, ib)
}

fn resolve(index: &LinkIndex, title: &str) -> Result<ArticleId, NgdError> {
    index
        .id(title)
        .ok_or_else(|| NgdError::UnknownTitle(title.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraversalConfig {
    pub threshold: f64,
    pub max_iterations: u32,
}

impl Default for TraversalConfig {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_THRESHOLD,
            max_iterations: DEFAULT_MAX_ITERATIONS,
        }
    }
}

/// Best score recorded for a collected article.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NgdScore {
    pub value: f64,
    /// Frontier article the score was computed against.
    pub reference: ArticleId,
    /// Iteration (1-based) at which the article was first collected.
    pub hop: u32,
}

/// Frontier state of the traversal. Each call to [`TraversalState::step`]
/// runs one expansion: frontier, its parents, the parents' other children,
/// their parents, then one NGD per co-linked (frontier, candidate) pair.
#[derive(Debug, Clone)]
pub struct TraversalState<'a> {
    index: &'a LinkIndex,
    seed: ArticleId,
    threshold: f64,
    frontier: BTreeSet<ArticleId>,
    collected: BTreeMap<ArticleId, NgdScore>,
    hop: u32,
}

impl<'a> TraversalState<'a> {
    pub fn new(index: &'a LinkIndex, seed: &str, threshold: f64) -> Result<Self, NgdError> {
        if !(threshold > 0.0 && threshold.is_finite()) {
            return Err(NgdError::InvalidThreshold(threshold));
        }
        let seed = resolve(index, seed)?;
        Ok(Self {
            index,
            seed,
            threshold,
            frontier: BTreeSet::from([seed]),
            collected: BTreeMap::new(),
            hop: 0,
        })
    }

    pub fn frontier(&self) -> &BTreeSet<ArticleId> {
        &self.frontier
    }

    pub fn collected(&self) -> &BTreeMap<ArticleId, NgdScore> {
        &self.collected
    }

    pub fn hop(&self) -> u32 {
        self.hop
    }

    /// Runs one iteration. Returns the number of newly collected articles.
    pub fn step(&mut self) -> Result<usize, NgdError> {
        self.hop += 1;
        let index = self.index;

        // candidate b -> frontier articles sharing at least one parent with it
        let mut candidate_parents: BTreeMap<ArticleId, BTreeSet<ArticleId>> = BTreeMap::new();
        for &a in &self.frontier {
            for &parent in index.inlinks_of(a) {
                for &b in index.outlinks_of(parent) {
                    if !self.frontier.contains(&b) {
                        candidate_parents.entry(b).or_default().insert(a);
                    }
                }
            }
        }

        let mut next = BTreeSet::new();
        for (b, shared) in candidate_parents {
            if b == self.seed || self.collected.contains_key(&b) {
                continue;
            }
            let mut best: Option<(f64, ArticleId)> = None;
            for a in shared {
                let Some(d) = ngd_ids(index, a, b)?.distance() else {
                    continue;
                };
                let better = match best {
                    None => true,
                    Some((bd, ba)) => match d.total_cmp(&bd) {
                        Ordering::Less => true,
                        Ordering::Equal => index.title(a) < index.title(ba),
                        Ordering::Greater => false,
                    },
                };
                if better {
                    best = Some((d, a));
                }
            }
            if let Some((value, reference)) = best {
                if value < self.threshold {
                    self.collected.insert(
                        b,
                        NgdScore {
                            value,
                            reference,
                            hop: self.hop,
                        },
                    );
                    next.insert(b);
                }
            }
        }
        let added = next.len();
        self.frontier = next;
        Ok(added)
    }

    /// Collected articles keyed by title.
    pub fn into_result(self) -> BTreeMap<String, NgdScore> {
        self.collected
            .into_iter()
            .map(|(id, score)| (self.index.title(id).unwrap_or_default().to_string(), score))
            .collect()
    }
}

/// Collects articles related to `seed`, keeping for each the minimum score at
/// the minimum hop. Only candidates scoring below the threshold are kept and
/// expanded on the next iteration.
pub fn traverse(
    index: &LinkIndex,
    seed: &str,
    config: &TraversalConfig,
) -> Result<BTreeMap<String, NgdScore>, NgdError> {
    if config.max_iterations == 0 {
        return Err(NgdError::InvalidIterations);
    }
    let mut state = TraversalState::new(index, seed, config.threshold)?;
    for _ in 0..config.max_iterations {
        if state.frontier().is_empty() {
            break;
        }
        state.step()?;
    }
    Ok(state.into_result())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedArticle {
    pub title: String,
    pub score: f64,
    pub hop: u32,
}

/// Orders by hop, then score, then title.
pub fn rank_candidates(result: &BTreeMap<String, NgdScore>) -> Vec<RankedArticle> {
    let mut ranked: Vec<RankedArticle> = result
        .iter()
        .map(|(title, s)| RankedArticle {
            title: title.clone(),
            score: s.value,
            hop: s.hop,
        })
        .collect();
    ranked.sort_by(|x, y| {
        x.hop
            .cmp(&y.hop)
            .then(x.score.total_cmp(&y.score))
            .then_with(|| x.title.cmp(&y.title))
    });
    ranked
}

/// `title<TAB>score<TAB>hop`, scores with six decimals.
pub fn write_ranked_tsv<W: Write + ?Sized>(out: &mut W, ranked: &[RankedArticle]) -> io::Result<()> {
    for r in ranked {
        writeln!(out, "{}\t{:.6}\t{}", r.title, r.score, r.hop)?;
    }
    Ok(())
}
