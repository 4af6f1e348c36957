//! Pairwise similarity: coarse filtering, feature fusion, and the weighted
//! dot-minus-squared-difference score.
//!
//! Scoring a candidate pair runs in three stages:
//!
//! 1. **Coarse filter** — pairs sharing fewer than `min_shared` class ids
//!    are rejected outright, skipping fusion and scoring entirely.
//! 2. **Fusion** — the two sparse features are merged over the union of
//!    their class ids into aligned probability pairs, zero-filled where a
//!    class appears on one side only. For two K-entry features the union
//!    holds between K and 2K pairs.
//! 3. **Score** — over the fused pairs,
//!
//!    ```text
//!    D = (m1 * sum_i(f1_i * f2_i) - m2 * sum_i((f1_i - f2_i)^2)) / max_i(f1_i * f2_i)
//!    ```
//!
//!    The max-product denominator normalizes the score and damps large
//!    per-class probability gaps. Despite being called a distance, a LARGER
//!    value means MORE similar: the weighted dot term rewards matching
//!    classes and the squared-difference term penalizes mismatches.
//!
//! Accumulation always runs in ascending class-id order, so scores are
//! reproducible across runs and thread counts, and `score_pair(a, b)` is
//! bit-identical to `score_pair(b, a)`.

use std::cmp::Ordering;

use thiserror::Error;

use crate::features::{shared_class_count, ClassId, SparseFeature};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimilarityError {
    /// Both features carry no entries; there is nothing to fuse.
    #[error("cannot fuse two empty features")]
    EmptyUnion,
    /// No class has positive probability on both sides, so the normalizing
    /// max product is zero and the score is undefined.
    #[error("no shared classes: max per-class product is zero")]
    NoSharedClasses,
}

/// Weights and thresholds for pair scoring.
///
/// Only the `m1`/`m2` ratio affects the induced ranking (scaling both
/// weights jointly scales every score by the same factor), so `m2` is
/// conventionally fixed at 1 to keep reported scores reproducible.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceParams {
    /// Weight on the positive dot-product term.
    pub m1: f64,
    /// Weight on the squared-difference penalty term.
    pub m2: f64,
    /// Minimum shared-class count a pair needs to be scored at all.
    pub min_shared: usize,
    /// Top-K truncation size used when the features were extracted.
    pub k: usize,
}

impl Default for DistanceParams {
    fn default() -> Self {
        Self {
            m1: 10_000.0,
            m2: 1.0,
            min_shared: 10,
            k: 60,
        }
    }
}

impl DistanceParams {
    /// Params with `m1 = ratio` and `m2 = 1`; everything else default.
    pub fn with_ratio(ratio: f64) -> Self {
        Self {
            m1: ratio,
            ..Self::default()
        }
    }
}

/// Union-aligned probability pairs of two features, sorted by ascending
/// class id. At least one side of every pair is positive.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedPairs {
    pairs: Vec<(ClassId, f64, f64)>,
}

impl FusedPairs {
    pub fn pairs(&self) -> &[(ClassId, f64, f64)] {
        &self.pairs
    }

    /// Union size: number of distinct class ids across both inputs.
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Similarity value; finite whenever some class is shared. Larger = more
/// similar.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityScore(pub f64);

impl SimilarityScore {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Outcome of scoring one candidate pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PairScore {
    Scored(SimilarityScore),
    /// The pair failed the coarse filter; carries the shared-class count so
    /// rejected candidates can still be ordered in a ranking.
    Rejected { shared: usize },
}

impl PairScore {
    pub fn is_scored(&self) -> bool {
        matches!(self, PairScore::Scored(_))
    }
}

/// True when the pair shares at least `params.min_shared` class ids.
/// Symmetric in its arguments.
pub fn coarse_filter(a: &SparseFeature, b: &SparseFeature, params: &DistanceParams) -> bool {
    shared_class_count(a, b) >= params.min_shared
}

/// Sorted merge over the union of two entry lists. `emit` sees every class
/// id in ascending order with the per-side probabilities, zero-filled on
/// the absent side.
fn merge_union(
    a: &[(ClassId, f64)],
    b: &[(ClassId, f64)],
    mut emit: impl FnMut(ClassId, f64, f64),
) {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            Ordering::Less => {
                emit(a[i].0, a[i].1, 0.0);
                i += 1;
            }
            Ordering::Greater => {
                emit(b[j].0, 0.0, b[j].1);
                j += 1;
            }
            Ordering::Equal => {
                emit(a[i].0, a[i].1, b[j].1);
                i += 1;
                j += 1;
            }
        }
    }
    for &(c, p) in &a[i..] {
        emit(c, p, 0.0);
    }
    for &(c, p) in &b[j..] {
        emit(c, 0.0, p);
    }
}

/// Running sums of the score formula, pushed in ascending class-id order.
///
/// Shared between [`semantic_distance`] and the fusion-free fast path in
/// [`score_pair`] so both routes produce bit-identical scores.
#[derive(Debug, Default)]
struct ScoreAccumulator {
    dot: f64,
    sq_diff: f64,
    max_prod: f64,
}

impl ScoreAccumulator {
    fn push(&mut self, f1: f64, f2: f64) {
        let prod = f1 * f2;
        self.dot += prod;
        let diff = f1 - f2;
        self.sq_diff += diff * diff;
        if prod > self.max_prod {
            self.max_prod = prod;
        }
    }

    fn finish(&self, params: &DistanceParams) -> Result<SimilarityScore, SimilarityError> {
        if self.max_prod <= 0.0 {
            return Err(SimilarityError::NoSharedClasses);
        }
        Ok(SimilarityScore(
            (params.m1 * self.dot - params.m2 * self.sq_diff) / self.max_prod,
        ))
    }
}

/// Merges two features into union-aligned pairs.
pub fn fuse(a: &SparseFeature, b: &SparseFeature) -> Result<FusedPairs, SimilarityError> {
    if a.is_empty() && b.is_empty() {
        return Err(SimilarityError::EmptyUnion);
    }
    let mut pairs = Vec::with_capacity(a.k() + b.k());
    merge_union(a.entries(), b.entries(), |c, f1, f2| {
        pairs.push((c, f1, f2));
    });
    Ok(FusedPairs { pairs })
}

/// Evaluates the score formula over fused pairs.
///
/// Errors with [`SimilarityError::NoSharedClasses`] when every per-class
/// product is zero (disjoint supports); that cannot happen for pairs that
/// passed the coarse filter with `min_shared >= 1`.
pub fn semantic_distance(
    fp: &FusedPairs,
    params: &DistanceParams,
) -> Result<SimilarityScore, SimilarityError> {
    let mut acc = ScoreAccumulator::default();
    for &(_, f1, f2) in &fp.pairs {
        acc.push(f1, f2);
    }
    acc.finish(params)
}

/// Coarse-filters and scores one candidate pair.
///
/// Rejected pairs skip fusion and scoring entirely. The
/// [`SimilarityError`] cases can only surface with `min_shared = 0`, where
/// disjoint or empty pairs evade the filter.
pub fn score_pair(
    a: &SparseFeature,
    b: &SparseFeature,
    params: &DistanceParams,
) -> Result<PairScore, SimilarityError> {
    let shared = shared_class_count(a, b);
    if shared < params.min_shared {
        return Ok(PairScore::Rejected { shared });
    }
    if a.is_empty() && b.is_empty() {
        return Err(SimilarityError::EmptyUnion);
    }
    let mut acc = ScoreAccumulator::default();
    merge_union(a.entries(), b.entries(), |_, f1, f2| acc.push(f1, f2));
    acc.finish(params).map(PairScore::Scored)
}
