//! Sparse class-probability features, fusion-based similarity scoring,
//! filter-pruned ranked retrieval, and NDCG/ACG ranking evaluation.
//!
//! The pipeline, end to end:
//!
//! 1. [`features`] — dense classifier probability vectors become compact
//!    top-K sparse features.
//! 2. [`similarity`] — a candidate pair is coarse-filtered on shared class
//!    count, fused over the union of its class ids, and scored.
//! 3. [`index`] — a feature database answers ranked top-p queries via a
//!    posting-list pruned scan.
//! 4. [`metrics`] — rankings are graded against multi-label ground truth
//!    with NDCG@p and ACG@p.
//! 5. [`synth`] — deterministic planted-cluster corpora for testing and
//!    benchmarks without any classifier in the loop.

pub mod features;
pub mod index;
pub mod metrics;
pub mod similarity;
pub mod synth;

pub use features::{
    shared_class_count, truncate_top_k, ClassId, FeatureError, SemanticVector, SparseFeature,
};
pub use index::{FeatureIndex, IndexError, RankedItem, RankedList};
pub use metrics::{
    acg_at_p, dcg_at_p, evaluate_run, ndcg_at_p, relevance_level, LabelSet, MetricsError,
    QueryEval, RelevanceKind, RunReport,
};
pub use similarity::{
    coarse_filter, fuse, score_pair, semantic_distance, DistanceParams, FusedPairs, PairScore,
    SimilarityError, SimilarityScore,
};
pub use synth::{generate, SynthConfig, SynthError, SynthImage};
