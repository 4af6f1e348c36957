//! Deterministic planted-cluster corpus generation.
//!
//! Produces a labeled corpus where members of a cluster share `overlap` of
//! their `k` positive classes. The shared classes carry cluster-specific
//! base probabilities perturbed per image; the remaining classes are drawn
//! per image and carry the highest probabilities. Retrieval quality on such
//! a corpus therefore depends on how many of the shared classes survive
//! top-K truncation: small K keeps mostly the per-image classes, large K
//! pulls in the full cluster signature.
//!
//! Generation is fully determined by the seed: the same config yields the
//! same corpus, entry for entry.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::features::{ClassId, SparseFeature};
use crate::metrics::LabelSet;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("bad synth config: {0}")]
    BadConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub n_classes: usize,
    /// Positive classes per image.
    pub k: usize,
    pub clusters: usize,
    pub per_cluster: usize,
    /// Classes shared by every member of a cluster, `0..=k`.
    pub overlap: usize,
    pub seed: u64,
    /// When > 0, adds a second label `group<c mod groups>` per image so
    /// relevance levels can exceed 1.
    pub secondary_groups: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_classes: 1000,
            k: 60,
            clusters: 10,
            per_cluster: 100,
            overlap: 40,
            seed: 42,
            secondary_groups: 0,
        }
    }
}

/// One generated image: its sparse feature and ground-truth labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthImage {
    pub feature: SparseFeature,
    pub labels: LabelSet,
}

// Weight ranges. Per-image classes outweigh the cluster-shared ones, so the
// shared signature only enters the feature as K grows past k - overlap.
const SHARED_BASE: std::ops::Range<f64> = 0.10..0.50;
const SHARED_NOISE: std::ops::Range<f64> = 0.80..1.20;
const INDIVIDUAL: std::ops::Range<f64> = 0.80..1.60;

pub fn generate(cfg: &SynthConfig) -> Result<Vec<SynthImage>, SynthError> {
    validate(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut images = Vec::with_capacity(cfg.clusters * cfg.per_cluster);
    for c in 0..cfg.clusters {
        let shared = sample_classes(&mut rng, cfg.n_classes, cfg.overlap, &BTreeSet::new());
        let base: Vec<f64> = shared
            .iter()
            .map(|_| rng.gen_range(SHARED_BASE))
            .collect();
        let shared_set: BTreeSet<u32> = shared.iter().copied().collect();

        for i in 0..cfg.per_cluster {
            let individual =
                sample_classes(&mut rng, cfg.n_classes, cfg.k - cfg.overlap, &shared_set);
            let mut weighted: Vec<(u32, f64)> = Vec::with_capacity(cfg.k);
            for (&class, &w) in shared.iter().zip(&base) {
                weighted.push((class, w * rng.gen_range(SHARED_NOISE)));
            }
            for &class in &individual {
                weighted.push((class, rng.gen_range(INDIVIDUAL)));
            }
            weighted.sort_unstable_by_key(|&(class, _)| class);
            let total: f64 = weighted.iter().map(|&(_, w)| w).sum();
            let entries: Vec<(ClassId, f64)> = weighted
                .into_iter()
                .map(|(class, w)| (ClassId::new(class).expect("classes are 1-based"), w / total))
                .collect();

            let image_id = format!("c{c:03}_i{i:05}");
            let feature = SparseFeature::from_entries(&image_id, entries)
                .expect("generated entries are sorted and positive");
            let mut label_names = vec![format!("cluster{c:03}")];
            if cfg.secondary_groups > 0 {
                label_names.push(format!("group{:03}", c % cfg.secondary_groups));
            }
            images.push(SynthImage {
                feature,
                labels: LabelSet::new(image_id, label_names),
            });
        }
    }
    Ok(images)
}

fn validate(cfg: &SynthConfig) -> Result<(), SynthError> {
    let fail = |msg: &str| Err(SynthError::BadConfig(msg.into()));
    if cfg.clusters == 0 || cfg.per_cluster == 0 {
        return fail("clusters and per-cluster counts must be positive");
    }
    if cfg.k == 0 || cfg.k > cfg.n_classes {
        return fail("k must lie in 1..=n_classes");
    }
    if cfg.overlap > cfg.k {
        return fail("overlap cannot exceed k");
    }
    // Individual classes are drawn outside the shared set.
    if cfg.k - cfg.overlap > cfg.n_classes - cfg.overlap {
        return fail("not enough classes outside the shared set");
    }
    Ok(())
}

/// Draws `count` distinct class ids from `1..=n_classes`, avoiding
/// `excluded`, by rejection. Deterministic given the rng state.
fn sample_classes(
    rng: &mut ChaCha8Rng,
    n_classes: usize,
    count: usize,
    excluded: &BTreeSet<u32>,
) -> Vec<u32> {
    let mut picked = BTreeSet::new();
    while picked.len() < count {
        let class = rng.gen_range(1..=n_classes as u32);
        if !excluded.contains(&class) {
            picked.insert(class);
        }
    }
    picked.into_iter().collect()
}
