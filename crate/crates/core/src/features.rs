//! Dense class-probability vectors and their compact sparse top-K form.
//!
//! A classifier emits one probability per class for every image. Only the
//! highest-probability classes carry useful semantic signal, so the dense
//! vector is truncated to its top-K entries and stored as `(class, prob)`
//! pairs sorted by class id. The ascending-id order makes downstream fusion
//! a linear sorted merge.

use std::fmt;

use thiserror::Error;

/// Validation errors for vectors and sparse features.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error("vector {image_id}: expected {expected} probabilities, got {got}")]
    BadLength {
        image_id: String,
        expected: usize,
        got: usize,
    },
    #[error("vector {image_id}: probability {value} for class {class} outside [0, 1]")]
    OutOfRange {
        image_id: String,
        class: u32,
        value: f64,
    },
    #[error("vector {image_id}: probabilities sum to {sum}, outside 1 +/- {eps}")]
    NotNormalized {
        image_id: String,
        sum: f64,
        eps: f64,
    },
    #[error("class id {0} invalid: ids are 1-based")]
    BadClassId(u32),
    #[error("feature {image_id}: class ids not strictly increasing")]
    UnsortedEntries { image_id: String },
    #[error("feature {image_id}: probability {value} for class {class} outside (0, 1]")]
    BadEntryProb {
        image_id: String,
        class: u32,
        value: f64,
    },
    #[error("feature {image_id}: class {class} exceeds class count {n_classes}")]
    ClassAboveLimit {
        image_id: String,
        class: u32,
        n_classes: usize,
    },
}

/// 1-based serial number of a classifier output class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClassId(u32);

impl ClassId {
    pub fn new(id: u32) -> Result<Self, FeatureError> {
        if id == 0 {
            return Err(FeatureError::BadClassId(id));
        }
        Ok(Self(id))
    }

    pub fn get(self) -> u32 {
        self.0
    }

    /// 0-based position of this class in a dense vector of length `n`.
    pub fn index(self) -> usize {
        self.0 as usize - 1
    }
}

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Dense per-image class-probability vector, one entry per class.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticVector {
    image_id: String,
    probs: Vec<f64>,
}

impl SemanticVector {
    /// Tolerance on the softmax sum check under strict validation.
    pub const SUM_EPS: f64 = 1e-3;

    pub fn new(image_id: impl Into<String>, probs: Vec<f64>) -> Self {
        Self {
            image_id: image_id.into(),
            probs,
        }
    }

    pub fn image_id(&self) -> &str {
        &self.image_id
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Checks length, the [0, 1] range of every entry, and (under `strict`)
    /// that the entries sum to 1 within [`Self::SUM_EPS`].
    ///
    /// The sum check is optional because truncated or externally produced
    /// vectors legitimately may not sum to 1.
    pub fn validate(&self, expected_len: usize, strict: bool) -> Result<(), FeatureError> {
        if self.probs.len() != expected_len {
            return Err(FeatureError::BadLength {
                image_id: self.image_id.clone(),
                expected: expected_len,
                got: self.probs.len(),
            });
        }
        for (i, &p) in self.probs.iter().enumerate() {
            if !(0.0..=1.0).contains(&p) || p.is_nan() {
                return Err(FeatureError::OutOfRange {
                    image_id: self.image_id.clone(),
                    class: i as u32 + 1,
                    value: p,
                });
            }
        }
        if strict {
            let sum: f64 = self.probs.iter().sum();
            if (sum - 1.0).abs() > Self::SUM_EPS {
                return Err(FeatureError::NotNormalized {
                    image_id: self.image_id.clone(),
                    sum,
                    eps: Self::SUM_EPS,
                });
            }
        }
        Ok(())
    }
}

/// Top-K truncation of a [`SemanticVector`]: the retained `(class, prob)`
/// pairs, sorted by ascending class id.
///
/// Zero-probability classes are never stored and probabilities are kept
/// as-is (no renormalization after truncation).
#[derive(Debug, Clone, PartialEq)]
pub struct SparseFeature {
    image_id: String,
    entries: Vec<(ClassId, f64)>,
}

impl SparseFeature {
    /// Builds a feature from pre-sorted entries, validating that class ids
    /// are strictly increasing and every probability lies in (0, 1].
    pub fn from_entries(
        image_id: impl Into<String>,
        entries: Vec<(ClassId, f64)>,
    ) -> Result<Self, FeatureError> {
        let image_id = image_id.into();
        if entries.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(FeatureError::UnsortedEntries { image_id });
        }
        if let Some(&(class, prob)) = entries.iter().find(|&&(_, p)| !(p > 0.0 && p <= 1.0)) {
            return Err(FeatureError::BadEntryProb {
                image_id,
                class: class.get(),
                value: prob,
            });
        }
        Ok(Self { image_id, entries })
    }

    pub fn image_id(&self) -> &str {
        &self.image_id
    }

    pub fn entries(&self) -> &[(ClassId, f64)] {
        &self.entries
    }

    /// Number of stored entries.
    pub fn k(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn max_class(&self) -> Option<ClassId> {
        self.entries.last().map(|&(c, _)| c)
    }

    /// Expands back to a dense vector of length `n_classes`, zero-filled
    /// outside the stored entries.
    pub fn to_dense(&self, n_classes: usize) -> Result<SemanticVector, FeatureError> {
        let mut probs = vec![0.0; n_classes];
        for &(class, prob) in &self.entries {
            if class.index() >= n_classes {
                return Err(FeatureError::ClassAboveLimit {
                    image_id: self.image_id.clone(),
                    class: class.get(),
                    n_classes,
                });
            }
            probs[class.index()] = prob;
        }
        Ok(SemanticVector::new(self.image_id.clone(), probs))
    }
}

/// Keeps the `k` highest-probability classes of `v`, re-sorted by ascending
/// class id.
///
/// Ties at the K-boundary keep the lower class id, and zero-probability
/// classes are dropped even when fewer than `k` positive entries exist, so
/// the result may hold fewer than `k` pairs.
pub fn truncate_top_k(v: &SemanticVector, k: usize) -> SparseFeature {
    let mut positive: Vec<(ClassId, f64)> = v
        .probs()
        .iter()
        .enumerate()
        .filter(|&(_, &p)| p > 0.0)
        .map(|(i, &p)| (ClassId(i as u32 + 1), p))
        .collect();
    if positive.len() > k {
        // Highest probability first, lower class id wins ties.
        let by_rank = |a: &(ClassId, f64), b: &(ClassId, f64)| {
            b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0))
        };
        positive.select_nth_unstable_by(k - 1, by_rank);
        positive.truncate(k);
    }
    positive.sort_unstable_by_key(|&(c, _)| c);
    SparseFeature {
        image_id: v.image_id().to_owned(),
        entries: positive,
    }
}

/// Number of class ids common to both features (sorted-merge intersection).
pub fn shared_class_count(a: &SparseFeature, b: &SparseFeature) -> usize {
    let (xs, ys) = (a.entries(), b.entries());
    let (mut i, mut j, mut shared) = (0, 0, 0);
    while i < xs.len() && j < ys.len() {
        match xs[i].0.cmp(&ys[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                shared += 1;
                i += 1;
                j += 1;
            }
        }
    }
    shared
}
