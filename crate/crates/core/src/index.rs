//! Feature database with filter-pruned ranked scans, plus the line-oriented
//! index file format.
//!
//! The index keeps one posting list per class id (the sorted positions of
//! every feature containing that class), so a query counts shared classes
//! for all candidates in one pass over its own posting lists instead of
//! merging entry lists pairwise. Candidates below the `min_shared`
//! threshold are never fused or scored; they still appear in the ranking
//! after all scored items (ordered by descending shared count, then
//! ascending image id) so a top-`p` list is always fully populated.
//!
//! The index is immutable after construction and queries take `&self`, so
//! any number of workers may query concurrently without locking.

use std::collections::HashMap;
use std::io::{self, BufRead, Write};

use thiserror::Error;

use crate::features::{ClassId, FeatureError, SparseFeature};
use crate::similarity::{score_pair, DistanceParams, PairScore, SimilarityError};

const FORMAT_TAG: &str = "semdist-index v1";

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("duplicate image id {0}")]
    DuplicateImageId(String),
    #[error("feature {image_id}: class {class} exceeds configured class count {n_classes}")]
    ClassOutOfRange {
        image_id: String,
        class: u32,
        n_classes: usize,
    },
    #[error("image id {0:?} contains whitespace; cannot be serialized")]
    UnserializableId(String),
    #[error("index file line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Immutable database of sparse features with per-class posting lists.
#[derive(Debug, Clone)]
pub struct FeatureIndex {
    /// Sorted by ascending image id.
    features: Vec<SparseFeature>,
    id_to_pos: HashMap<String, u32>,
    /// `postings[class.index()]` = positions of features containing `class`,
    /// ascending (and therefore also ascending by image id).
    postings: Vec<Vec<u32>>,
    params: DistanceParams,
    n_classes: usize,
}

/// One ranked candidate: either scored, or rejected by the coarse filter
/// with its shared-class count.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedItem {
    pub image_id: String,
    pub outcome: PairScore,
}

/// Query result: scored items first (descending score), rejected items
/// after (descending shared count), ties broken by ascending image id.
/// The query's own image id never appears.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    pub query_id: String,
    pub items: Vec<RankedItem>,
}

impl FeatureIndex {
    /// Builds an index over `features`. Image ids must be unique and every
    /// class id must lie within `1..=n_classes`.
    pub fn build(
        mut features: Vec<SparseFeature>,
        params: DistanceParams,
        n_classes: usize,
    ) -> Result<Self, IndexError> {
        features.sort_unstable_by(|a, b| a.image_id().cmp(b.image_id()));
        for w in features.windows(2) {
            if w[0].image_id() == w[1].image_id() {
                return Err(IndexError::DuplicateImageId(w[0].image_id().to_owned()));
            }
        }
        let mut postings = vec![Vec::new(); n_classes];
        let mut id_to_pos = HashMap::with_capacity(features.len());
        for (pos, feature) in features.iter().enumerate() {
            for &(class, _) in feature.entries() {
                if class.index() >= n_classes {
                    return Err(IndexError::ClassOutOfRange {
                        image_id: feature.image_id().to_owned(),
                        class: class.get(),
                        n_classes,
                    });
                }
                postings[class.index()].push(pos as u32);
            }
            id_to_pos.insert(feature.image_id().to_owned(), pos as u32);
        }
        Ok(Self {
            features,
            id_to_pos,
            postings,
            params,
            n_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn params(&self) -> &DistanceParams {
        &self.params
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// Features in index order (ascending image id).
    pub fn features(&self) -> &[SparseFeature] {
        &self.features
    }

    pub fn feature(&self, image_id: &str) -> Option<&SparseFeature> {
        self.id_to_pos
            .get(image_id)
            .map(|&pos| &self.features[pos as usize])
    }

    pub fn contains(&self, image_id: &str) -> bool {
        self.id_to_pos.contains_key(image_id)
    }

    /// Position of an image in [`Self::features`] order.
    pub fn position(&self, image_id: &str) -> Option<usize> {
        self.id_to_pos.get(image_id).map(|&pos| pos as usize)
    }

    /// Image ids containing `class`, ascending.
    pub fn posting_ids(&self, class: ClassId) -> Vec<&str> {
        match self.postings.get(class.index()) {
            Some(list) => list
                .iter()
                .map(|&pos| self.features[pos as usize].image_id())
                .collect(),
            None => Vec::new(),
        }
    }

    /// Shared-class counts of `q` against every database feature, in index
    /// order, accumulated from the posting lists.
    fn shared_counts(&self, q: &SparseFeature) -> Vec<u32> {
        let mut counts = vec![0u32; self.features.len()];
        for &(class, _) in q.entries() {
            if let Some(list) = self.postings.get(class.index()) {
                for &pos in list {
                    counts[pos as usize] += 1;
                }
            }
        }
        counts
    }

    /// Ranks every database feature against `q` and returns the top `p`.
    ///
    /// Shared-class counts come from the posting lists; the outcome is
    /// identical to calling [`score_pair`] against every database item.
    /// A feature whose image id equals `q`'s is skipped. Under
    /// `min_shared = 0`, candidates with no shared class at all have no
    /// defined score and are ranked with the rejected items.
    pub fn query(&self, q: &SparseFeature, p: usize) -> RankedList {
        let ranked = self.query_positions(q, p);
        RankedList {
            query_id: q.image_id().to_owned(),
            items: ranked
                .into_iter()
                .map(|(pos, outcome)| RankedItem {
                    image_id: self.features[pos].image_id().to_owned(),
                    outcome,
                })
                .collect(),
        }
    }

    /// Like [`Self::query`] but yields index positions instead of cloned
    /// ids; used by evaluation to avoid re-resolving ids.
    pub(crate) fn query_positions(&self, q: &SparseFeature, p: usize) -> Vec<(usize, PairScore)> {
        let counts = self.shared_counts(q);
        let mut items: Vec<(usize, PairScore)> = Vec::with_capacity(self.features.len());
        for (pos, feature) in self.features.iter().enumerate() {
            if feature.image_id() == q.image_id() {
                continue;
            }
            let shared = counts[pos] as usize;
            let outcome = if shared < self.params.min_shared {
                PairScore::Rejected { shared }
            } else {
                match score_pair(q, feature, &self.params) {
                    Ok(score) => score,
                    // Only reachable with min_shared = 0: no shared class
                    // means no defined score, so rank with the rejected.
                    Err(SimilarityError::NoSharedClasses)
                    | Err(SimilarityError::EmptyUnion) => PairScore::Rejected { shared },
                }
            };
            items.push((pos, outcome));
        }
        items.sort_by(|a, b| Self::rank_order(&a.1, &b.1).then_with(|| a.0.cmp(&b.0)));
        items.truncate(p);
        items
    }

    /// Total order over outcomes: scored before rejected, higher scores
    /// first, higher shared counts first. Position (= ascending image id)
    /// breaks the remaining ties at the call site.
    fn rank_order(a: &PairScore, b: &PairScore) -> std::cmp::Ordering {
        use PairScore::*;
        match (a, b) {
            (Scored(x), Scored(y)) => y.0.total_cmp(&x.0),
            (Scored(_), Rejected { .. }) => std::cmp::Ordering::Less,
            (Rejected { .. }, Scored(_)) => std::cmp::Ordering::Greater,
            (Rejected { shared: x }, Rejected { shared: y }) => y.cmp(x),
        }
    }

    /// Writes the line-oriented index format:
    ///
    /// ```text
    /// semdist-index v1 N=<classcount> K=<k>
    /// image_id<TAB>k<TAB>class:prob class:prob ...
    /// ```
    ///
    /// Classes ascend within a line and probabilities are printed as
    /// shortest round-trip decimals, so reloading reproduces the index
    /// exactly.
    pub fn write_to(&self, mut w: impl Write) -> Result<(), IndexError> {
        writeln!(
            w,
            "{FORMAT_TAG} N={} K={}",
            self.n_classes, self.params.k
        )?;
        for feature in &self.features {
            let id = feature.image_id();
            if id.is_empty() || id.chars().any(char::is_whitespace) {
                return Err(IndexError::UnserializableId(id.to_owned()));
            }
            write!(w, "{id}\t{}\t", feature.k())?;
            for (i, &(class, prob)) in feature.entries().iter().enumerate() {
                if i > 0 {
                    w.write_all(b" ")?;
                }
                write!(w, "{class}:{prob}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Reads the format produced by [`Self::write_to`]. The header's `K`
    /// replaces `params.k`; the remaining weights and thresholds come from
    /// the caller.
    pub fn read_from(r: impl BufRead, params: DistanceParams) -> Result<Self, IndexError> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| IndexError::Parse {
                line: 1,
                msg: "empty file".into(),
            })??;
        let (n_classes, k) = parse_header(&header)?;
        let mut features = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let lineno = lineno + 2;
            let line = line?;
            if line.is_empty() {
                continue;
            }
            features.push(parse_feature_line(&line, lineno)?);
        }
        Self::build(features, DistanceParams { k, ..params }, n_classes)
    }
}

fn parse_header(header: &str) -> Result<(usize, usize), IndexError> {
    let bad = |msg: &str| IndexError::Parse {
        line: 1,
        msg: msg.into(),
    };
    let rest = header
        .strip_prefix(FORMAT_TAG)
        .ok_or_else(|| bad("not a semdist-index v1 file"))?;
    let mut n_classes = None;
    let mut k = None;
    for part in rest.split_whitespace() {
        if let Some(v) = part.strip_prefix("N=") {
            n_classes = Some(v.parse::<usize>().map_err(|_| bad("bad N value"))?);
        } else if let Some(v) = part.strip_prefix("K=") {
            k = Some(v.parse::<usize>().map_err(|_| bad("bad K value"))?);
        } else {
            return Err(bad(&format!("unexpected header field {part:?}")));
        }
    }
    match (n_classes, k) {
        (Some(n), Some(k)) if n >= 1 && k >= 1 => Ok((n, k)),
        _ => Err(bad("header must carry N=<classcount> and K=<k>")),
    }
}

fn parse_feature_line(line: &str, lineno: usize) -> Result<SparseFeature, IndexError> {
    let bad = |msg: String| IndexError::Parse { line: lineno, msg };
    let mut fields = line.splitn(3, '\t');
    let id = fields
        .next()
        .filter(|s| !s.is_empty())
        .ok_or_else(|| bad("missing image id".into()))?;
    let k: usize = fields
        .next()
        .ok_or_else(|| bad("missing entry count".into()))?
        .parse()
        .map_err(|_| bad("bad entry count".into()))?;
    let entry_field = fields
        .next()
        .ok_or_else(|| bad("missing entries field".into()))?;
    let mut entries = Vec::with_capacity(k);
    for token in entry_field.split_whitespace() {
        let (class_s, prob_s) = token
            .split_once(':')
            .ok_or_else(|| bad(format!("bad entry token {token:?}")))?;
        let class = class_s
            .parse::<u32>()
            .ok()
            .and_then(|c| ClassId::new(c).ok())
            .ok_or_else(|| bad(format!("bad class id {class_s:?}")))?;
        let prob = prob_s
            .parse::<f64>()
            .map_err(|_| bad(format!("bad probability {prob_s:?}")))?;
        entries.push((class, prob));
    }
    if entries.len() != k {
        return Err(bad(format!(
            "entry count {k} does not match {} entries",
            entries.len()
        )));
    }
    Ok(SparseFeature::from_entries(id, entries)?)
}
