//! Graded relevance from concept labels and the NDCG/ACG ranking measures.
//!
//! Relevance of a retrieved image to a query is the number of ground-truth
//! concept labels the two share (a binarized variant is available as well,
//! since published numbers do not always state which convention they used).
//! Ranking quality is measured by
//!
//! ```text
//! DCG@p  = sum_{i=1..p} (2^r_i - 1) / log2(1 + i)
//! NDCG@p = DCG@p / ideal DCG@p        (1 for the best possible ordering)
//! ACG@p  = (1/p) * sum_{i=1..p} r_i
//! ```
//!
//! with `r_i` the relevance level at rank `i`. The log base is pinned to 2;
//! any fixed base rescales DCG and its normalizer identically, so NDCG is
//! unaffected. A query whose best possible DCG is zero (nothing relevant in
//! the database) is degenerate: its NDCG reports as 0 and it is excluded
//! from mean scores, counted separately.

use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

use crate::index::FeatureIndex;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("no labels for image {0}")]
    MissingLabels(String),
    #[error("query id {0} not present in the index")]
    UnknownQueryId(String),
}

/// Ground-truth concept labels of one image. May be empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSet {
    pub image_id: String,
    pub labels: BTreeSet<String>,
}

impl LabelSet {
    pub fn new<I, S>(image_id: impl Into<String>, labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            image_id: image_id.into(),
            labels: labels.into_iter().map(Into::into).collect(),
        }
    }
}

/// Number of concept labels shared by the two images.
pub fn relevance_level(q: &LabelSet, d: &LabelSet) -> u32 {
    q.labels.intersection(&d.labels).count() as u32
}

/// How shared labels map to a relevance level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RelevanceKind {
    /// Level = number of shared labels (multi-level).
    #[default]
    SharedLabels,
    /// Level = 1 if any label is shared, else 0.
    Binary,
}

impl RelevanceKind {
    pub fn level(self, q: &LabelSet, d: &LabelSet) -> u32 {
        let shared = relevance_level(q, d);
        match self {
            RelevanceKind::SharedLabels => shared,
            RelevanceKind::Binary => shared.min(1),
        }
    }

    fn level_interned(self, q: &[u32], d: &[u32]) -> u32 {
        let shared = sorted_intersection_count(q, d);
        match self {
            RelevanceKind::SharedLabels => shared,
            RelevanceKind::Binary => shared.min(1),
        }
    }
}

fn sorted_intersection_count(xs: &[u32], ys: &[u32]) -> u32 {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < xs.len() && j < ys.len() {
        match xs[i].cmp(&ys[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Discounted cumulative gain over the first `p` levels (1-based ranks).
/// Fewer than `p` levels simply sum over what exists.
pub fn dcg_at_p(levels: &[u32], p: usize) -> f64 {
    levels
        .iter()
        .take(p)
        .enumerate()
        .map(|(i, &r)| (f64::exp2(r as f64) - 1.0) / ((i + 2) as f64).log2())
        .sum()
}

/// `dcg(levels) / dcg(ideal)`, with `ideal` the best achievable level
/// sequence for this query. Returns 0 for degenerate queries (ideal DCG 0).
pub fn ndcg_at_p(levels: &[u32], ideal: &[u32], p: usize) -> f64 {
    let z = dcg_at_p(ideal, p);
    if z == 0.0 {
        return 0.0;
    }
    dcg_at_p(levels, p) / z
}

/// Mean relevance level over the top `p` positions. Missing positions
/// contribute 0 but the divisor stays `p`.
pub fn acg_at_p(levels: &[u32], p: usize) -> f64 {
    let sum: u64 = levels.iter().take(p).map(|&r| r as u64).sum();
    sum as f64 / p as f64
}

/// Scores of a single evaluated query.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryEval {
    pub query_id: String,
    pub ndcg: f64,
    pub acg: f64,
    /// True when nothing in the database is relevant to this query.
    pub degenerate: bool,
}

/// Full evaluation run: per-query scores plus means over the
/// non-degenerate queries.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub p: usize,
    pub per_query: Vec<QueryEval>,
    pub mean_ndcg: f64,
    pub mean_acg: f64,
    pub degenerate_count: usize,
}

impl RunReport {
    /// One line per query `query_id<TAB>NDCG<TAB>ACG<TAB>degenerate_flag`,
    /// then a `MEAN` footer carrying the degenerate count in the last
    /// column. Values use 6 decimal places.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for q in &self.per_query {
            out.push_str(&format!(
                "{}\t{:.6}\t{:.6}\t{}\n",
                q.query_id,
                q.ndcg,
                q.acg,
                u8::from(q.degenerate)
            ));
        }
        out.push_str(&format!(
            "MEAN\t{:.6}\t{:.6}\t{}\n",
            self.mean_ndcg, self.mean_acg, self.degenerate_count
        ));
        out
    }
}

/// Runs every query id against the index and scores the rankings.
///
/// Every database image must be labeled: besides the ranked prefix, the
/// normalizer needs the relevance of the whole database to each query. The
/// ideal ordering excludes the query itself, mirroring its exclusion from
/// the ranked list. Queries are distributed over `workers` threads; results
/// and means are assembled in input order, so the report is byte-identical
/// for any worker count.
pub fn evaluate_run(
    index: &FeatureIndex,
    query_ids: &[String],
    labels: &HashMap<String, LabelSet>,
    p: usize,
    relevance: RelevanceKind,
    workers: usize,
) -> Result<RunReport, MetricsError> {
    // Intern label strings so per-pair relevance is a small integer merge.
    let mut label_codes: HashMap<&str, u32> = HashMap::new();
    let mut interned: Vec<Vec<u32>> = Vec::with_capacity(index.len());
    for feature in index.features() {
        let set = labels
            .get(feature.image_id())
            .ok_or_else(|| MetricsError::MissingLabels(feature.image_id().to_owned()))?;
        let mut codes: Vec<u32> = set
            .labels
            .iter()
            .map(|label| {
                let next = label_codes.len() as u32;
                *label_codes.entry(label.as_str()).or_insert(next)
            })
            .collect();
        codes.sort_unstable();
        interned.push(codes);
    }

    let positions: Vec<usize> = query_ids
        .iter()
        .map(|id| {
            index
                .position(id)
                .ok_or_else(|| MetricsError::UnknownQueryId(id.clone()))
        })
        .collect::<Result<_, _>>()?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .expect("failed to build evaluation thread pool");
    let per_query: Vec<QueryEval> = pool.install(|| {
        use rayon::prelude::*;
        positions
            .par_iter()
            .map(|&qpos| evaluate_query(index, &interned, qpos, p, relevance))
            .collect()
    });

    let mut mean_ndcg = 0.0;
    let mut mean_acg = 0.0;
    let mut degenerate_count = 0;
    for q in &per_query {
        if q.degenerate {
            degenerate_count += 1;
        } else {
            mean_ndcg += q.ndcg;
            mean_acg += q.acg;
        }
    }
    let live = per_query.len() - degenerate_count;
    if live > 0 {
        mean_ndcg /= live as f64;
        mean_acg /= live as f64;
    }
    Ok(RunReport {
        p,
        per_query,
        mean_ndcg,
        mean_acg,
        degenerate_count,
    })
}

fn evaluate_query(
    index: &FeatureIndex,
    interned: &[Vec<u32>],
    qpos: usize,
    p: usize,
    relevance: RelevanceKind,
) -> QueryEval {
    let query = &index.features()[qpos];
    let qlabels = &interned[qpos];

    // Relevance of every database image to this query, in index order.
    let db_levels: Vec<u32> = interned
        .iter()
        .map(|d| relevance.level_interned(qlabels, d))
        .collect();

    let ranked = index.query_positions(query, p);
    let levels: Vec<u32> = ranked.iter().map(|&(pos, _)| db_levels[pos]).collect();
    let ideal = ideal_levels(&db_levels, qpos, p);

    let z = dcg_at_p(&ideal, p);
    let degenerate = z == 0.0;
    let ndcg = if degenerate { 0.0 } else { dcg_at_p(&levels, p) / z };
    QueryEval {
        query_id: query.image_id().to_owned(),
        ndcg,
        acg: acg_at_p(&levels, p),
        degenerate,
    }
}

/// Best achievable level sequence: all database relevances (except the
/// query's own) sorted descending, truncated at `p`. Selected by counting
/// since levels are small integers.
fn ideal_levels(db_levels: &[u32], qpos: usize, p: usize) -> Vec<u32> {
    let max_level = db_levels
        .iter()
        .enumerate()
        .filter(|&(pos, _)| pos != qpos)
        .map(|(_, &r)| r)
        .max()
        .unwrap_or(0);
    let mut hist = vec![0usize; max_level as usize + 1];
    for (pos, &r) in db_levels.iter().enumerate() {
        if pos != qpos {
            hist[r as usize] += 1;
        }
    }
    let mut ideal = Vec::with_capacity(p.min(db_levels.len()));
    for level in (0..=max_level).rev() {
        for _ in 0..hist[level as usize] {
            if ideal.len() == p {
                return ideal;
            }
            ideal.push(level);
        }
    }
    ideal
}
