//! Run configuration shared by every command.

use semdist_core::{DistanceParams, RelevanceKind};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub n_classes: usize,
    pub k: usize,
    /// m1/m2 weight ratio; m2 is fixed at 1.
    pub m_ratio: f64,
    pub min_shared: usize,
    pub p: usize,
    pub workers: usize,
    pub seed: u64,
    pub strict_prob: bool,
    pub relevance: RelevanceKind,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n_classes: 1000,
            k: 60,
            m_ratio: 10_000.0,
            min_shared: 10,
            p: 100,
            workers: default_workers(),
            seed: 42,
            strict_prob: false,
            relevance: RelevanceKind::SharedLabels,
        }
    }
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        let fail = |msg: &str| Err(CliError::Invalid(msg.into()));
        if self.n_classes == 0 {
            return fail("--n-classes must be positive");
        }
        if self.k == 0 || self.k > self.n_classes {
            return fail("--k must lie in 1..=n-classes");
        }
        if self.m_ratio.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return fail("--m-ratio must be positive");
        }
        if self.p == 0 {
            return fail("--p must be positive");
        }
        if self.workers == 0 {
            return fail("--workers must be positive");
        }
        Ok(())
    }

    pub fn distance_params(&self) -> DistanceParams {
        DistanceParams {
            m1: self.m_ratio,
            m2: 1.0,
            min_shared: self.min_shared,
            k: self.k,
        }
    }
}
