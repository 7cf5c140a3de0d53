//! Counters for observed attention work.
//!
//! The attention core bumps these when a [`crate::graph::Cx`] carries them, so
//! the benchmark harness can compare measured query-key pair counts against
//! the closed-form cost model without touching any forward signature.

use std::sync::atomic::{AtomicU64, Ordering};

#[derive(Default)]
pub struct CostCounters {
    /// Query-key pairs evaluated, counted once per (group, i, j) triple
    /// (heads excluded, matching the closed-form accounting).
    pairs: AtomicU64,
    /// Attention-score entries materialized; equals `pairs` for every mode
    /// implemented here since each pair's score is stored exactly once.
    score_entries: AtomicU64,
}

impl CostCounters {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record_attention(&self, groups: usize, tokens: usize) {
        let n = (groups * tokens * tokens) as u64;
        self.pairs.fetch_add(n, Ordering::Relaxed);
        self.score_entries.fetch_add(n, Ordering::Relaxed);
    }

    pub fn pairs(&self) -> u64 {
        self.pairs.load(Ordering::Relaxed)
    }

    pub fn score_entries(&self) -> u64 {
        self.score_entries.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.pairs.store(0, Ordering::Relaxed);
        self.score_entries.store(0, Ordering::Relaxed);
    }
}
