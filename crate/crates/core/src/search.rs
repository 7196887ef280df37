//! Best-first enumeration of programs in decreasing factored probability.
//!
//! Each factor's rules are sorted by decreasing probability (ties by rule
//! index). A search state is a vector of ranks into those sorted lists; its
//! successors advance one rank by one. Starting from the all-best state and
//! always expanding the highest-scoring state yields every program in
//! non-increasing `Σ log Qⁱ` order, ties broken by the lexicographically
//! smaller choice sequence.
//!
//! States whose choice sequence is not a program of the space (the DSL's
//! validity predicate fails) are expanded like any other state but never
//! emitted, so they neither count against the budget nor cut off the
//! programs behind them.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use serde::{Deserialize, Serialize};

use crate::distribution::FactoredDistribution;
use crate::space::{ProgramSpace, UttId};

pub const DEFAULT_BUDGET: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub budget: usize,
}

impl SearchConfig {
    pub fn new(budget: usize) -> Self {
        assert!(budget >= 1, "search budget must be positive");
        SearchConfig { budget }
    }
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig { budget: DEFAULT_BUDGET }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SearchResult {
    /// `rank` is the 1-based position among emitted programs.
    Found {
        program: usize,
        rank: usize,
    },
    Exhausted {
        explored: usize,
    },
}

impl SearchResult {
    pub fn found(&self) -> Option<usize> {
        match *self {
            SearchResult::Found { program, .. } => Some(program),
            SearchResult::Exhausted { .. } => None,
        }
    }
}

struct State {
    score: f64,
    choices: Vec<u8>,
    ranks: Vec<u8>,
}

impl PartialEq for State {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for State {}

impl PartialOrd for State {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for State {
    // max-heap: higher score first, then smaller choices first
    fn cmp(&self, other: &Self) -> Ordering {
        self.score
            .total_cmp(&other.score)
            .then_with(|| other.choices.cmp(&self.choices))
    }
}

/// Lazily yields program indices in the order the search dequeues them.
pub struct RankedStream<'a> {
    space: &'a ProgramSpace,
    q: &'a FactoredDistribution,
    /// Per factor, rule indices with positive probability, best first.
    order: Vec<Vec<u8>>,
    heap: BinaryHeap<State>,
    seen: HashSet<Vec<u8>>,
}

impl<'a> RankedStream<'a> {
    pub fn new(space: &'a ProgramSpace, q: &'a FactoredDistribution) -> Self {
        assert_eq!(q.num_factors(), space.num_factors());
        let order: Vec<Vec<u8>> = q
            .factors()
            .iter()
            .map(|f| {
                let mut rules: Vec<u8> = (0..f.len() as u8).filter(|&j| f[j as usize] > 0.0).collect();
                rules.sort_by(|&a, &b| f[b as usize].total_cmp(&f[a as usize]).then(a.cmp(&b)));
                rules
            })
            .collect();
        let mut stream = RankedStream {
            space,
            q,
            order,
            heap: BinaryHeap::new(),
            seen: HashSet::new(),
        };
        if stream.order.iter().all(|rules| !rules.is_empty()) {
            stream.push(vec![0; space.num_factors()]);
        }
        stream
    }

    fn push(&mut self, ranks: Vec<u8>) {
        if !self.seen.insert(ranks.clone()) {
            return;
        }
        let choices: Vec<u8> = ranks
            .iter()
            .zip(&self.order)
            .map(|(&r, rules)| rules[r as usize])
            .collect();
        let score = self.q.log_probability(&choices);
        self.heap.push(State { score, choices, ranks });
    }
}

impl Iterator for RankedStream<'_> {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        while let Some(state) = self.heap.pop() {
            for i in 0..state.ranks.len() {
                let next = state.ranks[i] as usize + 1;
                if next < self.order[i].len() {
                    let mut ranks = state.ranks.clone();
                    ranks[i] = next as u8;
                    self.push(ranks);
                }
            }
            if let Some(h) = self.space.index_of(&state.choices) {
                return Some(h);
            }
        }
        None
    }
}

/// The first `limit` programs in dequeue order.
pub fn ranked_stream(space: &ProgramSpace, q: &FactoredDistribution, limit: usize) -> Vec<usize> {
    RankedStream::new(space, q).take(limit).collect()
}

/// Returns the first dequeued program consistent with `spec`, examining at
/// most `cfg.budget` programs.
pub fn best_first_search(
    space: &ProgramSpace,
    spec: &[UttId],
    q: &FactoredDistribution,
    cfg: SearchConfig,
) -> SearchResult {
    let mut explored = 0;
    for h in RankedStream::new(space, q).take(cfg.budget) {
        explored += 1;
        if space.is_consistent(h, spec) {
            return SearchResult::Found {
                program: h,
                rank: explored,
            };
        }
    }
    SearchResult::Exhausted { explored }
}
