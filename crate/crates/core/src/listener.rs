//! The six listeners behind one interface.
//!
//! `J` listeners enumerate the joint posterior over every program, `F`
//! listeners keep one distribution per nonterminal and recover programs with
//! best-first search, and `N` listeners replace the factored literal
//! listener with a trained network. Suffix `0` is literal, `1` pragmatic.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::distribution::{FactoredDistribution, JointDistribution};
use crate::error::{Error, Result};
use crate::neural::{self, ListenerNet};
use crate::search::{RankedStream, SearchConfig};
use crate::space::{ProgramSpace, UttId};
use crate::{factored, joint};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ListenerKind {
    J0,
    J1,
    F0,
    F1,
    N0,
    N1,
}

impl ListenerKind {
    pub const ALL: [ListenerKind; 6] = [
        ListenerKind::J0,
        ListenerKind::J1,
        ListenerKind::F0,
        ListenerKind::F1,
        ListenerKind::N0,
        ListenerKind::N1,
    ];

    pub fn is_pragmatic(self) -> bool {
        matches!(self, ListenerKind::J1 | ListenerKind::F1 | ListenerKind::N1)
    }

    pub fn is_neural(self) -> bool {
        matches!(self, ListenerKind::N0 | ListenerKind::N1)
    }

    pub fn is_joint(self) -> bool {
        matches!(self, ListenerKind::J0 | ListenerKind::J1)
    }

    pub fn name(self) -> &'static str {
        match self {
            ListenerKind::J0 => "J0",
            ListenerKind::J1 => "J1",
            ListenerKind::F0 => "F0",
            ListenerKind::F1 => "F1",
            ListenerKind::N0 => "N0",
            ListenerKind::N1 => "N1",
        }
    }
}

impl fmt::Display for ListenerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ListenerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ListenerKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownListener(s.to_string()))
    }
}

/// When a guess counts as the target.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchRule {
    /// Same rendered layout, i.e. the same set of true utterances.
    #[default]
    Equivalent,
    /// Same choice sequence.
    Exact,
}

impl MatchRule {
    pub fn matches(self, space: &ProgramSpace, guess: usize, target: usize) -> bool {
        match self {
            MatchRule::Equivalent => space.equivalent(guess, target),
            MatchRule::Exact => guess == target,
        }
    }
}

impl FromStr for MatchRule {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "equivalent" => Ok(MatchRule::Equivalent),
            "exact" => Ok(MatchRule::Exact),
            other => Err(format!("unknown match rule `{other}` (expected equivalent or exact)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Posterior {
    Joint(JointDistribution),
    Factored(FactoredDistribution),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Guess {
    pub program: usize,
    /// Posterior probability of the program.
    pub score: f64,
}

#[derive(Clone, Copy)]
pub struct Listener<'a> {
    kind: ListenerKind,
    space: &'a ProgramSpace,
    net: Option<&'a ListenerNet>,
    search: SearchConfig,
}

impl<'a> Listener<'a> {
    /// Fails with [`Error::ModelRequired`] for neural kinds without a network.
    pub fn new(kind: ListenerKind, space: &'a ProgramSpace, net: Option<&'a ListenerNet>) -> Result<Self> {
        if kind.is_neural() && net.is_none() {
            return Err(Error::ModelRequired(kind.to_string()));
        }
        Ok(Listener {
            kind,
            space,
            net,
            search: SearchConfig::default(),
        })
    }

    pub fn with_search(mut self, search: SearchConfig) -> Self {
        self.search = search;
        self
    }

    pub fn kind(&self) -> ListenerKind {
        self.kind
    }

    pub fn space(&self) -> &'a ProgramSpace {
        self.space
    }

    fn net(&self) -> &'a ListenerNet {
        self.net.expect("checked at construction")
    }

    pub fn posterior(&self, spec: &[UttId]) -> Result<Posterior> {
        let space = self.space;
        Ok(match self.kind {
            ListenerKind::J0 => Posterior::Joint(joint::literal(space, spec)?),
            ListenerKind::J1 => Posterior::Joint(joint::pragmatic(space, spec)?),
            ListenerKind::F0 => Posterior::Factored(factored::literal(space, spec)?),
            ListenerKind::F1 => Posterior::Factored(factored::pragmatic(space, spec)?),
            ListenerKind::N0 => Posterior::Factored(self.net().predict(spec)),
            ListenerKind::N1 => Posterior::Factored(neural::neural_pragmatic(self.net(), space, spec)?),
        })
    }

    /// Posteriors after each prefix; entry `n - 1` conditions on `spec[..n]`.
    pub fn posteriors_by_prefix(&self, spec: &[UttId]) -> Vec<Result<Posterior>> {
        let space = self.space;
        let joint = |v: Vec<Result<JointDistribution>>| v.into_iter().map(|r| r.map(Posterior::Joint)).collect();
        let fact = |v: Vec<Result<FactoredDistribution>>| v.into_iter().map(|r| r.map(Posterior::Factored)).collect();
        match self.kind {
            ListenerKind::J0 => joint(joint::literal_by_prefix(space, spec)),
            ListenerKind::J1 => joint(joint::pragmatic_by_prefix(space, spec)),
            ListenerKind::F1 => fact(factored::pragmatic_by_prefix(space, spec)),
            ListenerKind::N1 => fact(neural::neural_pragmatic_by_prefix(self.net(), space, spec)),
            ListenerKind::F0 | ListenerKind::N0 => (1..=spec.len()).map(|n| self.posterior(&spec[..n])).collect(),
        }
    }

    /// Up to `k` consistent programs, best first. Joint posteriors are
    /// ranked directly; factored ones go through best-first search, so only
    /// the first `budget` programs dequeued are considered.
    pub fn guesses_from(&self, posterior: &Posterior, spec: &[UttId], k: usize) -> Vec<Guess> {
        match posterior {
            Posterior::Joint(d) => d
                .top_k(k)
                .into_iter()
                .map(|(program, score)| Guess { program, score })
                .collect(),
            Posterior::Factored(q) => RankedStream::new(self.space, q)
                .take(self.search.budget)
                .filter(|&h| self.space.is_consistent(h, spec))
                .take(k)
                .map(|h| Guess {
                    program: h,
                    score: q.program_probability(self.space.choices(h)),
                })
                .collect(),
        }
    }

    pub fn guesses(&self, spec: &[UttId], k: usize) -> Result<Vec<Guess>> {
        Ok(self.guesses_from(&self.posterior(spec)?, spec, k))
    }

    /// The listener's single best guess, if any.
    pub fn identify(&self, spec: &[UttId]) -> Option<usize> {
        self.guesses(spec, 1).ok()?.first().map(|g| g.program)
    }
}
