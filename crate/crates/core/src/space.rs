//! Enumerated program space with a precomputed lexicon index.
//!
//! The space is generic: any finite list of fixed-length choice sequences
//! together with the set of utterances each program makes true. The DSL's
//! space is built once by [`ProgramSpace::dsl`]; small hand-built spaces
//! (see [`crate::reduced`]) use [`ProgramSpace::new`].

use std::collections::HashMap;
use std::sync::OnceLock;

use fixedbitset::FixedBitSet;

use crate::dsl::{self, Nonterminal, Program, NUM_UTTERANCES};

/// Dense utterance id in `0..space.num_utterances()`.
pub type UttId = u16;

/// Which alternatives a speaker weighs an utterance against.
///
/// `Unseen` excludes utterances already in the prefix; `All` keeps them
/// (a repeated utterance then scores as an uninformative reveal).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Alternatives {
    #[default]
    Unseen,
    All,
}

/// The alternative set used unless a space is reconfigured.
pub const DEFAULT_ALTERNATIVES: Alternatives = Alternatives::Unseen;

#[derive(Clone, Debug)]
pub struct ProgramSpace {
    factor_names: Vec<String>,
    arities: Vec<usize>,
    offsets: Vec<usize>,
    choices: Vec<u8>,
    num_utterances: usize,
    truths: Vec<Vec<UttId>>,
    support: Vec<FixedBitSet>,
    class_of: Vec<u32>,
    index: HashMap<Vec<u8>, usize>,
    alternatives: Alternatives,
}

impl ProgramSpace {
    /// Builds a space from programs and, for each, the utterances true of it.
    ///
    /// Panics if a choice is out of range, a program repeats, or an utterance
    /// id is out of range.
    pub fn new(
        factor_names: Vec<String>,
        arities: Vec<usize>,
        programs: Vec<Vec<u8>>,
        num_utterances: usize,
        truths: Vec<Vec<UttId>>,
    ) -> Self {
        assert_eq!(factor_names.len(), arities.len());
        assert_eq!(programs.len(), truths.len());
        let k = arities.len();
        let mut offsets = Vec::with_capacity(k + 1);
        let mut acc = 0;
        for &a in &arities {
            assert!(a >= 1);
            offsets.push(acc);
            acc += a;
        }
        offsets.push(acc);

        let mut choices = Vec::with_capacity(programs.len() * k);
        let mut index = HashMap::with_capacity(programs.len());
        for (h, p) in programs.iter().enumerate() {
            assert_eq!(p.len(), k, "program {h} has wrong length");
            for (i, &c) in p.iter().enumerate() {
                assert!((c as usize) < arities[i], "program {h} choice {i} out of range");
            }
            assert!(index.insert(p.clone(), h).is_none(), "duplicate program {p:?}");
            choices.extend_from_slice(p);
        }

        let mut support = vec![FixedBitSet::with_capacity(programs.len()); num_utterances];
        let mut truths = truths;
        for (h, ts) in truths.iter_mut().enumerate() {
            ts.sort_unstable();
            ts.dedup();
            for &u in ts.iter() {
                assert!((u as usize) < num_utterances, "utterance id {u} out of range");
                support[u as usize].insert(h);
            }
        }

        let mut classes: HashMap<&[UttId], u32> = HashMap::new();
        let class_of = truths
            .iter()
            .map(|ts| {
                let next = classes.len() as u32;
                *classes.entry(ts.as_slice()).or_insert(next)
            })
            .collect();

        ProgramSpace {
            factor_names,
            arities,
            offsets,
            choices,
            num_utterances,
            truths,
            support,
            class_of,
            index,
            alternatives: DEFAULT_ALTERNATIVES,
        }
    }

    /// The full DSL space, built on first use and shared.
    pub fn dsl() -> &'static ProgramSpace {
        static SPACE: OnceLock<ProgramSpace> = OnceLock::new();
        SPACE.get_or_init(Self::build_dsl)
    }

    pub fn build_dsl() -> ProgramSpace {
        let programs = dsl::enumerate_programs();
        let truths = programs
            .iter()
            .map(|p| p.utterances().iter().map(|u| u.id()).collect())
            .collect();
        ProgramSpace::new(
            Nonterminal::ALL.iter().map(|nt| nt.name().to_string()).collect(),
            dsl::ARITIES.to_vec(),
            programs.iter().map(|p| p.choices().to_vec()).collect(),
            NUM_UTTERANCES,
            truths,
        )
    }

    pub fn with_alternatives(mut self, alternatives: Alternatives) -> Self {
        self.alternatives = alternatives;
        self
    }

    pub fn alternatives(&self) -> Alternatives {
        self.alternatives
    }

    pub fn len(&self) -> usize {
        self.truths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.truths.is_empty()
    }

    pub fn num_factors(&self) -> usize {
        self.arities.len()
    }

    pub fn arities(&self) -> &[usize] {
        &self.arities
    }

    pub fn factor_names(&self) -> &[String] {
        &self.factor_names
    }

    /// Start of factor `i` in the flat slot layout; `offsets()[k]` is the
    /// total slot count.
    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn num_slots(&self) -> usize {
        self.offsets[self.arities.len()]
    }

    pub fn num_utterances(&self) -> usize {
        self.num_utterances
    }

    pub fn choices(&self, h: usize) -> &[u8] {
        let k = self.arities.len();
        &self.choices[h * k..(h + 1) * k]
    }

    pub fn index_of(&self, choices: &[u8]) -> Option<usize> {
        self.index.get(choices).copied()
    }

    pub fn program_index(&self, p: &Program) -> Option<usize> {
        self.index_of(p.choices())
    }

    /// Utterances true of program `h`, ascending.
    pub fn truths(&self, h: usize) -> &[UttId] {
        &self.truths[h]
    }

    /// Programs of which utterance `u` is true.
    pub fn support(&self, u: UttId) -> &FixedBitSet {
        &self.support[u as usize]
    }

    pub fn is_true(&self, h: usize, u: UttId) -> bool {
        self.support[u as usize].contains(h)
    }

    pub fn is_consistent(&self, h: usize, spec: &[UttId]) -> bool {
        spec.iter().all(|&u| self.is_true(h, u))
    }

    /// Programs consistent with every utterance of `spec`.
    pub fn consistent_set(&self, spec: &[UttId]) -> FixedBitSet {
        let mut set = FixedBitSet::with_capacity(self.len());
        set.insert_range(..);
        for &u in spec {
            set.intersect_with(&self.support[u as usize]);
        }
        set
    }

    /// Observational equivalence class: two programs share a class iff they
    /// make exactly the same utterances true.
    pub fn class_of(&self, h: usize) -> u32 {
        self.class_of[h]
    }

    pub fn equivalent(&self, a: usize, b: usize) -> bool {
        self.class_of[a] == self.class_of[b]
    }

    pub fn num_classes(&self) -> usize {
        self.class_of.iter().map(|&c| c as usize + 1).max().unwrap_or(0)
    }

    /// Candidate alternatives after `prefix`, as a mask over utterance ids.
    pub fn candidate_mask(&self, prefix: &[UttId]) -> Vec<bool> {
        let mut mask = vec![true; self.num_utterances];
        if self.alternatives == Alternatives::Unseen {
            for &u in prefix {
                mask[u as usize] = false;
            }
        }
        mask
    }

    /// Flat slot of rule `choice` of factor `i`.
    pub fn slot(&self, i: usize, choice: usize) -> usize {
        self.offsets[i] + choice
    }
}
