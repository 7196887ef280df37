//! Mean-field factored listeners and speakers.
//!
//! The program posterior is approximated by a product of independent
//! per-nonterminal rule distributions. The literal factor for nonterminal
//! `i` is the exact marginal of the joint literal listener: the fraction of
//! consistent programs that expand `i` with a given rule. The pragmatic
//! recursion then runs separately for every `(nonterminal, rule)` pair: a
//! speaker who wants to convey rule `j` for nonterminal `i` prefers
//! utterances that raise the literal factor's belief in `j`.
//!
//! The recursion is written against [`LiteralModel`], so the same code serves
//! the enumerated literal listener ([`Enumerated`]) and a learned one.

use fixedbitset::FixedBitSet;

use crate::distribution::FactoredDistribution;
use crate::error::{Error, Result};
use crate::space::{ProgramSpace, UttId};

/// Counts of consistent programs per flat rule slot.
fn slot_counts(space: &ProgramSpace, consistent: &FixedBitSet) -> (Vec<u64>, u64) {
    let offsets = space.offsets();
    let mut counts = vec![0u64; space.num_slots()];
    let mut total = 0;
    for h in consistent.ones() {
        total += 1;
        for (i, &c) in space.choices(h).iter().enumerate() {
            counts[offsets[i] + c as usize] += 1;
        }
    }
    (counts, total)
}

fn split(space: &ProgramSpace, slots: Vec<f64>) -> Vec<Vec<f64>> {
    let o = space.offsets();
    (0..space.num_factors())
        .map(|i| slots[o[i]..o[i + 1]].to_vec())
        .collect()
}

/// `lⁱ(R, D)`: per nonterminal, the fraction of consistent programs using
/// each rule.
pub fn lexicon(space: &ProgramSpace, spec: &[UttId]) -> Result<Vec<Vec<f64>>> {
    let (counts, total) = slot_counts(space, &space.consistent_set(spec));
    if total == 0 {
        return Err(Error::NoConsistentProgram);
    }
    Ok(split(space, counts.iter().map(|&c| c as f64 / total as f64).collect()))
}

/// `Qⁱ_L0(· | D)`.
pub fn literal(space: &ProgramSpace, spec: &[UttId]) -> Result<FactoredDistribution> {
    FactoredDistribution::normalized(lexicon(space, spec)?)
}

/// Supplies literal factor tables to the pragmatic recursion.
pub trait LiteralModel {
    fn space(&self) -> &ProgramSpace;

    /// For each candidate `u`, the flat slot vector of `Q_L0(· | prefix, u)`,
    /// or `None` when the literal listener is undefined there.
    fn candidate_literals(&self, prefix: &[UttId], candidates: &[UttId]) -> Vec<Option<Vec<f64>>>;
}

/// The literal listener obtained by enumerating the program space.
#[derive(Clone, Copy)]
pub struct Enumerated<'a>(pub &'a ProgramSpace);

impl LiteralModel for Enumerated<'_> {
    fn space(&self) -> &ProgramSpace {
        self.0
    }

    fn candidate_literals(&self, prefix: &[UttId], candidates: &[UttId]) -> Vec<Option<Vec<f64>>> {
        let space = self.0;
        let slots = space.num_slots();
        let offsets = space.offsets();
        let mut position = vec![usize::MAX; space.num_utterances()];
        for (p, &u) in candidates.iter().enumerate() {
            position[u as usize] = p;
        }
        let mut counts = vec![0u32; candidates.len() * slots];
        let mut totals = vec![0u32; candidates.len()];
        let consistent = space.consistent_set(prefix);
        for h in consistent.ones() {
            let choices = space.choices(h);
            for &u in space.truths(h) {
                let p = position[u as usize];
                if p == usize::MAX {
                    continue;
                }
                totals[p] += 1;
                let row = &mut counts[p * slots..(p + 1) * slots];
                for (i, &c) in choices.iter().enumerate() {
                    row[offsets[i] + c as usize] += 1;
                }
            }
        }
        totals
            .iter()
            .enumerate()
            .map(|(p, &t)| {
                (t > 0).then(|| {
                    counts[p * slots..(p + 1) * slots]
                        .iter()
                        .map(|&c| c as f64 / t as f64)
                        .collect()
                })
            })
            .collect()
    }
}

fn candidates(space: &ProgramSpace, prefix: &[UttId]) -> Vec<UttId> {
    space
        .candidate_mask(prefix)
        .iter()
        .enumerate()
        .filter(|(_, &keep)| keep)
        .map(|(u, _)| u as UttId)
        .collect()
}

/// Per-slot speaker normalizers `Σ_u' Qⁱ_L0(j | prefix, u')` together with
/// the literal tables they were summed from.
struct SpeakerStep {
    candidates: Vec<UttId>,
    literals: Vec<Option<Vec<f64>>>,
    normalizer: Vec<f64>,
}

impl SpeakerStep {
    fn new<M: LiteralModel + ?Sized>(model: &M, prefix: &[UttId]) -> Self {
        let space = model.space();
        let candidates = candidates(space, prefix);
        let literals = model.candidate_literals(prefix, &candidates);
        let mut normalizer = vec![0.0; space.num_slots()];
        for lit in literals.iter().flatten() {
            for (n, &q) in normalizer.iter_mut().zip(lit) {
                *n += q;
            }
        }
        SpeakerStep {
            candidates,
            literals,
            normalizer,
        }
    }

    fn literal_of(&self, u: UttId) -> Option<&[f64]> {
        let p = self.candidates.binary_search(&u).ok()?;
        self.literals[p].as_deref()
    }

    /// `log Qⁱ_S1(u | j, prefix)` for every slot.
    fn log_terms<M: LiteralModel + ?Sized>(&self, model: &M, prefix: &[UttId], u: UttId) -> Result<Vec<f64>> {
        let owned;
        let numerator = match self.literal_of(u) {
            Some(l) => l,
            None => {
                owned = model
                    .candidate_literals(prefix, &[u])
                    .pop()
                    .flatten()
                    .ok_or(Error::NoConsistentProgram)?;
                &owned[..]
            }
        };
        Ok(numerator
            .iter()
            .zip(&self.normalizer)
            .map(|(&q, &n)| {
                if q > 0.0 && n > 0.0 {
                    q.ln() - n.ln()
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect())
    }
}

/// `Qⁱ_S1(u | j, prefix)` for every utterance id, for rule `rule` of
/// nonterminal `factor`.
pub fn speaker_utterance(space: &ProgramSpace, factor: usize, rule: usize, prefix: &[UttId]) -> Result<Vec<f64>> {
    let step = SpeakerStep::new(&Enumerated(space), prefix);
    let slot = space.slot(factor, rule);
    let mut probs = vec![0.0; space.num_utterances()];
    if step.normalizer[slot] <= 0.0 {
        return Err(Error::EmptyCandidateSet);
    }
    for (&u, lit) in step.candidates.iter().zip(&step.literals) {
        if let Some(lit) = lit {
            probs[u as usize] = lit[slot] / step.normalizer[slot];
        }
    }
    Ok(probs)
}

fn normalize_factors(space: &ProgramSpace, log_scores: &[f64]) -> Result<FactoredDistribution> {
    let o = space.offsets();
    let mut factors = Vec::with_capacity(space.num_factors());
    for i in 0..space.num_factors() {
        let logs = &log_scores[o[i]..o[i + 1]];
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Err(Error::NoConsistentProgram);
        }
        factors.push(logs.iter().map(|&l| (l - max).exp()).collect());
    }
    FactoredDistribution::normalized(factors)
}

/// `Qⁱ_L1(· | D)` for every nonterminal, with literal tables from `model`.
pub fn pragmatic_with<M: LiteralModel + ?Sized>(model: &M, spec: &[UttId]) -> Result<FactoredDistribution> {
    if spec.is_empty() {
        let space = model.space();
        return normalize_factors(space, &vec![0.0; space.num_slots()]);
    }
    pragmatic_by_prefix_with(model, spec).pop().expect("non-empty spec")
}

/// Pragmatic factors after each prefix of `spec`; entry `n - 1` covers the
/// first `n` utterances. Once a factor loses all support every later prefix
/// is an error too.
pub fn pragmatic_by_prefix_with<M: LiteralModel + ?Sized>(
    model: &M,
    spec: &[UttId],
) -> Vec<Result<FactoredDistribution>> {
    let space = model.space();
    let mut log_scores = vec![0.0; space.num_slots()];
    let mut failed = false;
    let mut out = Vec::with_capacity(spec.len());
    for (t, &u) in spec.iter().enumerate() {
        if failed {
            out.push(Err(Error::NoConsistentProgram));
            continue;
        }
        let prefix = &spec[..t];
        let step = SpeakerStep::new(model, prefix);
        match step.log_terms(model, prefix, u) {
            Ok(terms) => {
                for (s, term) in log_scores.iter_mut().zip(terms) {
                    *s += term;
                }
                let q = normalize_factors(space, &log_scores);
                failed = q.is_err();
                out.push(q);
            }
            Err(e) => {
                failed = true;
                out.push(Err(e));
            }
        }
    }
    out
}

/// `Qⁱ_L1(· | D)` with the enumerated literal listener.
pub fn pragmatic(space: &ProgramSpace, spec: &[UttId]) -> Result<FactoredDistribution> {
    pragmatic_with(&Enumerated(space), spec)
}

pub fn pragmatic_by_prefix(space: &ProgramSpace, spec: &[UttId]) -> Vec<Result<FactoredDistribution>> {
    pragmatic_by_prefix_with(&Enumerated(space), spec)
}

/// `Q(h | D) = ∏ᵢ Qⁱ(Rᵢ | D)`.
pub fn program_probability(q: &FactoredDistribution, choices: &[u8]) -> f64 {
    q.program_probability(choices)
}

/// `KL(P ‖ Q¹ ⊗ Q²)` for a two-factor joint table `P`.
pub fn forward_kl(joint: &[Vec<f64>], first: &[f64], second: &[f64]) -> f64 {
    let mut kl = 0.0;
    for (row, &a) in joint.iter().zip(first) {
        for (&p, &b) in row.iter().zip(second) {
            if p > 0.0 {
                let q = a * b;
                if q <= 0.0 {
                    return f64::INFINITY;
                }
                kl += p * (p / q).ln();
            }
        }
    }
    kl
}
