//! Exact listeners and speaker over the whole enumerated program space.
//!
//! The literal listener is uniform over programs consistent with the
//! revealed cells. The pragmatic speaker picks each next utterance in
//! proportion to the literal listener's belief in the target after hearing
//! it, and the pragmatic listener normalizes the resulting sequence
//! probabilities over programs.
//!
//! Since `P_L0(h | D) = 1 / |C(D)|` for every `h ∈ C(D)`, the speaker term for
//! utterance `u` after prefix `D` only depends on `|C(D) ∩ B(u)|`, where
//! `B(u)` is the set of programs `u` is true of. Each step therefore needs
//! one intersection count per utterance, shared by all programs.

use fixedbitset::FixedBitSet;

use crate::distribution::JointDistribution;
use crate::error::{Error, Result};
use crate::space::{ProgramSpace, UttId};

/// `P_L0(h | D)`.
pub fn literal(space: &ProgramSpace, spec: &[UttId]) -> Result<JointDistribution> {
    let set = space.consistent_set(spec);
    uniform_over(space, &set)
}

fn uniform_over(space: &ProgramSpace, set: &FixedBitSet) -> Result<JointDistribution> {
    let mut weights = vec![0.0; space.len()];
    for h in set.ones() {
        weights[h] = 1.0;
    }
    JointDistribution::from_weights(weights)
}

/// Literal listener after each prefix of `spec`; entry `n - 1` is the
/// posterior given the first `n` utterances.
pub fn literal_by_prefix(space: &ProgramSpace, spec: &[UttId]) -> Vec<Result<JointDistribution>> {
    let mut set = space.consistent_set(&[]);
    spec.iter()
        .map(|&u| {
            set.intersect_with(space.support(u));
            uniform_over(space, &set)
        })
        .collect()
}

/// `1 / |C ∩ B(u)|` for every utterance, or 0 where the intersection is empty.
fn inverse_counts(space: &ProgramSpace, consistent: &FixedBitSet) -> Vec<f64> {
    (0..space.num_utterances())
        .map(|u| {
            let n = consistent.intersection_count(space.support(u as UttId));
            if n == 0 {
                0.0
            } else {
                1.0 / n as f64
            }
        })
        .collect()
}

/// `Σ_{u' ∈ candidates} P_L0(h | prefix, u')`; only utterances true of `h`
/// contribute.
fn speaker_normalizer(space: &ProgramSpace, h: usize, inv: &[f64], mask: &[bool]) -> f64 {
    space
        .truths(h)
        .iter()
        .filter(|&&u| mask[u as usize])
        .map(|&u| inv[u as usize])
        .sum()
}

/// `P_S1(u | h, prefix)` for every utterance id.
pub fn speaker_utterance(space: &ProgramSpace, h: usize, prefix: &[UttId]) -> Result<Vec<f64>> {
    let consistent = space.consistent_set(prefix);
    let mask = space.candidate_mask(prefix);
    let mut probs = vec![0.0; space.num_utterances()];
    if consistent.contains(h) {
        for &u in space.truths(h) {
            if mask[u as usize] {
                let n = consistent.intersection_count(space.support(u));
                probs[u as usize] = 1.0 / n as f64;
            }
        }
    }
    let total: f64 = probs.iter().sum();
    if total <= 0.0 {
        return Err(Error::EmptyCandidateSet);
    }
    probs.iter_mut().for_each(|p| *p /= total);
    Ok(probs)
}

/// `log P_S1(D | h)`, accumulated left to right; `-inf` if any utterance is
/// false of `h`.
pub fn speaker_spec_ln(space: &ProgramSpace, h: usize, spec: &[UttId]) -> f64 {
    let mut consistent = space.consistent_set(&[]);
    let mut log_p = 0.0;
    for (t, &u) in spec.iter().enumerate() {
        if !space.is_true(h, u) {
            return f64::NEG_INFINITY;
        }
        let mask = space.candidate_mask(&spec[..t]);
        let inv = inverse_counts(space, &consistent);
        log_p += inv[u as usize].ln() - speaker_normalizer(space, h, &inv, &mask).ln();
        consistent.intersect_with(space.support(u));
    }
    log_p
}

/// `P_S1(D | h)`.
pub fn speaker_spec(space: &ProgramSpace, h: usize, spec: &[UttId]) -> f64 {
    speaker_spec_ln(space, h, spec).exp()
}

/// `P_L1(h | D)`.
pub fn pragmatic(space: &ProgramSpace, spec: &[UttId]) -> Result<JointDistribution> {
    if spec.is_empty() {
        return literal(space, spec);
    }
    pragmatic_by_prefix(space, spec).pop().expect("non-empty spec")
}

/// Pragmatic listener after each prefix of `spec`, sharing the per-step
/// speaker terms across prefixes.
pub fn pragmatic_by_prefix(space: &ProgramSpace, spec: &[UttId]) -> Vec<Result<JointDistribution>> {
    let mut log_speaker = vec![0.0; space.len()];
    let mut consistent = space.consistent_set(&[]);
    let mut out = Vec::with_capacity(spec.len());
    for (t, &u) in spec.iter().enumerate() {
        let mask = space.candidate_mask(&spec[..t]);
        let inv = inverse_counts(space, &consistent);
        let numerator = inv[u as usize].ln();
        consistent.intersect_with(space.support(u));
        let mut log_weights = vec![f64::NEG_INFINITY; space.len()];
        for h in consistent.ones() {
            log_speaker[h] += numerator - speaker_normalizer(space, h, &inv, &mask).ln();
            log_weights[h] = log_speaker[h];
        }
        out.push(JointDistribution::from_log_weights(&log_weights));
    }
    out
}
