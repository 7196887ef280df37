//! Machine speakers that turn a target program into a sequence of revealed cells.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::space::{ProgramSpace, UttId};

pub const DEFAULT_SPEC_LEN: usize = 15;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpeakerKind {
    /// Uniformly random true utterances.
    Literal,
    /// Greedy argmax of the joint pragmatic speaker.
    Pragmatic,
}

impl std::str::FromStr for SpeakerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "literal" => Ok(SpeakerKind::Literal),
            "pragmatic" => Ok(SpeakerKind::Pragmatic),
            other => Err(format!("unknown speaker `{other}` (expected literal or pragmatic)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpeakerConfig {
    pub kind: SpeakerKind,
    pub max_len: usize,
    pub seed: u64,
}

impl SpeakerConfig {
    pub fn new(kind: SpeakerKind) -> Self {
        SpeakerConfig {
            kind,
            max_len: DEFAULT_SPEC_LEN,
            seed: 0,
        }
    }
}

/// A uniformly random, duplicate-free sequence of utterances true of `h`.
pub fn speak_literal_with<R: Rng + ?Sized>(space: &ProgramSpace, h: usize, max_len: usize, rng: &mut R) -> Vec<UttId> {
    let mut pool = space.truths(h).to_vec();
    let n = max_len.min(pool.len());
    let (chosen, _) = pool.partial_shuffle(rng, n);
    chosen.to_vec()
}

pub fn speak_literal(space: &ProgramSpace, h: usize, cfg: &SpeakerConfig) -> Vec<UttId> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    speak_literal_with(space, h, cfg.max_len, &mut rng)
}

/// Greedy pragmatic speaker: each step reveals the unrevealed utterance that
/// leaves the fewest consistent programs, which is the argmax of the joint
/// speaker distribution. Ties go to the smallest utterance id.
pub fn speak_pragmatic(space: &ProgramSpace, h: usize, max_len: usize) -> Vec<UttId> {
    let truths = space.truths(h);
    let n = max_len.min(truths.len());
    let mut used = vec![false; truths.len()];
    let mut consistent = space.consistent_set(&[]);
    let mut spec = Vec::with_capacity(n);
    for _ in 0..n {
        let (k, u) = truths
            .iter()
            .enumerate()
            .filter(|(k, _)| !used[*k])
            .min_by_key(|(_, &u)| consistent.intersection_count(space.support(u)))
            .map(|(k, &u)| (k, u))
            .expect("fewer reveals than true utterances");
        used[k] = true;
        consistent.intersect_with(space.support(u));
        spec.push(u);
    }
    spec
}

pub fn speak(space: &ProgramSpace, h: usize, cfg: &SpeakerConfig) -> Vec<UttId> {
    match cfg.kind {
        SpeakerKind::Literal => speak_literal(space, h, cfg),
        SpeakerKind::Pragmatic => speak_pragmatic(space, h, cfg.max_len),
    }
}
