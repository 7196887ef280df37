//! Trials, accuracy curves and marginal reports.

use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::dsl::{Program, Spec, Utterance};
use crate::error::{Error, Result};
use crate::listener::{Listener, MatchRule};
use crate::search::SearchConfig;
use crate::space::{ProgramSpace, UttId};
use crate::speaker::{self, SpeakerKind};
use crate::{factored, joint};

pub const DEFAULT_MAX_LEN: usize = 15;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialSource {
    MachineLiteral,
    MachinePragmatic,
    HumanLiteral,
    HumanPragmatic,
}

impl TrialSource {
    pub fn name(self) -> &'static str {
        match self {
            TrialSource::MachineLiteral => "machine_literal",
            TrialSource::MachinePragmatic => "machine_pragmatic",
            TrialSource::HumanLiteral => "human_literal",
            TrialSource::HumanPragmatic => "human_pragmatic",
        }
    }
}

/// A target program and the reveals a speaker made for it, in order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trial {
    pub target: Program,
    pub utterances: Spec,
    pub source: TrialSource,
}

impl Trial {
    pub fn ids(&self) -> Vec<UttId> {
        self.utterances.ids()
    }
}

/// Reads JSON-lines trials. Blank lines are skipped, unknown fields are
/// ignored, a repeated cell keeps its first reveal, and every reveal must be
/// true of the target.
pub fn read_trials<R: BufRead>(reader: R) -> Result<Vec<Trial>> {
    #[derive(Deserialize)]
    struct Raw {
        target: Program,
        utterances: Vec<Utterance>,
        source: TrialSource,
    }
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let number = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: Raw = serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
            line: number,
            message: e.to_string(),
        })?;
        if let Some(u) = raw.utterances.iter().find(|u| !raw.target.satisfies(u)) {
            return Err(Error::InconsistentUtterance {
                line: number,
                utterance: u.to_string(),
            });
        }
        out.push(Trial {
            target: raw.target,
            utterances: Spec::dedup_first(raw.utterances),
            source: raw.source,
        });
    }
    Ok(out)
}

pub fn write_trials<W: Write>(mut writer: W, trials: &[Trial]) -> Result<()> {
    for t in trials {
        serde_json::to_writer(&mut writer, t)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

/// Trials from a machine speaker on uniformly drawn targets.
pub fn generate_trials(space: &ProgramSpace, kind: SpeakerKind, n: usize, max_len: usize, seed: u64) -> Vec<Trial> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let h = rng.gen_range(0..space.len());
            let ids = match kind {
                SpeakerKind::Literal => speaker::speak_literal_with(space, h, max_len, &mut rng),
                SpeakerKind::Pragmatic => speaker::speak_pragmatic(space, h, max_len),
            };
            Trial {
                target: Program::from_slice(space.choices(h)).expect("space holds valid programs"),
                utterances: Spec::from_ids(&ids).expect("speakers never repeat a cell"),
                source: match kind {
                    SpeakerKind::Literal => TrialSource::MachineLiteral,
                    SpeakerKind::Pragmatic => TrialSource::MachinePragmatic,
                },
            }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub max_len: usize,
    pub match_rule: MatchRule,
    pub search: SearchConfig,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            max_len: DEFAULT_MAX_LEN,
            match_rule: MatchRule::default(),
            search: SearchConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub listener: String,
    pub speaker: String,
    pub n: usize,
    pub accuracy: f64,
    pub n_trials: usize,
}

/// Smallest prefix length after which the listener's top guess matches the
/// target, or `None` if no prefix of at most `cfg.max_len` reveals does.
/// Success is sticky: later prefixes are not consulted once one succeeds.
pub fn run_trial(listener: &Listener<'_>, trial: &Trial, cfg: &EvalConfig) -> Option<usize> {
    let space = listener.space();
    let target = space
        .program_index(&trial.target)
        .expect("target is a program of the space");
    let ids = trial.ids();
    let ids = &ids[..ids.len().min(cfg.max_len)];
    let listener = listener.with_search(cfg.search);
    listener
        .posteriors_by_prefix(ids)
        .into_iter()
        .enumerate()
        .find(|(i, p)| {
            p.as_ref()
                .ok()
                .and_then(|p| listener.guesses_from(p, &ids[..=*i], 1).first().map(|g| g.program))
                .is_some_and(|g| cfg.match_rule.matches(space, g, target))
        })
        .map(|(i, _)| i + 1)
}

/// Cumulative accuracy at every `n`: the fraction of trials solved within
/// `n` reveals.
pub fn accuracy_curve(listener: &Listener<'_>, speaker: &str, trials: &[Trial], cfg: &EvalConfig) -> Vec<CurvePoint> {
    let solved: Vec<Option<usize>> = trials.par_iter().map(|t| run_trial(listener, t, cfg)).collect();
    (1..=cfg.max_len)
        .map(|n| {
            let hits = solved.iter().filter(|s| s.is_some_and(|k| k <= n)).count();
            CurvePoint {
                listener: listener.kind().to_string(),
                speaker: speaker.to_string(),
                n,
                accuracy: if trials.is_empty() {
                    0.0
                } else {
                    hits as f64 / trials.len() as f64
                },
                n_trials: trials.len(),
            }
        })
        .collect()
}

/// Curves for every listener against every named trial set.
pub fn run_matrix(
    listeners: &[Listener<'_>],
    trial_sets: &[(String, Vec<Trial>)],
    cfg: &EvalConfig,
) -> Vec<CurvePoint> {
    let mut out = Vec::new();
    for (speaker, trials) in trial_sets {
        for l in listeners {
            out.extend(accuracy_curve(l, speaker, trials, cfg));
        }
    }
    out
}

pub fn write_curve_csv<W: Write>(writer: W, points: &[CurvePoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for p in points {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}

fn total_variation(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    0.5 * a
        .iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).abs())
        .sum::<f64>()
}

/// Compares joint and factored posteriors for one utterance sequence.
///
/// Per nonterminal, the marginal of the joint posterior sits next to the
/// factored distribution (they agree exactly for the literal listener). For
/// the factor pair `(a, b)` the joint pair marginal is compared with the
/// product of its single marginals. With a known target, its rule pair is
/// reported as `target_cell`.
pub fn marginal_report(
    space: &ProgramSpace,
    spec: &[UttId],
    a: usize,
    b: usize,
    target: Option<usize>,
) -> Result<Value> {
    let names = space.factor_names();
    let mut levels = serde_json::Map::new();
    for (level, j, f) in [
        ("literal", joint::literal(space, spec)?, factored::literal(space, spec)?),
        (
            "pragmatic",
            joint::pragmatic(space, spec)?,
            factored::pragmatic(space, spec)?,
        ),
    ] {
        let m = j.marginals(space);
        let pair = j.pair_marginal(space, a, b);
        let outer = m.outer(a, b);
        levels.insert(
            level.to_string(),
            json!({
                "joint_marginals": m.to_json(names),
                "factored": f.to_json(names),
                "max_abs_diff": m.max_abs_diff(&f),
                "pair": {
                    "factors": [names[a], names[b]],
                    "joint": pair,
                    "product_of_marginals": outer,
                    "total_variation": total_variation(&pair, &outer),
                    "kl_joint_to_factored": factored::forward_kl(&pair, m.factor(a), m.factor(b)),
                },
            }),
        );
    }
    Ok(json!({
        "utterances": spec.iter().map(|&u| Utterance::from_id(u)).collect::<Vec<_>>(),
        "consistent_programs": space.consistent_set(spec).count_ones(..),
        "target_cell": target.map(|h| [space.choices(h)[a], space.choices(h)[b]]),
        "levels": levels,
    }))
}
