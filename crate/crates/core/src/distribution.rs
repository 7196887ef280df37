use std::io::Write;

use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::space::ProgramSpace;

/// Absolute tolerance used for every distribution comparison.
pub const TOLERANCE: f64 = 1e-9;

/// A probability vector over program indices.
#[derive(Clone, Debug, PartialEq)]
pub struct JointDistribution {
    probs: Vec<f64>,
}

impl JointDistribution {
    /// Normalizes non-negative weights; all-zero weights mean no program is
    /// consistent.
    pub fn from_weights(mut weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if total <= 0.0 || !total.is_finite() {
            return Err(Error::NoConsistentProgram);
        }
        for w in &mut weights {
            *w /= total;
        }
        Ok(JointDistribution { probs: weights })
    }

    /// Normalizes log-weights (`-inf` for zero mass).
    pub fn from_log_weights(log_weights: &[f64]) -> Result<Self> {
        let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Err(Error::NoConsistentProgram);
        }
        Self::from_weights(log_weights.iter().map(|&l| (l - max).exp()).collect())
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, h: usize) -> f64 {
        self.probs[h]
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.probs.iter().enumerate().filter(|(_, &p)| p > 0.0).map(|(h, _)| h)
    }

    /// Most probable program; equal probabilities go to the lower index.
    pub fn argmax(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (h, &p) in self.probs.iter().enumerate() {
            if p > 0.0 && best.is_none_or(|(_, b)| p > b) {
                best = Some((h, p));
            }
        }
        best.map(|(h, _)| h)
    }

    /// The `k` most probable programs, ties by index.
    pub fn top_k(&self, k: usize) -> Vec<(usize, f64)> {
        let mut support: Vec<(usize, f64)> = self.support().map(|h| (h, self.probs[h])).collect();
        support.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        support.truncate(k);
        support
    }

    /// Per-factor marginals under `space`.
    pub fn marginals(&self, space: &ProgramSpace) -> FactoredDistribution {
        let mut factors: Vec<Vec<f64>> = space.arities().iter().map(|&a| vec![0.0; a]).collect();
        for h in self.support() {
            let p = self.probs[h];
            for (i, &c) in space.choices(h).iter().enumerate() {
                factors[i][c as usize] += p;
            }
        }
        FactoredDistribution { factors }
    }

    /// Two-dimensional marginal over factors `a` (rows) and `b` (columns).
    pub fn pair_marginal(&self, space: &ProgramSpace, a: usize, b: usize) -> Vec<Vec<f64>> {
        let mut table = vec![vec![0.0; space.arities()[b]]; space.arities()[a]];
        for h in self.support() {
            let c = space.choices(h);
            table[c[a] as usize][c[b] as usize] += self.probs[h];
        }
        table
    }

    /// CSV with header `program_index,probability`, support only.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["program_index", "probability"])?;
        for h in self.support() {
            w.write_record([h.to_string(), self.probs[h].to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// A product of independent per-nonterminal rule distributions.
#[derive(Clone, Debug, PartialEq)]
pub struct FactoredDistribution {
    factors: Vec<Vec<f64>>,
}

impl FactoredDistribution {
    /// Wraps already-normalized factors.
    pub fn new(factors: Vec<Vec<f64>>) -> Self {
        debug_assert!(factors.iter().all(|f| (f.iter().sum::<f64>() - 1.0).abs() < 1e-6));
        FactoredDistribution { factors }
    }

    /// Normalizes each factor independently.
    pub fn normalized(mut factors: Vec<Vec<f64>>) -> Result<Self> {
        for f in &mut factors {
            let total: f64 = f.iter().sum();
            if total <= 0.0 || !total.is_finite() {
                return Err(Error::NoConsistentProgram);
            }
            f.iter_mut().for_each(|p| *p /= total);
        }
        Ok(FactoredDistribution { factors })
    }

    /// Splits a flat slot vector into factors and normalizes them.
    pub fn from_slots(space: &ProgramSpace, slots: &[f64]) -> Result<Self> {
        let o = space.offsets();
        Self::normalized(
            (0..space.num_factors())
                .map(|i| slots[o[i]..o[i + 1]].to_vec())
                .collect(),
        )
    }

    pub fn uniform(arities: &[usize]) -> Self {
        FactoredDistribution {
            factors: arities.iter().map(|&a| vec![1.0 / a as f64; a]).collect(),
        }
    }

    pub fn point_mass(arities: &[usize], choices: &[u8]) -> Self {
        FactoredDistribution {
            factors: arities
                .iter()
                .zip(choices)
                .map(|(&a, &c)| {
                    let mut f = vec![0.0; a];
                    f[c as usize] = 1.0;
                    f
                })
                .collect(),
        }
    }

    pub fn factors(&self) -> &[Vec<f64>] {
        &self.factors
    }

    pub fn factor(&self, i: usize) -> &[f64] {
        &self.factors[i]
    }

    pub fn num_factors(&self) -> usize {
        self.factors.len()
    }

    /// `∏ᵢ Qⁱ(choices[i])`.
    pub fn program_probability(&self, choices: &[u8]) -> f64 {
        self.factors.iter().zip(choices).map(|(f, &c)| f[c as usize]).product()
    }

    /// `Σᵢ log Qⁱ(choices[i])`, summed in factor order.
    pub fn log_probability(&self, choices: &[u8]) -> f64 {
        self.factors.iter().zip(choices).map(|(f, &c)| f[c as usize].ln()).sum()
    }

    /// Outer product of factors `a` (rows) and `b` (columns).
    pub fn outer(&self, a: usize, b: usize) -> Vec<Vec<f64>> {
        self.factors[a]
            .iter()
            .map(|&pa| self.factors[b].iter().map(|&pb| pa * pb).collect())
            .collect()
    }

    /// Largest absolute per-entry difference.
    pub fn max_abs_diff(&self, other: &FactoredDistribution) -> f64 {
        self.factors
            .iter()
            .zip(&other.factors)
            .flat_map(|(a, b)| {
                assert_eq!(a.len(), b.len());
                a.iter().zip(b).map(|(x, y)| (x - y).abs())
            })
            .fold(0.0, f64::max)
    }

    /// `{factor_name: [probabilities]}`.
    pub fn to_json(&self, names: &[String]) -> Value {
        let mut map = Map::new();
        for (name, f) in names.iter().zip(&self.factors) {
            map.insert(name.clone(), Value::from(f.clone()));
        }
        Value::Object(map)
    }
}
