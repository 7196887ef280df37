//! A learned factored literal listener.
//!
//! A sequence of reveals is encoded as a 7×7×6 binary tensor: for a reveal
//! `(x, y, object, colour)` both `T[x, y, object]` and `T[x, y, 3 + colour]`
//! are set. A two-hidden-layer ReLU perceptron maps the flattened tensor to
//! a 12×7 logit matrix; each row is a softmax over the nonterminal's rules,
//! with slots beyond the arity masked out. Training minimizes the summed
//! per-factor cross-entropy against the exact marginals of the enumerated
//! literal listener, on reveal sequences sampled from the literal speaker.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2, Axis};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::distribution::FactoredDistribution;
use crate::dsl::{Utterance, ARITIES, GRID_SIZE, MAX_ARITY, NUM_NONTERMINALS};
use crate::error::{Error, Result};
use crate::factored::{self, LiteralModel};
use crate::space::{ProgramSpace, UttId};
use crate::speaker;

pub const CHANNELS: usize = 6;
pub const INPUT_DIM: usize = GRID_SIZE * GRID_SIZE * CHANNELS;
pub const OUTPUT_DIM: usize = NUM_NONTERMINALS * MAX_ARITY;
pub const CHECKPOINT_VERSION: u32 = 1;

/// Lower bound on the network's predicted probabilities when they feed the
/// pragmatic recursion, so that products over many utterances stay finite.
pub const PREDICTION_FLOOR: f64 = 1e-9;

fn input_index(x: usize, y: usize, channel: usize) -> usize {
    (x * GRID_SIZE + y) * CHANNELS + channel
}

fn utterance_inputs(u: UttId) -> [usize; 2] {
    let u = Utterance::from_id(u);
    let (x, y) = (u.x as usize, u.y as usize);
    [
        input_index(x, y, u.object.index()),
        input_index(x, y, 3 + u.colour as usize),
    ]
}

/// Indices of the set entries of the encoding, ascending.
pub fn encode_indices(spec: &[UttId]) -> Vec<usize> {
    let mut idx: Vec<usize> = spec.iter().flat_map(|&u| utterance_inputs(u)).collect();
    idx.sort_unstable();
    idx.dedup();
    idx
}

/// The dense 294-long encoding, flattened as `[x][y][channel]`.
pub fn encode(spec: &[UttId]) -> Vec<f64> {
    let mut dense = vec![0.0; INPUT_DIM];
    for i in encode_indices(spec) {
        dense[i] = 1.0;
    }
    dense
}

fn output_valid(slot: usize) -> bool {
    slot % MAX_ARITY < ARITIES[slot / MAX_ARITY]
}

/// Pads a factored distribution into the 12×7 output layout.
pub fn target_matrix(q: &FactoredDistribution) -> Vec<f64> {
    let mut t = vec![0.0; OUTPUT_DIM];
    for (i, f) in q.factors().iter().enumerate() {
        t[i * MAX_ARITY..i * MAX_ARITY + f.len()].copy_from_slice(f);
    }
    t
}

fn matrix_to_factored(row: &[f64]) -> FactoredDistribution {
    FactoredDistribution::new(
        ARITIES
            .iter()
            .enumerate()
            .map(|(i, &a)| row[i * MAX_ARITY..i * MAX_ARITY + a].to_vec())
            .collect(),
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub spec_len_min: usize,
    pub spec_len_max: usize,
    pub steps: usize,
    pub pool_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub hidden: [usize; 2],
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 8,
            spec_len_min: 2,
            spec_len_max: 25,
            steps: 20_000,
            pool_size: 10_000,
            learning_rate: 1e-2,
            seed: 0,
            hidden: [256, 256],
        }
    }
}

impl TrainConfig {
    /// Full-length schedule: 150,000 steps.
    pub fn full_scale() -> Self {
        TrainConfig {
            steps: 150_000,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.batch_size > 0
            && self.pool_size > 0
            && self.spec_len_min >= 1
            && self.spec_len_min <= self.spec_len_max
            && self.spec_len_max <= GRID_SIZE * GRID_SIZE
            && self.hidden.iter().all(|&h| h > 0)
            && self.learning_rate > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Checkpoint(format!("invalid training configuration {self:?}")))
        }
    }
}

/// Parameter gradients, same shapes as the network.
#[derive(Clone, Debug)]
pub struct Gradients {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
    pub w3: Array2<f64>,
    pub b3: Array1<f64>,
}

impl Gradients {
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        out.extend(self.w1.iter());
        out.extend(self.b1.iter());
        out.extend(self.w2.iter());
        out.extend(self.b2.iter());
        out.extend(self.w3.iter());
        out.extend(self.b3.iter());
        out
    }
}

struct Forward {
    z1: Array2<f64>,
    a1: Array2<f64>,
    z2: Array2<f64>,
    a2: Array2<f64>,
    probs: Array2<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ListenerNet {
    w1: Array2<f64>,
    b1: Array1<f64>,
    w2: Array2<f64>,
    b2: Array1<f64>,
    w3: Array2<f64>,
    b3: Array1<f64>,
    config: TrainConfig,
}

fn uniform_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    let bound = 1.0 / (rows as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || rng.gen_range(-bound..bound))
}

fn relu(z: &Array2<f64>) -> Array2<f64> {
    z.mapv(|v| v.max(0.0))
}

impl ListenerNet {
    /// Fresh network with weights uniform in `±1/√fan_in` and zero biases.
    pub fn new(config: TrainConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let [h1, h2] = config.hidden;
        ListenerNet {
            w1: uniform_matrix(INPUT_DIM, h1, &mut rng),
            b1: Array1::zeros(h1),
            w2: uniform_matrix(h1, h2, &mut rng),
            b2: Array1::zeros(h2),
            w3: uniform_matrix(h2, OUTPUT_DIM, &mut rng),
            b3: Array1::zeros(OUTPUT_DIM),
            config,
        }
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    /// Zeroes the output layer, making every prediction uniform.
    pub fn zero_output_layer(&mut self) {
        self.w3.fill(0.0);
        self.b3.fill(0.0);
    }

    fn forward(&self, inputs: &[Vec<usize>]) -> Forward {
        let mut z1 = Array2::zeros((inputs.len(), self.b1.len()));
        for (mut row, idx) in z1.rows_mut().into_iter().zip(inputs) {
            row.assign(&self.b1);
            for &k in idx {
                row += &self.w1.row(k);
            }
        }
        let a1 = relu(&z1);
        let z2 = a1.dot(&self.w2) + &self.b2;
        let a2 = relu(&z2);
        let mut probs = a2.dot(&self.w3) + &self.b3;
        for mut row in probs.rows_mut() {
            for (i, &arity) in ARITIES.iter().enumerate() {
                let mut factor = row.slice_mut(ndarray::s![i * MAX_ARITY..(i + 1) * MAX_ARITY]);
                let max = factor.iter().take(arity).copied().fold(f64::NEG_INFINITY, f64::max);
                let mut total = 0.0;
                for (j, v) in factor.iter_mut().enumerate() {
                    *v = if j < arity { (*v - max).exp() } else { 0.0 };
                    total += *v;
                }
                factor.mapv_inplace(|v| v / total);
            }
        }
        Forward { z1, a1, z2, a2, probs }
    }

    /// Masked, per-factor normalized rule probabilities for each input.
    pub fn predict_encoded(&self, inputs: &[Vec<usize>]) -> Vec<Vec<f64>> {
        self.forward(inputs)
            .probs
            .rows()
            .into_iter()
            .map(|r| r.to_vec())
            .collect()
    }

    pub fn predict(&self, spec: &[UttId]) -> FactoredDistribution {
        let probs = self.forward(&[encode_indices(spec)]).probs;
        matrix_to_factored(probs.row(0).as_slice().expect("contiguous"))
    }

    /// Summed per-factor cross-entropy `Σᵢ H(targetᵢ, predictedᵢ)`.
    pub fn loss(&self, spec: &[UttId], target: &FactoredDistribution) -> f64 {
        self.loss_and_gradients(&[encode_indices(spec)], &[target_matrix(target)])
            .0
    }

    /// Summed loss over the batch and its parameter gradients.
    pub fn loss_and_gradients(&self, inputs: &[Vec<usize>], targets: &[Vec<f64>]) -> (f64, Gradients) {
        let fwd = self.forward(inputs);
        let mut loss = 0.0;
        let mut d3 = fwd.probs.clone();
        for (r, target) in targets.iter().enumerate() {
            for (slot, &t) in target.iter().enumerate() {
                if !output_valid(slot) {
                    continue;
                }
                if t > 0.0 {
                    loss -= t * fwd.probs[[r, slot]].ln();
                }
                d3[[r, slot]] -= t;
            }
        }
        let gw3 = fwd.a2.t().dot(&d3);
        let gb3 = d3.sum_axis(Axis(0));
        let mut d2 = d3.dot(&self.w3.t());
        d2.zip_mut_with(&fwd.z2, |d, &z| {
            if z <= 0.0 {
                *d = 0.0
            }
        });
        let gw2 = fwd.a1.t().dot(&d2);
        let gb2 = d2.sum_axis(Axis(0));
        let mut d1 = d2.dot(&self.w2.t());
        d1.zip_mut_with(&fwd.z1, |d, &z| {
            if z <= 0.0 {
                *d = 0.0
            }
        });
        let mut gw1 = Array2::zeros(self.w1.raw_dim());
        for (d, idx) in d1.rows().into_iter().zip(inputs) {
            for &k in idx {
                let mut row = gw1.row_mut(k);
                row += &d;
            }
        }
        let gb1 = d1.sum_axis(Axis(0));
        (
            loss,
            Gradients {
                w1: gw1,
                b1: gb1,
                w2: gw2,
                b2: gb2,
                w3: gw3,
                b3: gb3,
            },
        )
    }

    /// Plain gradient step.
    pub fn apply(&mut self, g: &Gradients, learning_rate: f64) {
        self.w1.scaled_add(-learning_rate, &g.w1);
        self.b1.scaled_add(-learning_rate, &g.b1);
        self.w2.scaled_add(-learning_rate, &g.w2);
        self.b2.scaled_add(-learning_rate, &g.b2);
        self.w3.scaled_add(-learning_rate, &g.w3);
        self.b3.scaled_add(-learning_rate, &g.b3);
    }

    fn params_mut(&mut self) -> [&mut [f64]; 6] {
        [
            self.w1.as_slice_mut().expect("contiguous"),
            self.b1.as_slice_mut().expect("contiguous"),
            self.w2.as_slice_mut().expect("contiguous"),
            self.b2.as_slice_mut().expect("contiguous"),
            self.w3.as_slice_mut().expect("contiguous"),
            self.b3.as_slice_mut().expect("contiguous"),
        ]
    }

    pub fn num_params(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len() + self.w3.len() + self.b3.len()
    }

    /// Mutable access to the `i`-th parameter in [`Gradients::flatten`] order.
    pub fn param_mut(&mut self, mut i: usize) -> &mut f64 {
        for block in self.params_mut() {
            if i < block.len() {
                return &mut block[i];
            }
            i -= block.len();
        }
        panic!("parameter index out of range");
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let layer = |w: &Array2<f64>, b: &Array1<f64>| LayerData {
            rows: w.nrows(),
            cols: w.ncols(),
            weights: w.iter().copied().collect(),
            bias: b.to_vec(),
        };
        let ckpt = Checkpoint {
            version: CHECKPOINT_VERSION,
            config: self.config.clone(),
            layers: vec![
                layer(&self.w1, &self.b1),
                layer(&self.w2, &self.b2),
                layer(&self.w3, &self.b3),
            ],
        };
        fs::write(path, serde_json::to_vec(&ckpt)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let ckpt: Checkpoint = serde_json::from_slice(&fs::read(path)?)?;
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {}", ckpt.version)));
        }
        let [l1, l2, l3]: [LayerData; 3] = ckpt
            .layers
            .try_into()
            .map_err(|_| Error::Checkpoint("expected three layers".into()))?;
        if l1.rows != INPUT_DIM || l3.cols != OUTPUT_DIM || l1.cols != l2.rows || l2.cols != l3.rows {
            return Err(Error::Checkpoint("layer shapes do not chain".into()));
        }
        let layer = |l: LayerData| -> Result<(Array2<f64>, Array1<f64>)> {
            if l.bias.len() != l.cols {
                return Err(Error::Checkpoint("bias length mismatch".into()));
            }
            let w =
                Array2::from_shape_vec((l.rows, l.cols), l.weights).map_err(|e| Error::Checkpoint(e.to_string()))?;
            Ok((w, Array1::from(l.bias)))
        };
        let (w1, b1) = layer(l1)?;
        let (w2, b2) = layer(l2)?;
        let (w3, b3) = layer(l3)?;
        Ok(ListenerNet {
            w1,
            b1,
            w2,
            b2,
            w3,
            b3,
            config: ckpt.config,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct LayerData {
    rows: usize,
    cols: usize,
    /// Row-major.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    version: u32,
    config: TrainConfig,
    layers: Vec<LayerData>,
}

/// A training or evaluation example: a spec and its exact literal factors.
#[derive(Clone, Debug)]
pub struct Example {
    pub spec: Vec<UttId>,
    pub target: FactoredDistribution,
}

fn sample_example<R: Rng>(space: &ProgramSpace, h: usize, cfg: &TrainConfig, rng: &mut R) -> Example {
    let len = rng.gen_range(cfg.spec_len_min..=cfg.spec_len_max);
    let spec = speaker::speak_literal_with(space, h, len, rng);
    let target = factored::literal(space, &spec).expect("spec is true of its program");
    Example { spec, target }
}

/// The fixed program pool the trainer samples from.
pub fn training_pool(space: &ProgramSpace, cfg: &TrainConfig) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x706f_6f6c);
    let n = cfg.pool_size.min(space.len());
    let mut pool = index::sample(&mut rng, space.len(), n).into_vec();
    pool.sort_unstable();
    pool
}

/// Specs drawn by the literal speaker from programs outside the training
/// pool.
pub fn held_out_examples(space: &ProgramSpace, cfg: &TrainConfig, n: usize, seed: u64) -> Vec<Example> {
    let pool = training_pool(space, cfg);
    let outside: Vec<usize> = (0..space.len()).filter(|h| pool.binary_search(h).is_err()).collect();
    let candidates = if outside.is_empty() {
        (0..space.len()).collect()
    } else {
        outside
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let h = candidates[rng.gen_range(0..candidates.len())];
            sample_example(space, h, cfg, &mut rng)
        })
        .collect()
}

/// Trains a network, calling `on_step(step, batch_loss)` after every update.
pub fn train_with<F: FnMut(usize, f64)>(
    space: &ProgramSpace,
    cfg: &TrainConfig,
    mut on_step: F,
) -> Result<ListenerNet> {
    cfg.validate()?;
    let mut net = ListenerNet::new(cfg.clone());
    let pool = training_pool(space, cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    for step in 0..cfg.steps {
        let mut inputs = Vec::with_capacity(cfg.batch_size);
        let mut targets = Vec::with_capacity(cfg.batch_size);
        for _ in 0..cfg.batch_size {
            let h = pool[rng.gen_range(0..pool.len())];
            let ex = sample_example(space, h, cfg, &mut rng);
            inputs.push(encode_indices(&ex.spec));
            targets.push(target_matrix(&ex.target));
        }
        let (loss, grads) = net.loss_and_gradients(&inputs, &targets);
        net.apply(&grads, cfg.learning_rate);
        on_step(step, loss);
    }
    Ok(net)
}

pub fn train(space: &ProgramSpace, cfg: &TrainConfig) -> Result<ListenerNet> {
    train_with(space, cfg, |_, _| {})
}

/// Mean cross-entropy per factor between targets and a predictor.
pub fn factor_cross_entropy<F: Fn(&[UttId]) -> FactoredDistribution>(examples: &[Example], predict: F) -> Vec<f64> {
    let mut ce = vec![0.0; NUM_NONTERMINALS];
    for ex in examples {
        let q = predict(&ex.spec);
        for (i, (t, p)) in ex.target.factors().iter().zip(q.factors()).enumerate() {
            ce[i] -= t
                .iter()
                .zip(p)
                .filter(|(t, _)| **t > 0.0)
                .map(|(t, p)| t * p.ln())
                .sum::<f64>();
        }
    }
    ce.iter().map(|c| c / examples.len().max(1) as f64).collect()
}

/// Anything that maps specs to literal rule probabilities in the space's
/// flat slot layout. Outputs are used as given; a zero eliminates the rule.
pub trait Predictor {
    fn predict_slots(&self, specs: &[Vec<UttId>]) -> Vec<Vec<f64>>;
}

impl Predictor for ListenerNet {
    fn predict_slots(&self, specs: &[Vec<UttId>]) -> Vec<Vec<f64>> {
        let inputs: Vec<Vec<usize>> = specs.iter().map(|s| encode_indices(s)).collect();
        self.predict_encoded(&inputs)
            .into_iter()
            .map(|row| {
                ARITIES
                    .iter()
                    .enumerate()
                    .flat_map(|(i, &a)| row[i * MAX_ARITY..i * MAX_ARITY + a].to_vec())
                    .map(|p| p.max(PREDICTION_FLOOR))
                    .collect()
            })
            .collect()
    }
}

/// A learned literal listener plugged into the factored pragmatic recursion.
pub struct NeuralLiteral<'a, P: Predictor + ?Sized> {
    pub predictor: &'a P,
    pub space: &'a ProgramSpace,
}

const CANDIDATE_BATCH: usize = 128;

impl<P: Predictor + ?Sized> LiteralModel for NeuralLiteral<'_, P> {
    fn space(&self) -> &ProgramSpace {
        self.space
    }

    fn candidate_literals(&self, prefix: &[UttId], candidates: &[UttId]) -> Vec<Option<Vec<f64>>> {
        let mut out = Vec::with_capacity(candidates.len());
        for chunk in candidates.chunks(CANDIDATE_BATCH) {
            let specs: Vec<Vec<UttId>> = chunk
                .iter()
                .map(|&u| {
                    let mut s = prefix.to_vec();
                    s.push(u);
                    s
                })
                .collect();
            for slots in self.predictor.predict_slots(&specs) {
                out.push(Some(slots));
            }
        }
        out
    }
}

/// Pragmatic lift of a learned literal listener.
pub fn neural_pragmatic<P: Predictor + ?Sized>(
    predictor: &P,
    space: &ProgramSpace,
    spec: &[UttId],
) -> Result<FactoredDistribution> {
    factored::pragmatic_with(&NeuralLiteral { predictor, space }, spec)
}

pub fn neural_pragmatic_by_prefix<P: Predictor + ?Sized>(
    predictor: &P,
    space: &ProgramSpace,
    spec: &[UttId],
) -> Vec<Result<FactoredDistribution>> {
    factored::pragmatic_by_prefix_with(&NeuralLiteral { predictor, space }, spec)
}
