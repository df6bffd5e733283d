//! Skip-gram with negative sampling over tuple "sentences".
//!
//! Every token in a sentence is a context for every other token in the
//! same sentence. Negatives come from the unigram distribution raised to
//! 0.75; the learning rate decays linearly towards zero over training.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::dict::SubstringDictionary;

#[derive(Debug, Clone, PartialEq)]
pub struct SkipGramConfig {
    pub dim: usize,
    pub epochs: usize,
    pub seed: u64,
    pub negatives: usize,
    pub learning_rate: f32,
    /// With more than one thread, each epoch trains shards on copies of the
    /// model and averages them. Results depend on the thread count.
    pub threads: usize,
}

impl Default for SkipGramConfig {
    fn default() -> Self {
        SkipGramConfig {
            dim: 64,
            epochs: 5,
            seed: 42,
            negatives: 5,
            learning_rate: 0.025,
            threads: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkipGram {
    pub dim: usize,
    /// Input (word) vectors, `vocab x dim`.
    pub input: Vec<f32>,
    /// Output (context) vectors, `vocab x dim`.
    pub output: Vec<f32>,
}

impl SkipGram {
    /// Input vectors uniform in `±0.5/dim`, output vectors zero.
    pub fn init(vocab: usize, dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let half = 0.5 / dim as f32;
        SkipGram {
            dim,
            input: (0..vocab * dim).map(|_| rng.random_range(-half..half)).collect(),
            output: vec![0.0; vocab * dim],
        }
    }

    pub fn vector(&self, token: usize) -> &[f32] {
        &self.input[token * self.dim..(token + 1) * self.dim]
    }

    fn pair_update(&mut self, center: usize, target: usize, label: f32, lr: f32, grad: &mut [f32]) {
        let d = self.dim;
        let inp = &self.input[center * d..(center + 1) * d];
        let out = &mut self.output[target * d..(target + 1) * d];
        let dot = dot(inp, out);
        let g = (label - sigmoid(dot)) * lr;
        for k in 0..d {
            grad[k] += g * out[k];
            out[k] += g * inp[k];
        }
    }

    fn train_shard(
        &mut self,
        sentences: &[&Vec<usize>],
        negatives: &NegativeTable,
        cfg: &SkipGramConfig,
        rng: &mut ChaCha8Rng,
        lr_at: &dyn Fn(usize) -> f32,
        mut step: usize,
    ) -> usize {
        let d = self.dim;
        let mut grad = vec![0f32; d];
        for sentence in sentences {
            for (i, &center) in sentence.iter().enumerate() {
                for (j, &ctx) in sentence.iter().enumerate() {
                    if i == j {
                        continue;
                    }
                    let lr = lr_at(step);
                    step += 1;
                    grad.iter_mut().for_each(|g| *g = 0.0);
                    self.pair_update(center, ctx, 1.0, lr, &mut grad);
                    for _ in 0..cfg.negatives {
                        let neg = negatives.sample(rng);
                        if neg == ctx {
                            continue;
                        }
                        self.pair_update(center, neg, 0.0, lr, &mut grad);
                    }
                    for (w, g) in self.input[center * d..(center + 1) * d].iter_mut().zip(&grad) {
                        *w += g;
                    }
                }
            }
        }
        step
    }
}

/// Dot product with eight independent accumulators so it vectorizes.
fn dot(a: &[f32], b: &[f32]) -> f32 {
    let mut acc = [0f32; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let tail: f32 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    acc.iter().sum::<f32>() + tail
}

/// Unigram^0.75 sampling table: each token fills a share of the slots
/// proportional to its weight.
struct NegativeTable(Vec<u32>);

impl NegativeTable {
    const SIZE: usize = 1 << 20;

    fn new(counts: &[f64]) -> Option<Self> {
        let weights: Vec<f64> = counts.iter().map(|c| c.powf(0.75)).collect();
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return None;
        }
        let mut table = Vec::with_capacity(Self::SIZE);
        let mut cum = 0.0;
        for (t, w) in weights.iter().enumerate() {
            cum += w / total;
            let end = ((cum * Self::SIZE as f64).round() as usize).min(Self::SIZE);
            while table.len() < end {
                table.push(t as u32);
            }
        }
        let last = weights.iter().rposition(|&w| w > 0.0)? as u32;
        table.resize(Self::SIZE, last);
        Some(NegativeTable(table))
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> usize {
        self.0[rng.random_range(0..self.0.len())] as usize
    }
}

fn sigmoid(x: f32) -> f32 {
    if x > 8.0 {
        1.0
    } else if x < -8.0 {
        0.0
    } else {
        1.0 / (1.0 + (-x).exp())
    }
}

/// Trains on sentences of token ids in `0..vocab`.
pub fn train_ids(sentences: &[Vec<usize>], vocab: usize, cfg: &SkipGramConfig) -> SkipGram {
    let mut model = SkipGram::init(vocab, cfg.dim, cfg.seed);
    if cfg.epochs == 0 || vocab == 0 {
        return model;
    }
    let mut counts = vec![0f64; vocab];
    for s in sentences {
        for &t in s {
            counts[t] += 1.0;
        }
    }
    let Some(negatives) = NegativeTable::new(&counts) else {
        return model;
    };
    let pairs_per_epoch: usize = sentences.iter().map(|s| s.len() * s.len().saturating_sub(1)).sum();
    let total = (pairs_per_epoch * cfg.epochs).max(1);
    let lr0 = cfg.learning_rate;
    let lr_at = move |step: usize| lr0 * (1.0 - step as f32 / total as f32).max(1e-4);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5EED);
    let mut order: Vec<&Vec<usize>> = sentences.iter().collect();
    let mut step = 0usize;
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        if cfg.threads <= 1 {
            step = model.train_shard(&order, &negatives, cfg, &mut rng, &lr_at, step);
            continue;
        }
        let shard_len = order.len().div_ceil(cfg.threads).max(1);
        let seeds: Vec<u64> = (0..cfg.threads).map(|_| rng.random()).collect();
        let replicas: Vec<SkipGram> = std::thread::scope(|scope| {
            let handles: Vec<_> = order
                .chunks(shard_len)
                .zip(&seeds)
                .map(|(shard, &seed)| {
                    let mut local = model.clone();
                    let negatives = &negatives;
                    let lr_at = &lr_at;
                    scope.spawn(move || {
                        let mut rng = ChaCha8Rng::seed_from_u64(seed);
                        local.train_shard(shard, negatives, cfg, &mut rng, lr_at, step);
                        local
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("skip-gram worker panicked")).collect()
        });
        step += pairs_per_epoch;
        let n = replicas.len() as f32;
        for (i, w) in model.input.iter_mut().enumerate() {
            *w = replicas.iter().map(|r| r.input[i]).sum::<f32>() / n;
        }
        for (i, w) in model.output.iter_mut().enumerate() {
            *w = replicas.iter().map(|r| r.output[i]).sum::<f32>() / n;
        }
    }
    model
}

/// Trains vectors for every dictionary entry. Sentence tokens that are not
/// dictionary keys (e.g. tuple keys) take part in training but are not kept.
pub fn train_skipgram(
    sentences: &[Vec<String>],
    dict: &SubstringDictionary,
    cfg: &SkipGramConfig,
) -> SubstringDictionary {
    let mut extra: HashMap<&str, usize> = HashMap::new();
    let mut ids: Vec<Vec<usize>> = Vec::with_capacity(sentences.len());
    for s in sentences {
        let mut row = Vec::with_capacity(s.len());
        for tok in s {
            let id = match dict.position(tok) {
                Some(i) => i,
                None => {
                    let next = dict.len() + extra.len();
                    *extra.entry(tok.as_str()).or_insert(next)
                }
            };
            row.push(id);
        }
        ids.push(row);
    }
    let model = train_ids(&ids, dict.len() + extra.len(), cfg);
    let mut out = SubstringDictionary::clone(dict);
    let mut vectors = model.input;
    vectors.truncate(dict.len() * cfg.dim);
    out.dim = cfg.dim;
    out.set_vectors(vectors);
    out
}

pub fn cosine(a: &[f32], b: &[f32]) -> f32 {
    let dot: f32 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f32 = a.iter().map(|x| x * x).sum::<f32>().sqrt();
    let nb: f32 = b.iter().map(|x| x * x).sum::<f32>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}
