//! Mini-batch Adam training with level-wise batches, early stopping on
//! validation cardinality error, and loss-weight cross-validation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::featurizer::{EncodedPlanBatch, EncodedTree, FeatureError, Featurizer};
use crate::model::{qerror, ModelConfig, TargetNormalizer, TreeModel};
use crate::nn::{Adam, NnError, ParamSet};
use crate::plan::PlanTree;

/// Loss weights tried by [`select_loss_weight`].
pub const OMEGA_CANDIDATES: [f64; 7] = [0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub omega: f64,
    /// Epochs without a better validation card error before stopping.
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 64,
            learning_rate: 1e-3,
            omega: 1.0,
            patience: 5,
            seed: 42,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("loss diverged at epoch {epoch}, batch {batch}: {loss}")]
    Diverged { epoch: usize, batch: usize, loss: f64 },
    #[error("no training examples")]
    Empty,
    #[error("plan {0} has no root labels")]
    Unlabeled(usize),
}

/// An encoded plan with its root labels.
#[derive(Debug, Clone)]
pub struct Example {
    pub tree: EncodedTree,
    pub card: f64,
    pub cost: f64,
}

pub fn encode_examples(f: &Featurizer, plans: &[PlanTree]) -> Result<Vec<Example>, TrainError> {
    plans
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let tree = f.encode_tree(p)?;
            let (card, cost) = tree.root_labels().ok_or(TrainError::Unlabeled(i))?;
            Ok(Example { tree, card, cost })
        })
        .collect()
}

/// Seeded shuffle into `(train, validation)` indices; the validation part
/// takes `ceil(fraction * n)` items.
pub fn split_indices(n: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let v = ((n as f64 * fraction).ceil() as usize).min(n);
    let val = idx.split_off(n - v);
    (idx, val)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub val_card_qerror: Option<f64>,
    pub val_cost_qerror: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: TreeModel<f32>,
    pub normalizer: TargetNormalizer,
    pub history: Vec<EpochRecord>,
    /// Epoch whose parameters were kept; `None` when no epoch ran.
    pub best_epoch: Option<usize>,
}

fn batch_of(examples: &[&Example]) -> EncodedPlanBatch {
    EncodedPlanBatch::new(examples.iter().map(|e| e.tree.clone()).collect())
}

fn targets(norm: &TargetNormalizer, examples: &[&Example]) -> Vec<(f32, f32)> {
    examples
        .iter()
        .map(|e| (norm.normalize_cost(e.cost) as f32, norm.normalize_card(e.card) as f32))
        .collect()
}

/// Validation loss and mean q-errors in natural units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationScore {
    pub loss: f64,
    pub card: f64,
    pub cost: f64,
}

pub fn validate(
    model: &TreeModel<f32>,
    norm: &TargetNormalizer,
    examples: &[&Example],
    omega: f64,
    chunk: usize,
) -> Result<ValidationScore, TrainError> {
    let (mut loss, mut card, mut cost) = (0.0, 0.0, 0.0);
    for part in examples.chunks(chunk.max(1)) {
        let out = model.predict(&batch_of(part))?;
        let t = targets(norm, part);
        let (l, _, _) = TreeModel::loss_terms(&out, &t, omega as f32);
        loss += l as f64 * part.len() as f64;
        for (o, e) in out.iter().zip(part) {
            card += qerror(e.card, norm.denormalize_card(o.card as f64)).unwrap_or(f64::INFINITY);
            cost += qerror(e.cost, norm.denormalize_cost(o.cost as f64)).unwrap_or(f64::INFINITY);
        }
    }
    let n = examples.len().max(1) as f64;
    Ok(ValidationScore {
        loss: loss / n,
        card: card / n,
        cost: cost / n,
    })
}

/// Trains a fresh model. The normalizer is fitted on `train`; the kept
/// parameters are those of the epoch with the lowest validation card
/// q-error, or the last epoch when `val` is empty.
pub fn train(
    config: ModelConfig,
    train: &[Example],
    val: &[Example],
    cfg: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    if train.is_empty() {
        return Err(TrainError::Empty);
    }
    let norm = TargetNormalizer::fit(train.iter().map(|e| (e.card, e.cost)));
    let mut model = TreeModel::<f32>::new(config);
    let mut adam = Adam::new(cfg.learning_rate as f32);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let val_refs: Vec<&Example> = val.iter().collect();
    let mut history = Vec::new();
    let mut best: Option<(f64, usize, Vec<f32>)> = None;
    let mut order: Vec<usize> = (0..train.len()).collect();
    let bs = cfg.batch_size.max(1);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (b, idx) in order.chunks(bs).enumerate() {
            let part: Vec<&Example> = idx.iter().map(|&i| &train[i]).collect();
            let batch = batch_of(&part);
            let t = targets(&norm, &part);
            let (loss, grad) = match model.loss_and_grad(&batch, &t, cfg.omega as f32) {
                Ok(v) => v,
                Err(NnError::NonFinite(_)) => {
                    return Err(TrainError::Diverged {
                        epoch,
                        batch: b,
                        loss: f64::NAN,
                    })
                }
                Err(e) => return Err(e.into()),
            };
            if !loss.is_finite() {
                return Err(TrainError::Diverged {
                    epoch,
                    batch: b,
                    loss: loss as f64,
                });
            }
            total += loss as f64 * part.len() as f64;
            let g = grad.flatten();
            let mut slices = model.params.slices_mut();
            let mut offset = 0;
            let grads: Vec<&[f32]> = slices
                .iter()
                .map(|s| {
                    let piece = &g[offset..offset + s.len()];
                    offset += s.len();
                    piece
                })
                .collect();
            adam.step(&mut slices, &grads);
        }
        let mut record = EpochRecord {
            epoch,
            train_loss: total / train.len() as f64,
            val_loss: None,
            val_card_qerror: None,
            val_cost_qerror: None,
        };
        if !val_refs.is_empty() {
            let s = validate(&model, &norm, &val_refs, cfg.omega, 256)?;
            record.val_loss = Some(s.loss);
            record.val_card_qerror = Some(s.card);
            record.val_cost_qerror = Some(s.cost);
            if best.as_ref().is_none_or(|b| s.card < b.0) {
                best = Some((s.card, epoch, model.params.flatten()));
            }
        } else {
            best = Some((f64::NAN, epoch, Vec::new()));
        }
        history.push(record);
        if let Some((_, e, _)) = &best {
            if !val_refs.is_empty() && epoch - e >= cfg.patience {
                break;
            }
        }
    }
    let best_epoch = best.as_ref().map(|b| b.1);
    if let Some((_, _, params)) = best {
        if !params.is_empty() {
            model.params.load_flat(&params);
        }
    }
    Ok(TrainOutcome {
        model,
        normalizer: norm,
        history,
        best_epoch,
    })
}

/// Candidate with the lowest mean score over `folds`; ties go to the
/// smaller weight. `score(omega, fold)` is lower for better.
pub fn select_by<S: FnMut(f64, usize) -> f64>(candidates: &[f64], folds: usize, mut score: S) -> (f64, Vec<(f64, f64)>) {
    let mut table = Vec::with_capacity(candidates.len());
    let mut best = (f64::INFINITY, candidates[0]);
    for &omega in candidates {
        let mean = (0..folds).map(|k| score(omega, k)).sum::<f64>() / folds.max(1) as f64;
        table.push((omega, mean));
        if mean < best.0 || (mean == best.0 && omega < best.1) {
            best = (mean, omega);
        }
    }
    (best.1, table)
}

/// K-fold cross-validation of the loss weight. Each candidate trains on
/// `folds - 1` parts and is scored by validation mean cost q-error plus
/// mean card q-error on the held-out part.
pub fn select_loss_weight(
    config: ModelConfig,
    examples: &[Example],
    folds: usize,
    cfg: &TrainConfig,
) -> Result<(f64, Vec<(f64, f64)>), TrainError> {
    let folds = folds.max(2);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xF01D));
    let fold_of = |pos: usize| pos % folds;
    let mut err = None;
    let result = select_by(&OMEGA_CANDIDATES, folds, |omega, k| {
        let train_part: Vec<Example> = order
            .iter()
            .enumerate()
            .filter(|(p, _)| fold_of(*p) != k)
            .map(|(_, &i)| examples[i].clone())
            .collect();
        let held: Vec<Example> = order
            .iter()
            .enumerate()
            .filter(|(p, _)| fold_of(*p) == k)
            .map(|(_, &i)| examples[i].clone())
            .collect();
        let run = train(config, &train_part, &[], &TrainConfig { omega, ..*cfg }).and_then(|out| {
            let refs: Vec<&Example> = held.iter().collect();
            validate(&out.model, &out.normalizer, &refs, omega, 256)
        });
        match run {
            Ok(s) => s.card + s.cost,
            Err(e) => {
                err.get_or_insert(e);
                f64::INFINITY
            }
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(result),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_is_a_partition() {
        let (t, v) = split_indices(101, 0.1, 3);
        assert_eq!(v.len(), 11);
        let mut all: Vec<usize> = t.iter().chain(&v).copied().collect();
        all.sort();
        assert_eq!(all, (0..101).collect::<Vec<_>>());
        assert_eq!(split_indices(101, 0.1, 3), (t, v));
    }

    #[test]
    fn candidate_set() {
        assert_eq!(OMEGA_CANDIDATES, [0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0]);
    }

    #[test]
    fn rigged_folds_select_one() {
        // Score (ln omega)^2 per fold plus a fold offset: minimum at 1.
        let (w, table) = select_by(&OMEGA_CANDIDATES, 3, |omega, k| omega.ln().powi(2) + k as f64);
        assert_eq!(w, 1.0);
        assert_eq!(table.len(), 7);
    }

    #[test]
    fn ties_go_to_the_smaller_weight() {
        let (w, _) = select_by(&OMEGA_CANDIDATES, 2, |omega, _| if omega >= 2.0 { 1.0 } else { 5.0 });
        assert_eq!(w, 2.0);
        let (w, _) = select_by(&OMEGA_CANDIDATES, 2, |_, _| 3.0);
        assert_eq!(w, 0.1);
    }

    #[test]
    fn single_fold_winner() {
        let (w, _) = select_by(&OMEGA_CANDIDATES, 1, |omega, _| (omega - 5.0).abs());
        assert_eq!(w, 5.0);
    }
}
