//! A trained model bound to its featurizer and target normalizer.

use crate::featurizer::{EncodedPlanBatch, FeatureError, Featurizer};
use crate::model::checkpoint::{Checkpoint, CheckpointMeta};
use crate::model::{HeadOutput, RepresentationState, TargetNormalizer, TreeModel};
use crate::nn::NnError;
use crate::plan::{PlanNode, PlanTree};
use crate::pool::{Estimate, MemoryPool, PoolEntry};

#[derive(Debug, thiserror::Error)]
pub enum EstimateError {
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("featurizer widths {got:?} do not match the checkpoint's {expected:?}")]
    Width {
        expected: (usize, usize, usize, usize),
        got: (usize, usize, usize, usize),
    },
}

/// Plans per forward pass in [`Estimator::estimate_all`].
const CHUNK: usize = 256;

#[derive(Debug, Clone)]
pub struct Estimator {
    pub featurizer: Featurizer,
    pub model: TreeModel<f32>,
    pub normalizer: TargetNormalizer,
    pub omega: f64,
}

impl Estimator {
    pub fn denormalize(&self, out: HeadOutput<f32>) -> Estimate {
        Estimate {
            cost: self.normalizer.denormalize_cost(out.cost as f64),
            card: self.normalizer.denormalize_card(out.card as f64),
        }
    }

    /// Root estimates for many plans, level-batched.
    pub fn estimate_all(&self, plans: &[PlanTree]) -> Result<Vec<Estimate>, EstimateError> {
        let mut out = Vec::with_capacity(plans.len());
        for chunk in plans.chunks(CHUNK) {
            let batch = self.featurizer.encode_plan_batch(chunk)?;
            out.extend(self.model.predict(&batch)?.into_iter().map(|o| self.denormalize(o)));
        }
        Ok(out)
    }

    pub fn estimate_batch(&self, batch: &EncodedPlanBatch) -> Result<Vec<Estimate>, EstimateError> {
        Ok(self.model.predict(batch)?.into_iter().map(|o| self.denormalize(o)).collect())
    }

    pub fn estimate(&self, plan: &PlanTree) -> Result<Estimate, EstimateError> {
        let tree = self.featurizer.encode_tree(plan)?;
        let fwd = self.model.forward_recursive(&tree)?;
        Ok(self.denormalize(fwd.output))
    }

    /// Estimates for every sub-plan, in pre-order of the binarized plan.
    pub fn estimate_nodes(&self, plan: &PlanTree) -> Result<Vec<Estimate>, EstimateError> {
        let tree = self.featurizer.encode_tree(plan)?;
        let fwd = self.model.forward_recursive(&tree)?;
        fwd.states
            .iter()
            .map(|s| Ok(self.denormalize(self.model.heads(&s.r)?)))
            .collect()
    }

    /// Root estimate reusing pooled sub-plan states; every newly computed
    /// sub-plan is added to the pool.
    pub fn estimate_with_pool(&self, plan: &PlanTree, pool: &MemoryPool) -> Result<Estimate, EstimateError> {
        let binary;
        let root = if plan.is_binary() {
            &plan.root
        } else {
            binary = plan.clone().binarize();
            &binary.root
        };
        Ok(self.pooled(root, pool)?.estimate)
    }

    fn pooled(&self, node: &PlanNode, pool: &MemoryPool) -> Result<PoolEntry, EstimateError> {
        let digest = node.canonical_hash();
        if let Some(hit) = pool.get(&digest) {
            return Ok(hit);
        }
        let left = node.left().map(|c| self.pooled(c, pool)).transpose()?;
        let right = node.right().map(|c| self.pooled(c, pool)).transpose()?;
        let features = self.featurizer.encode_node(node)?;
        let state: RepresentationState<f32> = self.model.step(
            &features,
            left.as_ref().map(|e| &e.state),
            right.as_ref().map(|e| &e.state),
        )?;
        let estimate = self.denormalize(self.model.heads(&state.r)?);
        let entry = PoolEntry { state, estimate };
        pool.put(digest, entry.clone());
        Ok(entry)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            meta: CheckpointMeta {
                model: self.model.config,
                normalizer: self.normalizer,
                featurizer: self.featurizer.config,
                omega: self.omega,
                encoder: self.featurizer.encoder.name().to_string(),
            },
            model: self.model.clone(),
        }
    }

    /// Binds a checkpoint to a featurizer whose widths must match it.
    pub fn from_checkpoint(ck: Checkpoint, featurizer: Featurizer) -> Result<Self, EstimateError> {
        let cfg = ck.meta.model;
        let widths = (
            featurizer.op_width(),
            featurizer.meta_width(),
            featurizer.sample_width(),
            featurizer.leaf_width(),
        );
        let expected = (cfg.op_width, cfg.meta_width, cfg.sample_width, cfg.leaf_width);
        if widths != expected {
            return Err(EstimateError::Width { expected, got: widths });
        }
        Ok(Estimator {
            featurizer,
            model: ck.model,
            normalizer: ck.meta.normalizer,
            omega: ck.meta.omega,
        })
    }
}
