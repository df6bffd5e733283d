//! The estimator: embedding layer, tree-structured representation layer
//! and the cost and cardinality heads.
//!
//! A node's input `E` is `[relu(O W_o + b_o), relu(M W_m + b_m),
//! relu(B W_b + b_b), pred]`, where `pred` min-pools (AND) or max-pools
//! (OR) the affine leaf embeddings of the predicate tree, or is zero when
//! the node has no predicate. Child states are averaged before the cell,
//! a missing child counting as zeros.

pub mod checkpoint;
pub mod metrics;
pub mod normalize;

use std::sync::atomic::{AtomicU64, Ordering};

use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::featurizer::{EncodedPlanBatch, EncodedPredicate, EncodedTree, NodeFeatures};
use crate::nn::{pool_backward, pool_pair, Activation, CellCache, Dense, LstmCell, NnError, ParamSet, PoolMode, Real};

pub use metrics::{qerror, Metrics, MetricsError};
pub use normalize::TargetNormalizer;

/// Floor applied to normalized values before taking q-error ratios.
pub const LOSS_EPSILON: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub op_width: usize,
    pub meta_width: usize,
    pub sample_width: usize,
    pub leaf_width: usize,
    pub embed_dim: usize,
    pub hidden: usize,
    pub head_hidden: usize,
    /// Applies ReLU to predicate leaf embeddings. Off by default.
    pub leaf_activation: bool,
    pub seed: u64,
}

impl ModelConfig {
    pub fn new(op_width: usize, meta_width: usize, sample_width: usize, leaf_width: usize) -> Self {
        ModelConfig {
            op_width,
            meta_width,
            sample_width,
            leaf_width,
            embed_dim: 64,
            hidden: 128,
            head_hidden: 64,
            leaf_activation: false,
            seed: 42,
        }
    }

    pub fn for_featurizer(f: &crate::featurizer::Featurizer) -> Self {
        ModelConfig::new(f.op_width(), f.meta_width(), f.sample_width(), f.leaf_width())
    }

    pub fn input_width(&self) -> usize {
        4 * self.embed_dim
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<F> {
    pub op: Dense<F>,
    pub meta: Dense<F>,
    pub sample: Dense<F>,
    pub leaf: Dense<F>,
    pub cell: LstmCell<F>,
    pub cost_hidden: Dense<F>,
    pub cost_out: Dense<F>,
    pub card_hidden: Dense<F>,
    pub card_out: Dense<F>,
}

impl<F: Real> ModelParams<F> {
    pub fn init(cfg: &ModelConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let d = cfg.embed_dim;
        ModelParams {
            op: Dense::init(cfg.op_width, d, &mut rng),
            meta: Dense::init(cfg.meta_width, d, &mut rng),
            sample: Dense::init(cfg.sample_width, d, &mut rng),
            leaf: Dense::init(cfg.leaf_width, d, &mut rng),
            cell: LstmCell::init(cfg.input_width(), cfg.hidden, &mut rng),
            cost_hidden: Dense::init(cfg.hidden, cfg.head_hidden, &mut rng),
            cost_out: Dense::init(cfg.head_hidden, 1, &mut rng),
            card_hidden: Dense::init(cfg.hidden, cfg.head_hidden, &mut rng),
            card_out: Dense::init(cfg.head_hidden, 1, &mut rng),
        }
    }

    pub fn zeros(cfg: &ModelConfig) -> Self {
        let d = cfg.embed_dim;
        ModelParams {
            op: Dense::zeros(cfg.op_width, d),
            meta: Dense::zeros(cfg.meta_width, d),
            sample: Dense::zeros(cfg.sample_width, d),
            leaf: Dense::zeros(cfg.leaf_width, d),
            cell: LstmCell::zeros(cfg.input_width(), cfg.hidden),
            cost_hidden: Dense::zeros(cfg.hidden, cfg.head_hidden),
            cost_out: Dense::zeros(cfg.head_hidden, 1),
            card_hidden: Dense::zeros(cfg.hidden, cfg.head_hidden),
            card_out: Dense::zeros(cfg.head_hidden, 1),
        }
    }

    pub fn cast<G: Real>(&self) -> ModelParams<G> {
        ModelParams {
            op: self.op.cast(),
            meta: self.meta.cast(),
            sample: self.sample.cast(),
            leaf: self.leaf.cast(),
            cell: self.cell.cast(),
            cost_hidden: self.cost_hidden.cast(),
            cost_out: self.cost_out.cast(),
            card_hidden: self.card_hidden.cast(),
            card_out: self.card_out.cast(),
        }
    }
}

impl<F: Real> ParamSet<F> for ModelParams<F> {
    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a [F])>) {
        self.op.visit(&format!("{prefix}embed.op."), out);
        self.meta.visit(&format!("{prefix}embed.meta."), out);
        self.sample.visit(&format!("{prefix}embed.sample."), out);
        self.leaf.visit(&format!("{prefix}embed.leaf."), out);
        self.cell.visit(&format!("{prefix}cell."), out);
        self.cost_hidden.visit(&format!("{prefix}head.cost_hidden."), out);
        self.cost_out.visit(&format!("{prefix}head.cost_out."), out);
        self.card_hidden.visit(&format!("{prefix}head.card_hidden."), out);
        self.card_out.visit(&format!("{prefix}head.card_out."), out);
    }

    fn visit_mut<'a>(&'a mut self, out: &mut Vec<&'a mut [F]>) {
        self.op.visit_mut(out);
        self.meta.visit_mut(out);
        self.sample.visit_mut(out);
        self.leaf.visit_mut(out);
        self.cell.visit_mut(out);
        self.cost_hidden.visit_mut(out);
        self.cost_out.visit_mut(out);
        self.card_hidden.visit_mut(out);
        self.card_out.visit_mut(out);
    }
}

/// Long memory `G` and representation `R` of one node.
#[derive(Debug, Clone, PartialEq)]
pub struct RepresentationState<F = f32> {
    pub g: Array1<F>,
    pub r: Array1<F>,
}

impl<F: Real> RepresentationState<F> {
    pub fn zeros(h: usize) -> Self {
        RepresentationState {
            g: Array1::zeros(h),
            r: Array1::zeros(h),
        }
    }
}

/// Normalized head outputs, both in `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeadOutput<F> {
    pub cost: F,
    pub card: F,
}

/// Route of the pooling tree: which leaf row, or which side each
/// coordinate came from.
#[derive(Debug, Clone)]
enum PoolTrace {
    Leaf(usize),
    Node {
        left: Box<PoolTrace>,
        right: Box<PoolTrace>,
        mask: Vec<bool>,
    },
}

#[derive(Debug, Clone)]
struct EmbedCache<F> {
    o_x: Array2<F>,
    o_y: Array2<F>,
    m_x: Array2<F>,
    m_y: Array2<F>,
    b_x: Array2<F>,
    b_y: Array2<F>,
    leaf_x: Array2<F>,
    leaf_y: Array2<F>,
    traces: Vec<Option<PoolTrace>>,
    e: Array2<F>,
}

#[derive(Debug, Clone)]
struct HeadCache<F> {
    r: Array2<F>,
    cost_h: Array2<F>,
    cost_y: Array2<F>,
    card_h: Array2<F>,
    card_y: Array2<F>,
}

#[derive(Debug, Clone)]
struct LevelCache<F> {
    embed: EmbedCache<F>,
    cell: CellCache<F>,
    g: Array2<F>,
    r: Array2<F>,
}

/// Forward pass over a level-wise batch, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct BatchForward<F> {
    levels: Vec<LevelCache<F>>,
    heads: HeadCache<F>,
    /// One output per tree, in batch order.
    pub outputs: Vec<HeadOutput<F>>,
}

impl<F: Real> BatchForward<F> {
    /// States of every node of one level, row-aligned with `Level::members`.
    pub fn level_states(&self, level: usize) -> (&Array2<F>, &Array2<F>) {
        (&self.levels[level].g, &self.levels[level].r)
    }
}

#[derive(Debug, Clone)]
struct NodeCache<F> {
    embed: EmbedCache<F>,
    cell: CellCache<F>,
}

/// Per-node forward pass of one tree, kept for the recursive backward pass.
#[derive(Debug, Clone)]
pub struct TreeForward<F> {
    nodes: Vec<Option<NodeCache<F>>>,
    pub states: Vec<RepresentationState<F>>,
    heads: HeadCache<F>,
    pub output: HeadOutput<F>,
}

#[derive(Debug)]
pub struct TreeModel<F = f32> {
    pub config: ModelConfig,
    pub params: ModelParams<F>,
    cell_invocations: AtomicU64,
}

impl<F: Real> Clone for TreeModel<F> {
    fn clone(&self) -> Self {
        TreeModel {
            config: self.config,
            params: self.params.clone(),
            cell_invocations: AtomicU64::new(0),
        }
    }
}

fn to_matrix<F: Real>(rows: &[&[f32]], width: usize) -> Array2<F> {
    let mut m = Array2::zeros((rows.len(), width));
    for (i, r) in rows.iter().enumerate() {
        assert_eq!(r.len(), width, "feature width mismatch");
        for (j, &v) in r.iter().enumerate() {
            m[[i, j]] = F::from(v).unwrap();
        }
    }
    m
}

fn row_avg<F: Real>(next: Option<&Array2<F>>, left: &[i64], right: &[i64], h: usize) -> Array2<F> {
    let half = F::lit(0.5);
    let mut out = Array2::zeros((left.len(), h));
    if let Some(next) = next {
        for (i, (&l, &r)) in left.iter().zip(right).enumerate() {
            let mut row = out.row_mut(i);
            for idx in [l, r] {
                if idx >= 0 {
                    row.scaled_add(half, &next.row(idx as usize));
                }
            }
        }
    }
    out
}

/// Derivative of the q-error of normalized prediction `p` against target
/// `t`, both mapped to `(eps, 1]` first. Returns `(q, dq/dp)`.
pub fn qerror_normalized<F: Real>(p: F, t: F) -> (F, F) {
    let eps = F::lit(LOSS_EPSILON);
    let scale = F::one() - eps;
    let pe = eps + scale * p;
    let te = eps + scale * t;
    if pe >= te {
        (pe / te, scale / te)
    } else {
        (te / pe, -te / (pe * pe) * scale)
    }
}

impl<F: Real> TreeModel<F> {
    pub fn new(config: ModelConfig) -> Self {
        TreeModel::from_params(config, ModelParams::init(&config))
    }

    pub fn from_params(config: ModelConfig, params: ModelParams<F>) -> Self {
        TreeModel {
            config,
            params,
            cell_invocations: AtomicU64::new(0),
        }
    }

    pub fn cast<G: Real>(&self) -> TreeModel<G> {
        TreeModel::from_params(self.config, self.params.cast())
    }

    /// Number of cell evaluations since the last reset. A batched level
    /// counts once.
    pub fn cell_invocations(&self) -> u64 {
        self.cell_invocations.load(Ordering::Relaxed)
    }

    pub fn reset_cell_invocations(&self) {
        self.cell_invocations.store(0, Ordering::Relaxed);
    }

    fn leaf_act(&self) -> Activation {
        if self.config.leaf_activation {
            Activation::Relu
        } else {
            Activation::Identity
        }
    }

    /// Embedding of a predicate tree alone.
    pub fn embed_predicate(&self, p: &EncodedPredicate) -> Result<Array1<F>, NnError> {
        let leaves = p.leaves();
        let x = to_matrix::<F>(&leaves, self.config.leaf_width);
        let y = self.params.leaf.forward(x.view(), self.leaf_act())?;
        let mut cursor = 0;
        Ok(Array1::from(pool_eval(p, &y, &mut cursor).0))
    }

    fn embed(&self, nodes: &[&NodeFeatures]) -> Result<EmbedCache<F>, NnError> {
        let c = &self.config;
        let p = &self.params;
        let o_x = to_matrix::<F>(&nodes.iter().map(|n| n.op.as_slice()).collect::<Vec<_>>(), c.op_width);
        let m_x = to_matrix::<F>(&nodes.iter().map(|n| n.meta.as_slice()).collect::<Vec<_>>(), c.meta_width);
        let b_x = to_matrix::<F>(
            &nodes.iter().map(|n| n.sample.as_slice()).collect::<Vec<_>>(),
            c.sample_width,
        );
        let o_y = p.op.forward(o_x.view(), Activation::Relu)?;
        let m_y = p.meta.forward(m_x.view(), Activation::Relu)?;
        let b_y = p.sample.forward(b_x.view(), Activation::Relu)?;

        let mut leaf_rows: Vec<&[f32]> = Vec::new();
        for n in nodes {
            if let Some(pred) = &n.predicate {
                leaf_rows.extend(pred.leaves());
            }
        }
        let leaf_x = to_matrix::<F>(&leaf_rows, c.leaf_width);
        let leaf_y = if leaf_rows.is_empty() {
            Array2::zeros((0, c.embed_dim))
        } else {
            p.leaf.forward(leaf_x.view(), self.leaf_act())?
        };
        let mut pred = Array2::zeros((nodes.len(), c.embed_dim));
        let mut traces = Vec::with_capacity(nodes.len());
        let mut cursor = 0;
        for (i, n) in nodes.iter().enumerate() {
            match &n.predicate {
                Some(tree) => {
                    let (v, trace) = pool_eval(tree, &leaf_y, &mut cursor);
                    pred.row_mut(i).assign(&Array1::from(v));
                    traces.push(Some(trace));
                }
                None => traces.push(None),
            }
        }
        let e = concatenate(Axis(1), &[o_y.view(), m_y.view(), b_y.view(), pred.view()]).expect("equal rows");
        Ok(EmbedCache {
            o_x,
            o_y,
            m_x,
            m_y,
            b_x,
            b_y,
            leaf_x,
            leaf_y,
            traces,
            e,
        })
    }

    fn embed_backward(&self, c: &EmbedCache<F>, de: ArrayView2<F>, grad: &mut ModelParams<F>) {
        let d = self.config.embed_dim;
        let p = &self.params;
        p.op.backward(c.o_x.view(), c.o_y.view(), Activation::Relu, de.slice(s![.., 0..d]), &mut grad.op);
        p.meta
            .backward(c.m_x.view(), c.m_y.view(), Activation::Relu, de.slice(s![.., d..2 * d]), &mut grad.meta);
        p.sample.backward(
            c.b_x.view(),
            c.b_y.view(),
            Activation::Relu,
            de.slice(s![.., 2 * d..3 * d]),
            &mut grad.sample,
        );
        if c.leaf_y.nrows() == 0 {
            return;
        }
        let mut dleaf = Array2::zeros(c.leaf_y.dim());
        for (i, trace) in c.traces.iter().enumerate() {
            if let Some(t) = trace {
                let drow: Vec<F> = de.slice(s![i, 3 * d..4 * d]).to_vec();
                pool_route(t, drow, &mut dleaf);
            }
        }
        p.leaf
            .backward(c.leaf_x.view(), c.leaf_y.view(), self.leaf_act(), dleaf.view(), &mut grad.leaf);
    }

    fn heads_forward(&self, r: Array2<F>) -> Result<HeadCache<F>, NnError> {
        let p = &self.params;
        let cost_h = p.cost_hidden.forward(r.view(), Activation::Relu)?;
        let cost_y = p.cost_out.forward(cost_h.view(), Activation::Sigmoid)?;
        let card_h = p.card_hidden.forward(r.view(), Activation::Relu)?;
        let card_y = p.card_out.forward(card_h.view(), Activation::Sigmoid)?;
        Ok(HeadCache {
            r,
            cost_h,
            cost_y,
            card_h,
            card_y,
        })
    }

    /// Returns `dL/dR` given gradients on the two sigmoid outputs.
    fn heads_backward(&self, c: &HeadCache<F>, dcost: &[F], dcard: &[F], grad: &mut ModelParams<F>) -> Array2<F> {
        let p = &self.params;
        let n = dcost.len();
        let dcost = Array2::from_shape_vec((n, 1), dcost.to_vec()).unwrap();
        let dcard = Array2::from_shape_vec((n, 1), dcard.to_vec()).unwrap();
        let dch = p
            .cost_out
            .backward(c.cost_h.view(), c.cost_y.view(), Activation::Sigmoid, dcost.view(), &mut grad.cost_out);
        let mut dr = p
            .cost_hidden
            .backward(c.r.view(), c.cost_h.view(), Activation::Relu, dch.view(), &mut grad.cost_hidden);
        let dkh = p
            .card_out
            .backward(c.card_h.view(), c.card_y.view(), Activation::Sigmoid, dcard.view(), &mut grad.card_out);
        dr += &p
            .card_hidden
            .backward(c.r.view(), c.card_h.view(), Activation::Relu, dkh.view(), &mut grad.card_hidden);
        dr
    }

    fn outputs_of(heads: &HeadCache<F>) -> Vec<HeadOutput<F>> {
        (0..heads.r.nrows())
            .map(|i| HeadOutput {
                cost: heads.cost_y[[i, 0]],
                card: heads.card_y[[i, 0]],
            })
            .collect()
    }

    /// Normalized estimates from any node's representation.
    pub fn heads(&self, r: &Array1<F>) -> Result<HeadOutput<F>, NnError> {
        let m = r.clone().insert_axis(Axis(0));
        let c = self.heads_forward(m)?;
        Ok(Self::outputs_of(&c)[0])
    }

    /// Level-wise forward pass: one cell invocation per level.
    pub fn forward_batch(&self, batch: &EncodedPlanBatch) -> Result<BatchForward<F>, NnError> {
        let h = self.config.hidden;
        let mut levels: Vec<Option<LevelCache<F>>> = vec![None; batch.depth()];
        for l in (0..batch.depth()).rev() {
            let level = &batch.levels[l];
            let nodes: Vec<&NodeFeatures> = level.members.iter().map(|&(t, n)| batch.features(t, n)).collect();
            let embed = self.embed(&nodes)?;
            let next = levels.get(l + 1).and_then(Option::as_ref);
            let g_prev = row_avg(next.map(|c| &c.g), &level.left, &level.right, h);
            let r_prev = row_avg(next.map(|c| &c.r), &level.left, &level.right, h);
            let (g, r, cell) = self.params.cell.forward(embed.e.view(), g_prev.view(), r_prev.view())?;
            self.cell_invocations.fetch_add(1, Ordering::Relaxed);
            levels[l] = Some(LevelCache { embed, cell, g, r });
        }
        let levels: Vec<LevelCache<F>> = levels.into_iter().map(|c| c.expect("every level computed")).collect();
        let heads = self.heads_forward(levels[0].r.clone())?;
        for c in [&heads.cost_y, &heads.card_y] {
            crate::nn::check_finite(c, "head output")?;
        }
        let outputs = Self::outputs_of(&heads);
        Ok(BatchForward { levels, heads, outputs })
    }

    /// Gradients for per-tree output gradients `(dcost, dcard)`.
    pub fn backward_batch(
        &self,
        batch: &EncodedPlanBatch,
        fwd: &BatchForward<F>,
        dcost: &[F],
        dcard: &[F],
        grad: &mut ModelParams<F>,
    ) {
        let h = self.config.hidden;
        let mut dr = self.heads_backward(&fwd.heads, dcost, dcard, grad);
        let mut dg = Array2::zeros(dr.dim());
        let half = F::lit(0.5);
        for l in 0..batch.depth() {
            let cache = &fwd.levels[l];
            let (dx, dg_prev, dr_prev) = self.params.cell.backward(&cache.cell, dg.view(), dr.view(), &mut grad.cell);
            self.embed_backward(&cache.embed, dx.view(), grad);
            if l + 1 == batch.depth() {
                break;
            }
            let n_next = batch.levels[l + 1].members.len();
            let mut next_dg = Array2::zeros((n_next, h));
            let mut next_dr = Array2::zeros((n_next, h));
            let level = &batch.levels[l];
            for i in 0..level.members.len() {
                for idx in [level.left[i], level.right[i]] {
                    if idx >= 0 {
                        next_dg.row_mut(idx as usize).scaled_add(half, &dg_prev.row(i));
                        next_dr.row_mut(idx as usize).scaled_add(half, &dr_prev.row(i));
                    }
                }
            }
            dg = next_dg;
            dr = next_dr;
        }
    }

    /// One node from its features and child states: one cell invocation.
    pub fn step(
        &self,
        node: &NodeFeatures,
        left: Option<&RepresentationState<F>>,
        right: Option<&RepresentationState<F>>,
    ) -> Result<RepresentationState<F>, NnError> {
        let (st, _) = self.step_cached(node, left, right)?;
        Ok(st)
    }

    fn step_cached(
        &self,
        node: &NodeFeatures,
        left: Option<&RepresentationState<F>>,
        right: Option<&RepresentationState<F>>,
    ) -> Result<(RepresentationState<F>, NodeCache<F>), NnError> {
        let h = self.config.hidden;
        let embed = self.embed(&[node])?;
        let half = F::lit(0.5);
        let mut g_prev = Array2::zeros((1, h));
        let mut r_prev = Array2::zeros((1, h));
        for child in [left, right].into_iter().flatten() {
            g_prev.row_mut(0).scaled_add(half, &child.g);
            r_prev.row_mut(0).scaled_add(half, &child.r);
        }
        let (g, r, cell) = self.params.cell.forward(embed.e.view(), g_prev.view(), r_prev.view())?;
        self.cell_invocations.fetch_add(1, Ordering::Relaxed);
        let st = RepresentationState {
            g: g.row(0).to_owned(),
            r: r.row(0).to_owned(),
        };
        Ok((st, NodeCache { embed, cell }))
    }

    /// Node-by-node forward pass over one tree: one cell invocation per node.
    pub fn forward_recursive(&self, tree: &EncodedTree) -> Result<TreeForward<F>, NnError> {
        let n = tree.len();
        let mut nodes: Vec<Option<NodeCache<F>>> = vec![None; n];
        let mut states: Vec<Option<RepresentationState<F>>> = vec![None; n];
        self.visit(tree, 0, &mut nodes, &mut states)?;
        let states: Vec<RepresentationState<F>> = states.into_iter().map(|s| s.expect("visited")).collect();
        let heads = self.heads_forward(states[0].r.clone().insert_axis(Axis(0)))?;
        let output = Self::outputs_of(&heads)[0];
        Ok(TreeForward {
            nodes,
            states,
            heads,
            output,
        })
    }

    fn visit(
        &self,
        tree: &EncodedTree,
        i: usize,
        caches: &mut Vec<Option<NodeCache<F>>>,
        states: &mut Vec<Option<RepresentationState<F>>>,
    ) -> Result<(), NnError> {
        for c in [tree.left[i], tree.right[i]].into_iter().flatten() {
            self.visit(tree, c, caches, states)?;
        }
        let left = tree.left[i].and_then(|c| states[c].clone());
        let right = tree.right[i].and_then(|c| states[c].clone());
        let (st, cache) = self.step_cached(&tree.nodes[i], left.as_ref(), right.as_ref())?;
        states[i] = Some(st);
        caches[i] = Some(cache);
        Ok(())
    }

    /// Recursive counterpart of [`TreeModel::backward_batch`] for one tree.
    pub fn backward_recursive(
        &self,
        tree: &EncodedTree,
        fwd: &TreeForward<F>,
        dcost: F,
        dcard: F,
        grad: &mut ModelParams<F>,
    ) {
        let dr = self.heads_backward(&fwd.heads, &[dcost], &[dcard], grad);
        let dg = Array2::zeros(dr.dim());
        self.node_backward(tree, fwd, 0, dg, dr, grad);
    }

    fn node_backward(
        &self,
        tree: &EncodedTree,
        fwd: &TreeForward<F>,
        i: usize,
        dg: Array2<F>,
        dr: Array2<F>,
        grad: &mut ModelParams<F>,
    ) {
        let cache = fwd.nodes[i].as_ref().expect("forward pass visited every node");
        let (dx, dg_prev, dr_prev) = self.params.cell.backward(&cache.cell, dg.view(), dr.view(), &mut grad.cell);
        self.embed_backward(&cache.embed, dx.view(), grad);
        let half = F::lit(0.5);
        for c in [tree.left[i], tree.right[i]].into_iter().flatten() {
            self.node_backward(tree, fwd, c, &dg_prev * half, &dr_prev * half, grad);
        }
    }

    /// Mean of `omega * q_cost + q_card` over the batch, with its gradients
    /// with respect to each tree's outputs. Targets are `(cost, card)`
    /// normalized to `[0, 1]`.
    pub fn loss_terms(outputs: &[HeadOutput<F>], targets: &[(F, F)], omega: F) -> (F, Vec<F>, Vec<F>) {
        let n = F::from(outputs.len()).unwrap();
        let mut total = F::zero();
        let mut dcost = Vec::with_capacity(outputs.len());
        let mut dcard = Vec::with_capacity(outputs.len());
        for (o, &(tc, tk)) in outputs.iter().zip(targets) {
            let (qc, gc) = qerror_normalized(o.cost, tc);
            let (qk, gk) = qerror_normalized(o.card, tk);
            total += omega * qc + qk;
            dcost.push(omega * gc / n);
            dcard.push(gk / n);
        }
        (total / n, dcost, dcard)
    }

    /// Loss and parameter gradients over a batch.
    pub fn loss_and_grad(
        &self,
        batch: &EncodedPlanBatch,
        targets: &[(F, F)],
        omega: F,
    ) -> Result<(F, ModelParams<F>), NnError> {
        let fwd = self.forward_batch(batch)?;
        let (loss, dcost, dcard) = Self::loss_terms(&fwd.outputs, targets, omega);
        if !loss.is_finite() {
            return Err(NnError::NonFinite("loss"));
        }
        let mut grad = ModelParams::zeros(&self.config);
        self.backward_batch(batch, &fwd, &dcost, &dcard, &mut grad);
        Ok((loss, grad))
    }

    /// Head outputs for a batch.
    pub fn predict(&self, batch: &EncodedPlanBatch) -> Result<Vec<HeadOutput<F>>, NnError> {
        Ok(self.forward_batch(batch)?.outputs)
    }
}

fn pool_eval<F: Real>(p: &EncodedPredicate, leaf_y: &Array2<F>, cursor: &mut usize) -> (Vec<F>, PoolTrace) {
    match p {
        EncodedPredicate::Leaf(_) => {
            let i = *cursor;
            *cursor += 1;
            (leaf_y.row(i).to_vec(), PoolTrace::Leaf(i))
        }
        EncodedPredicate::And(a, b) | EncodedPredicate::Or(a, b) => {
            let mode = if matches!(p, EncodedPredicate::And(..)) {
                PoolMode::Min
            } else {
                PoolMode::Max
            };
            let (va, ta) = pool_eval(a, leaf_y, cursor);
            let (vb, tb) = pool_eval(b, leaf_y, cursor);
            let (v, mask) = pool_pair(&va, &vb, mode);
            (
                v,
                PoolTrace::Node {
                    left: Box::new(ta),
                    right: Box::new(tb),
                    mask,
                },
            )
        }
    }
}

fn pool_route<F: Real>(t: &PoolTrace, d: Vec<F>, dleaf: &mut Array2<F>) {
    match t {
        PoolTrace::Leaf(i) => {
            for (dst, v) in dleaf.row_mut(*i).iter_mut().zip(d) {
                *dst += v;
            }
        }
        PoolTrace::Node { left, right, mask } => {
            let (da, db) = pool_backward(&d, mask);
            pool_route(left, da, dleaf);
            pool_route(right, db, dleaf);
        }
    }
}

#[cfg(test)]
mod tests;
