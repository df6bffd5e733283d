use super::*;
use crate::featurizer::{EncodedPlanBatch, EncodedTree, NodeFeatures};
use crate::nn::grad_check;
use rand::Rng;

fn small_config() -> ModelConfig {
    let mut c = ModelConfig::new(14, 5, 6, 7);
    c.embed_dim = 3;
    c.hidden = 4;
    c.head_hidden = 3;
    c.seed = 9;
    c
}

fn random_leaf(rng: &mut ChaCha8Rng, width: usize) -> EncodedPredicate {
    EncodedPredicate::Leaf((0..width).map(|_| rng.random_range(-1.0f32..1.0)).collect())
}

fn random_predicate(rng: &mut ChaCha8Rng, width: usize, leaves: usize) -> EncodedPredicate {
    if leaves == 1 {
        return random_leaf(rng, width);
    }
    let split = rng.random_range(1..leaves);
    let a = Box::new(random_predicate(rng, width, split));
    let b = Box::new(random_predicate(rng, width, leaves - split));
    if rng.random_bool(0.5) {
        EncodedPredicate::And(a, b)
    } else {
        EncodedPredicate::Or(a, b)
    }
}

fn random_node(rng: &mut ChaCha8Rng, c: &ModelConfig) -> NodeFeatures {
    let mut op = vec![0.0; c.op_width];
    op[rng.random_range(0..c.op_width)] = 1.0;
    NodeFeatures {
        op,
        meta: (0..c.meta_width).map(|_| rng.random_range(0..2) as f32).collect(),
        sample: (0..c.sample_width).map(|_| rng.random_range(0..2) as f32).collect(),
        predicate: if rng.random_bool(0.6) {
            let n = rng.random_range(1..4);
            Some(random_predicate(rng, c.leaf_width, n))
        } else {
            None
        },
    }
}

/// Random binary tree with at most `max_depth` levels; unary nodes keep
/// an empty right child.
pub(crate) fn random_tree(rng: &mut ChaCha8Rng, c: &ModelConfig, max_depth: usize) -> EncodedTree {
    let mut t = EncodedTree {
        nodes: Vec::new(),
        left: Vec::new(),
        right: Vec::new(),
        labels: Vec::new(),
        digests: Vec::new(),
    };
    fn grow(rng: &mut ChaCha8Rng, c: &ModelConfig, t: &mut EncodedTree, depth: usize) -> usize {
        let i = t.nodes.len();
        t.nodes.push(random_node(rng, c));
        t.left.push(None);
        t.right.push(None);
        t.labels.push(None);
        t.digests.push(crate::plan::PlanDigest([0; 32]));
        if depth > 1 && rng.random_bool(0.7) {
            t.left[i] = Some(grow(rng, c, t, depth - 1));
            if rng.random_bool(0.7) {
                t.right[i] = Some(grow(rng, c, t, depth - 1));
            }
        }
        i
    }
    grow(rng, c, &mut t, max_depth);
    t
}

fn full_tree(rng: &mut ChaCha8Rng, c: &ModelConfig, depth: usize) -> EncodedTree {
    let mut t = random_tree(rng, c, 1);
    t.nodes.clear();
    t.left.clear();
    t.right.clear();
    t.labels.clear();
    t.digests.clear();
    fn grow(rng: &mut ChaCha8Rng, c: &ModelConfig, t: &mut EncodedTree, depth: usize) -> usize {
        let i = t.nodes.len();
        t.nodes.push(random_node(rng, c));
        t.left.push(None);
        t.right.push(None);
        t.labels.push(None);
        t.digests.push(crate::plan::PlanDigest([0; 32]));
        if depth > 1 {
            t.left[i] = Some(grow(rng, c, t, depth - 1));
            t.right[i] = Some(grow(rng, c, t, depth - 1));
        }
        i
    }
    grow(rng, c, &mut t, depth);
    t
}

#[test]
fn zero_params_give_midpoint_outputs() {
    let c = small_config();
    let m = TreeModel::<f64>::from_params(c, ModelParams::zeros(&c));
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let t = random_tree(&mut rng, &c, 3);
    let out = m.forward_recursive(&t).unwrap().output;
    assert_eq!(out.cost, 0.5);
    assert_eq!(out.card, 0.5);
    let norm = TargetNormalizer::fit([(1.0, 1.0), (1e4, 1e2)]);
    assert!((norm.denormalize_card(out.card) - 100.0).abs() < 1e-9);
}

#[test]
fn leaf_node_uses_zero_children() {
    let c = small_config();
    let m = TreeModel::<f64>::new(c);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let node = random_node(&mut rng, &c);
    let a = m.step(&node, None, None).unwrap();
    let zero = RepresentationState::zeros(c.hidden);
    let b = m.step(&node, Some(&zero), Some(&zero)).unwrap();
    assert_eq!(a, b);
    // Identical children average to either child.
    let s = m.step(&node, Some(&a), None).unwrap();
    let twin = m.step(&node, Some(&a), Some(&a)).unwrap();
    assert_ne!(s, twin);
    let half = RepresentationState {
        g: &a.g * 1.0,
        r: &a.r * 1.0,
    };
    assert_eq!(twin, m.step(&node, Some(&half), Some(&a)).unwrap());
}

#[test]
fn predicate_pooling_semantics() {
    let c = small_config();
    let m = TreeModel::<f64>::new(c);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let a = random_leaf(&mut rng, c.leaf_width);
    let b = random_leaf(&mut rng, c.leaf_width);
    let ea = m.embed_predicate(&a).unwrap();
    let eb = m.embed_predicate(&b).unwrap();
    // Single leaf: plain affine map.
    if let EncodedPredicate::Leaf(v) = &a {
        let x: Array1<f64> = v.iter().map(|&x| x as f64).collect();
        let want = m.params.leaf.w.dot(&x) + &m.params.leaf.b;
        assert!((&want - &ea).iter().all(|d| d.abs() < 1e-12));
    }
    let same = EncodedPredicate::And(Box::new(a.clone()), Box::new(a.clone()));
    assert_eq!(m.embed_predicate(&same).unwrap(), ea);
    let and = m
        .embed_predicate(&EncodedPredicate::And(Box::new(a.clone()), Box::new(b.clone())))
        .unwrap();
    let or = m.embed_predicate(&EncodedPredicate::Or(Box::new(a), Box::new(b))).unwrap();
    for i in 0..c.embed_dim {
        assert_eq!(and[i], ea[i].min(eb[i]));
        assert_eq!(or[i], ea[i].max(eb[i]));
        assert!(and[i] <= or[i]);
    }
}

#[test]
fn batched_equals_recursive() {
    let c = small_config();
    let m = TreeModel::<f64>::new(c);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let trees: Vec<EncodedTree> = (0..20).map(|_| random_tree(&mut rng, &c, 5)).collect();
    let batch = EncodedPlanBatch::new(trees.clone());
    let fwd = m.forward_batch(&batch).unwrap();
    for (i, t) in trees.iter().enumerate() {
        let rec = m.forward_recursive(t).unwrap();
        assert!((rec.output.cost - fwd.outputs[i].cost).abs() < 1e-12);
        assert!((rec.output.card - fwd.outputs[i].card).abs() < 1e-12);
    }
    // Every node's state matches, not only the roots.
    for (l, level) in batch.levels.iter().enumerate() {
        let (g, r) = fwd.level_states(l);
        for (row, &(t, n)) in level.members.iter().enumerate() {
            let rec = m.forward_recursive(&trees[t]).unwrap();
            for k in 0..c.hidden {
                assert!((rec.states[n].g[k] - g[[row, k]]).abs() < 1e-12);
                assert!((rec.states[n].r[k] - r[[row, k]]).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn cell_invocation_counts() {
    let c = small_config();
    let m = TreeModel::<f32>::new(c);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let trees: Vec<EncodedTree> = (0..4).map(|_| full_tree(&mut rng, &c, 3)).collect();
    m.reset_cell_invocations();
    m.forward_batch(&EncodedPlanBatch::new(trees.clone())).unwrap();
    assert_eq!(m.cell_invocations(), 3);
    m.reset_cell_invocations();
    for t in &trees {
        m.forward_recursive(t).unwrap();
    }
    assert_eq!(m.cell_invocations(), 4 * 7);
}

#[test]
fn batched_gradient_equals_sum_of_recursive() {
    let c = small_config();
    let m = TreeModel::<f64>::new(c);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let trees: Vec<EncodedTree> = (0..8).map(|_| random_tree(&mut rng, &c, 4)).collect();
    let targets: Vec<(f64, f64)> = (0..8).map(|_| (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0))).collect();
    let batch = EncodedPlanBatch::new(trees.clone());
    let (_, batched) = m.loss_and_grad(&batch, &targets, 2.0).unwrap();
    let mut summed = ModelParams::zeros(&c);
    for (t, &target) in trees.iter().zip(&targets) {
        let fwd = m.forward_recursive(t).unwrap();
        let (_, dc, dk) = TreeModel::loss_terms(&[fwd.output], &[target], 2.0);
        // Per-example gradients of the batch mean.
        m.backward_recursive(t, &fwd, dc[0] / 8.0, dk[0] / 8.0, &mut summed);
    }
    for (a, b) in batched.flatten().iter().zip(summed.flatten()) {
        assert!((a - b).abs() < 1e-10);
    }
}

#[test]
fn full_model_gradient_check() {
    let c = small_config();
    let m = TreeModel::<f64>::new(c);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let trees: Vec<EncodedTree> = (0..3).map(|_| random_tree(&mut rng, &c, 3)).collect();
    let targets = vec![(0.2, 0.9), (0.7, 0.1), (0.5, 0.5)];
    let batch = EncodedPlanBatch::new(trees);
    let (_, grad) = m.loss_and_grad(&batch, &targets, 0.5).unwrap();
    let theta = m.params.flatten();
    let mut probe = m.clone();
    let err = grad_check(
        |x| {
            probe.params.load_flat(x);
            probe.loss_and_grad(&batch, &targets, 0.5).unwrap().0
        },
        &theta,
        &grad.flatten(),
        1e-4,
    );
    assert!(err < 1e-4, "max relative error {err}");
}

#[test]
fn loss_arithmetic() {
    let (l, _, _) = TreeModel::<f64>::loss_terms(
        &[HeadOutput { cost: 0.4, card: 0.7 }],
        &[(0.4, 0.7)],
        3.0,
    );
    assert!((l - 4.0).abs() < 1e-12);
    // One example, omega 0.5, cost q 2, card q 3.
    let eps = LOSS_EPSILON;
    let t = |q: f64, base: f64| ((eps + (1.0 - eps) * base) * q - eps) / (1.0 - eps);
    let (l, _, _) = TreeModel::<f64>::loss_terms(
        &[HeadOutput {
            cost: t(2.0, 0.2),
            card: t(3.0, 0.1),
        }],
        &[(0.2, 0.1)],
        0.5,
    );
    assert!((l - 4.0).abs() < 1e-9);
}

#[test]
fn overfits_a_fixed_batch() {
    let mut c = small_config();
    c.hidden = 8;
    c.embed_dim = 6;
    let mut m = TreeModel::<f32>::new(c);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let trees: Vec<EncodedTree> = (0..64).map(|_| random_tree(&mut rng, &c, 3)).collect();
    let targets: Vec<(f32, f32)> = (0..64).map(|_| (rng.random_range(0.1..0.9), rng.random_range(0.1..0.9))).collect();
    let batch = EncodedPlanBatch::new(trees);
    let mut adam = crate::nn::Adam::new(1e-3f32);
    let mut last = f32::INFINITY;
    for _ in 0..50 {
        let (loss, grad) = m.loss_and_grad(&batch, &targets, 1.0).unwrap();
        assert!(loss < last, "loss went up: {loss} after {last}");
        last = loss;
        let g: Vec<Vec<f32>> = grad.named().into_iter().map(|(_, s)| s.to_vec()).collect();
        let gs: Vec<&[f32]> = g.iter().map(Vec::as_slice).collect();
        adam.step(&mut m.params.slices_mut(), &gs);
    }
}

#[test]
fn head_monotone_in_output_weight() {
    // One hidden unit with positive activation: the output rises with its weight.
    let mut c = small_config();
    c.head_hidden = 1;
    let mut m = TreeModel::<f64>::new(c);
    m.params.cost_hidden.b.fill(1.0);
    m.params.cost_hidden.w.fill(0.0);
    let r = Array1::from_elem(c.hidden, 0.3);
    let mut prev = 0.0;
    for w in [-2.0, -1.0, 0.0, 1.0, 2.0] {
        m.params.cost_out.w.fill(w);
        let out = m.heads(&r).unwrap();
        assert!(out.cost > prev && out.cost < 1.0);
        prev = out.cost;
    }
}

