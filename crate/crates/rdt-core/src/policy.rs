//! Per-node stochastic routing: softmax over affine child scores, sampling,
//! and the score-function gradient of a routing step.

use crate::error::{RdtError, Result};
use crate::math;
use crate::model::{RdtModel, ThetaBlock};
use crate::rng::SplitRng;
use crate::tree::Trajectory;
use alloc::vec::Vec;

/// Routing distribution of one internal node on one input: the probability
/// of moving to each child, in topology order.
#[derive(Debug, Clone, PartialEq)]
pub struct ChildDistribution {
    pub node_id: usize,
    /// Child node ids, ordered as in the topology.
    pub children: Vec<usize>,
    /// Probabilities aligned with `children`; they sum to 1.
    pub probs: Vec<f64>,
}

impl ChildDistribution {
    /// Child with the highest probability; ties go to the lowest index.
    pub fn greedy_child(&self) -> usize {
        self.children[greedy_index(&self.probs)]
    }
}

fn greedy_index(probs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate().skip(1) {
        if p > probs[best] {
            best = i;
        }
    }
    best
}

fn sample_index(probs: &[f64], rng: &mut SplitRng) -> usize {
    let u = rng.next_f64();
    let mut cum = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        cum += p;
        if u < cum {
            return i;
        }
    }
    // Rounding can leave cum marginally below 1.
    probs.len() - 1
}

/// One routing decision along a walk: the distribution evaluated at the node
/// and the index of the child that was taken.
#[derive(Debug, Clone)]
pub(crate) struct RouteStep {
    pub dist: ChildDistribution,
    pub chosen_idx: usize,
}

/// A full root-to-leaf walk.
#[derive(Debug, Clone)]
pub(crate) struct RouteRecord {
    pub steps: Vec<RouteStep>,
    pub leaf: usize,
}

/// Walks from the root to a leaf, delegating each choice to `choose` (which
/// returns a child index into the distribution).
pub(crate) fn route(
    model: &RdtModel,
    x: &[f64],
    mut choose: impl FnMut(&ChildDistribution) -> usize,
) -> Result<RouteRecord> {
    let mut node = crate::tree::ROOT;
    let mut steps = Vec::new();
    while !model.topology().is_leaf(node) {
        let dist = child_distribution(model, node, x)?;
        let chosen_idx = choose(&dist);
        node = dist.children[chosen_idx];
        steps.push(RouteStep { dist, chosen_idx });
    }
    Ok(RouteRecord { steps, leaf: node })
}

pub(crate) fn sample_route(model: &RdtModel, x: &[f64], rng: &mut SplitRng) -> Result<RouteRecord> {
    route(model, x, |dist| sample_index(&dist.probs, rng))
}

pub(crate) fn greedy_route(model: &RdtModel, x: &[f64]) -> Result<RouteRecord> {
    route(model, x, |dist| greedy_index(&dist.probs))
}

/// Score-function gradient of one routing step, given the distribution that
/// was evaluated there.
pub(crate) fn step_gradient_from_dist(
    dist: &ChildDistribution,
    chosen_idx: usize,
    x: &[f64],
) -> ThetaBlock {
    let mut grad = ThetaBlock::zeros(dist.children.len(), x.len());
    for (c, &p) in dist.probs.iter().enumerate() {
        let indicator = if c == chosen_idx { 1.0 } else { 0.0 };
        let coeff = indicator - p;
        for (g, &v) in grad.weight_row_mut(c).iter_mut().zip(x) {
            *g = coeff * v;
        }
        *grad.bias_mut(c) = coeff;
    }
    grad
}

fn check_input(model: &RdtModel, x: &[f64]) -> Result<()> {
    if x.len() != model.input_dim() {
        return Err(RdtError::DimensionMismatch {
            expected: model.input_dim(),
            got: x.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(RdtError::InvalidParameter("input vector holds a non-finite value".into()));
    }
    Ok(())
}

/// Softmax over the node's affine child scores, computed with max
/// subtraction so arbitrarily large scores stay finite.
pub fn child_distribution(model: &RdtModel, node_id: usize, x: &[f64]) -> Result<ChildDistribution> {
    check_input(model, x)?;
    let block = model.theta(node_id)?;
    let children = model.topology().children(node_id)?.to_vec();

    let scores: Vec<f64> = (0..children.len()).map(|c| block.score(c, x)).collect();
    let max = scores.iter().fold(f64::NEG_INFINITY, |m, &s| if s > m { s } else { m });
    let mut probs: Vec<f64> = scores.iter().map(|&s| math::exp(s - max)).collect();
    let total: f64 = probs.iter().sum();
    for p in probs.iter_mut() {
        *p /= total;
    }
    Ok(ChildDistribution { node_id, children, probs })
}

/// Draws one child according to the distribution. Deterministic given the
/// generator state.
pub fn sample_child(dist: &ChildDistribution, rng: &mut SplitRng) -> usize {
    dist.children[sample_index(&dist.probs, rng)]
}

/// Probability of a root-to-leaf trajectory: the product of the per-step
/// child probabilities, recomputed from the model.
pub fn trajectory_probability(model: &RdtModel, x: &[f64], trajectory: &Trajectory) -> Result<f64> {
    trajectory.validate(model.topology())?;
    let mut prob = 1.0;
    for pair in trajectory.nodes.windows(2) {
        let dist = child_distribution(model, pair[0], x)?;
        let idx = model.topology().child_index(pair[0], pair[1])?;
        prob *= dist.probs[idx];
    }
    Ok(prob)
}

/// Gradient of `log pi(chosen | node, x)` with respect to the node's own
/// routing block: `(1[c = chosen] - p_c) * x` for each child's weights and
/// `1[c = chosen] - p_c` for its bias. Every other node's block has zero
/// gradient.
pub fn log_prob_step_gradient(
    model: &RdtModel,
    node_id: usize,
    x: &[f64],
    chosen_child: usize,
) -> Result<ThetaBlock> {
    let dist = child_distribution(model, node_id, x)?;
    let chosen_idx = model.topology().child_index(node_id, chosen_child)?;
    Ok(step_gradient_from_dist(&dist, chosen_idx, x))
}
