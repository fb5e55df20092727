//! Running inputs through the tree: sampled and greedy routing, prediction,
//! and exact enumeration over all root-to-leaf paths for small trees.

use crate::data::Dataset;
use crate::error::{RdtError, Result};
use crate::loss::{predict_class, LabelVector, Loss};
use crate::math;
use crate::model::RdtModel;
use crate::policy::{greedy_route, sample_route, RouteRecord};
use crate::rng::SplitRng;
use crate::tree::{Trajectory, ROOT};
use alloc::vec::Vec;

/// Largest leaf count the enumeration oracles accept.
pub const ENUMERATION_LEAF_LIMIT: usize = 10_000;

/// How a prediction routes through the tree.
pub enum RouteMode<'a> {
    /// Follow the highest-probability child at every node (ties go to the
    /// lowest child index). Deterministic.
    Greedy,
    /// Sample every step from the routing distributions.
    Stochastic(&'a mut SplitRng),
}

/// Output of a single prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// Score vector of the reached leaf.
    pub alpha: Vec<f64>,
    /// Argmax of `alpha`.
    pub class: usize,
    pub trajectory: Trajectory,
    /// Number of routing distributions evaluated: the tree depth, not the
    /// class count.
    pub policy_evals: usize,
}

fn record_to_trajectory(record: &RouteRecord) -> Trajectory {
    let mut nodes = Vec::with_capacity(record.steps.len() + 1);
    let mut step_probs = Vec::with_capacity(record.steps.len());
    nodes.push(ROOT);
    for step in &record.steps {
        nodes.push(step.dist.children[step.chosen_idx]);
        step_probs.push(step.dist.probs[step.chosen_idx]);
    }
    Trajectory { nodes, step_probs }
}

/// Samples a root-to-leaf trajectory, recording each step's probability.
pub fn sample_trajectory(model: &RdtModel, x: &[f64], rng: &mut SplitRng) -> Result<Trajectory> {
    Ok(record_to_trajectory(&sample_route(model, x, rng)?))
}

/// Follows the highest-probability child at every node.
pub fn greedy_trajectory(model: &RdtModel, x: &[f64]) -> Result<Trajectory> {
    Ok(record_to_trajectory(&greedy_route(model, x)?))
}

/// Routes `x` to a leaf and returns that leaf's scores, the predicted class,
/// the trajectory taken, and the number of policy evaluations spent.
pub fn predict(model: &RdtModel, x: &[f64], mode: RouteMode<'_>) -> Result<Prediction> {
    let record = match mode {
        RouteMode::Greedy => greedy_route(model, x)?,
        RouteMode::Stochastic(rng) => sample_route(model, x, rng)?,
    };
    let alpha = model.alpha(record.leaf)?.to_vec();
    let class = predict_class(&alpha)?;
    let policy_evals = record.steps.len();
    Ok(Prediction { alpha, class, trajectory: record_to_trajectory(&record), policy_evals })
}

fn check_enumerable(model: &RdtModel) -> Result<()> {
    let leaves = model.topology().leaf_count();
    if leaves > ENUMERATION_LEAF_LIMIT {
        return Err(RdtError::TreeTooLarge { leaves, limit: ENUMERATION_LEAF_LIMIT });
    }
    Ok(())
}

fn enumerate_from(
    model: &RdtModel,
    x: &[f64],
    node: usize,
    nodes: &mut Vec<usize>,
    probs: &mut Vec<f64>,
    prob_acc: f64,
    out: &mut Vec<(Trajectory, f64)>,
) -> Result<()> {
    if model.topology().is_leaf(node) {
        out.push((
            Trajectory { nodes: nodes.clone(), step_probs: probs.clone() },
            prob_acc,
        ));
        return Ok(());
    }
    let dist = crate::policy::child_distribution(model, node, x)?;
    for (child, p) in dist.children.iter().zip(&dist.probs) {
        nodes.push(*child);
        probs.push(*p);
        enumerate_from(model, x, *child, nodes, probs, prob_acc * p, out)?;
        nodes.pop();
        probs.pop();
    }
    Ok(())
}

/// Every root-to-leaf trajectory with its probability, one entry per leaf in
/// left-to-right order. Guarded by [`ENUMERATION_LEAF_LIMIT`].
pub fn enumerate_paths(model: &RdtModel, x: &[f64]) -> Result<Vec<(Trajectory, f64)>> {
    check_enumerable(model)?;
    let mut out = Vec::with_capacity(model.topology().leaf_count());
    let mut nodes = alloc::vec![ROOT];
    let mut probs = Vec::new();
    enumerate_from(model, x, ROOT, &mut nodes, &mut probs, 1.0, &mut out)?;
    Ok(out)
}

/// Exact expected terminal loss on one example: the probability-weighted sum
/// of leaf losses over all paths.
pub fn exact_expected_loss(
    model: &RdtModel,
    x: &[f64],
    y: &LabelVector,
    loss: Loss,
) -> Result<f64> {
    let paths = enumerate_paths(model, x)?;
    let mut total = 0.0;
    for (trajectory, prob) in &paths {
        total += prob * loss.value(model.alpha(trajectory.leaf())?, y)?;
    }
    Ok(total)
}

/// Fraction of examples whose greedy prediction matches the label.
pub fn greedy_accuracy(model: &RdtModel, dataset: &Dataset) -> Result<f64> {
    if dataset.is_empty() {
        return Err(RdtError::InvalidParameter("cannot evaluate on an empty dataset".into()));
    }
    let mut correct = 0usize;
    for ex in &dataset.examples {
        if predict(model, &ex.x, RouteMode::Greedy)?.class == ex.class {
            correct += 1;
        }
    }
    Ok(correct as f64 / dataset.len() as f64)
}

/// Accuracy under sampled routing: `samples` full passes over the dataset,
/// returning the mean accuracy and its standard error across passes.
pub fn stochastic_accuracy(
    model: &RdtModel,
    dataset: &Dataset,
    samples: usize,
    rng: &mut SplitRng,
) -> Result<(f64, f64)> {
    if samples < 1 {
        return Err(RdtError::InvalidParameter("need at least one sampling pass".into()));
    }
    if dataset.is_empty() {
        return Err(RdtError::InvalidParameter("cannot evaluate on an empty dataset".into()));
    }
    let mut accs = Vec::with_capacity(samples);
    for _ in 0..samples {
        let mut correct = 0usize;
        for ex in &dataset.examples {
            if predict(model, &ex.x, RouteMode::Stochastic(rng))?.class == ex.class {
                correct += 1;
            }
        }
        accs.push(correct as f64 / dataset.len() as f64);
    }
    let mean = accs.iter().sum::<f64>() / samples as f64;
    let se = if samples > 1 {
        let var =
            accs.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / (samples - 1) as f64;
        math::sqrt(var / samples as f64)
    } else {
        0.0
    };
    Ok((mean, se))
}
