//! Random Tree baseline: the same architecture with frozen, randomly
//! assigned one-hot leaf labels, so only the routing is trained.

use crate::data::Dataset;
use crate::error::{RdtError, Result};
use crate::loss::predict_class;
use crate::model::RdtModel;
use crate::rng::SplitRng;
use crate::train::{train, TrainConfig, TrainLog};
use crate::tree::TreeTopology;
use alloc::vec::Vec;

/// Builds a model whose routing parameters are initialized as usual but
/// whose every leaf holds `-1` everywhere except a single `+1` at a
/// uniformly random class. The leaf scores are frozen.
pub fn make_random_tree(
    topology: TreeTopology,
    input_dim: usize,
    num_classes: usize,
    init_scale: f64,
    seed: u64,
) -> Result<RdtModel> {
    let mut rng = SplitRng::seed_from_u64(seed);
    let mut model =
        RdtModel::init_with_rng(topology, input_dim, num_classes, init_scale, &mut rng)?;
    let leaves: Vec<usize> = model.topology().leaves().collect();
    for leaf in leaves {
        let hot = rng.uniform_usize(num_classes);
        for (c, a) in model.alpha_mut(leaf)?.iter_mut().enumerate() {
            *a = if c == hot { 1.0 } else { -1.0 };
        }
    }
    model.set_alpha_frozen(true);
    Ok(model)
}

/// Trains a Random Tree. Rejects models whose leaf scores are not frozen, so
/// the baseline protocol cannot silently train them.
pub fn train_random_tree(
    model: &mut RdtModel,
    train_set: &Dataset,
    cfg: &TrainConfig,
    eval_set: Option<&Dataset>,
) -> Result<TrainLog> {
    if !model.alpha_frozen() {
        return Err(RdtError::FrozenAlphaMismatch { expected: true });
    }
    train(model, train_set, cfg, eval_set)
}

/// Fraction of classes that are the argmax of at least one leaf.
pub fn leaf_class_coverage(model: &RdtModel) -> Result<f64> {
    let mut covered = alloc::vec![false; model.num_classes()];
    for leaf in model.topology().leaves().collect::<Vec<_>>() {
        covered[predict_class(model.alpha(leaf)?)?] = true;
    }
    let count = covered.iter().filter(|&&c| c).count();
    Ok(count as f64 / model.num_classes() as f64)
}
