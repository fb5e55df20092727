//! Joint stochastic training of routing and leaf parameters.
//!
//! Each visited example samples `M` trajectories. Per trajectory the reached
//! leaf's scores take a plain gradient step on the terminal loss, and every
//! routing block along the path takes a score-function step: the gradient of
//! its log step-probability scaled by the trajectory's loss. High-loss paths
//! are thereby pushed down and the leaf scores drift toward the labels that
//! reach them, so the category-to-leaf assignment and the routing are
//! learned together.

use crate::data::Dataset;
use crate::error::{RdtError, Result};
use crate::inference::{greedy_accuracy, ENUMERATION_LEAF_LIMIT};
use crate::loss::{LabelVector, Loss};
use crate::model::RdtModel;
use crate::policy::{child_distribution, sample_route, step_gradient_from_dist, ChildDistribution};
use crate::rng::SplitRng;
use crate::tree::ROOT;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

/// Hyperparameters of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// Trajectories sampled per visited example (`M`).
    pub trajectories_per_example: usize,
    pub loss: Loss,
    pub seed: u64,
    /// Subtract a running mean of observed losses from the score-function
    /// term. Off by default: the raw estimator is the reference behaviour.
    pub baseline_enabled: bool,
    pub shuffle_each_epoch: bool,
    /// Visit uniformly resampled examples instead of shuffled passes.
    pub uniform_sampling: bool,
    /// Record greedy train/test accuracy after every epoch. Costs an extra
    /// pass over the data per epoch; callers that only need the trained
    /// model turn it off.
    pub track_metrics: bool,
    /// Scale each node's routing step by `sqrt(2^(d - D))` where `d` is the
    /// node's depth and `D` the tree depth. A node near the root sees
    /// exponentially more visits per epoch than a node near the leaves, so
    /// uniform steps let the top of the tree lock in its routing long before
    /// the leaves below have differentiated; the scaling equalizes how fast
    /// the levels commit. Off by default.
    pub depth_scaled_steps: bool,
}

impl TrainConfig {
    pub fn new(learning_rate: f64, epochs: usize) -> Self {
        TrainConfig {
            learning_rate,
            epochs,
            trajectories_per_example: 1,
            loss: Loss::Square,
            seed: 0,
            baseline_enabled: false,
            shuffle_each_epoch: true,
            uniform_sampling: false,
            track_metrics: true,
            depth_scaled_steps: false,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_loss(mut self, loss: Loss) -> Self {
        self.loss = loss;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0 || !self.learning_rate.is_finite() {
            return Err(RdtError::InvalidParameter(format!(
                "learning rate must be positive and finite, got {}",
                self.learning_rate
            )));
        }
        if self.epochs < 1 {
            return Err(RdtError::InvalidParameter("epochs must be at least 1".into()));
        }
        if self.trajectories_per_example < 1 {
            return Err(RdtError::InvalidParameter(
                "trajectories_per_example must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Running mean of observed losses, used as the optional variance-reduction
/// baseline. Starts at 0.
///
/// The mean is windowed: exact over the first `WINDOW` observations, then an
/// exponential moving average with that window. The loss level is strongly
/// non-stationary early in training (leaf scores move fast), so an
/// all-history mean would lag it by whole epochs and feed the score-function
/// term a large spurious advantage.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunningBaseline {
    count: u64,
    mean: f64,
}

impl RunningBaseline {
    const WINDOW: u64 = 200;

    pub fn new() -> Self {
        Self::default()
    }

    pub fn value(&self) -> f64 {
        self.mean
    }

    pub fn push(&mut self, loss: f64) {
        self.count += 1;
        self.mean += (loss - self.mean) / self.count.min(Self::WINDOW) as f64;
    }
}

/// One running-mean baseline per node: each routing update subtracts the
/// mean of losses previously observed on trajectories through that node.
/// The root's entry sees every trajectory, so it coincides with a global
/// running mean; deeper entries track their subtree's loss level.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineState {
    per_node: Vec<RunningBaseline>,
}

impl BaselineState {
    pub fn new(node_count: usize) -> Self {
        BaselineState { per_node: vec![RunningBaseline::new(); node_count] }
    }

    pub fn for_model(model: &RdtModel) -> Self {
        Self::new(model.topology().node_count())
    }

    pub fn value(&self, node: usize) -> f64 {
        self.per_node[node].value()
    }

    pub fn push(&mut self, node: usize, loss: f64) {
        self.per_node[node].push(loss);
    }
}

/// Per-epoch metrics of a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainLog {
    /// Mean sampled loss over the epoch's visits.
    pub train_loss: Vec<f64>,
    /// Greedy accuracy on the training set after each epoch.
    pub train_acc: Vec<f64>,
    /// Greedy accuracy on the eval set after each epoch; empty when no eval
    /// set was given.
    pub test_acc: Vec<f64>,
    pub final_theta_norm: f64,
    pub final_alpha_norm: f64,
}

fn check_compat(model: &RdtModel, dataset: &Dataset) -> Result<()> {
    if dataset.input_dim != model.input_dim() {
        return Err(RdtError::DimensionMismatch {
            expected: model.input_dim(),
            got: dataset.input_dim,
        });
    }
    if dataset.num_classes != model.num_classes() {
        return Err(RdtError::DimensionMismatch {
            expected: model.num_classes(),
            got: dataset.num_classes,
        });
    }
    Ok(())
}

/// One stochastic update on one example: samples `M` trajectories and applies
/// the leaf and routing updates for each. Returns the mean sampled loss.
///
/// Leaf scores are left untouched on frozen-alpha models. Baseline values are
/// read before this example's losses are pushed, and only consulted when the
/// config enables them.
pub fn train_step(
    model: &mut RdtModel,
    x: &[f64],
    y: &LabelVector,
    cfg: &TrainConfig,
    baseline: &mut BaselineState,
    rng: &mut SplitRng,
) -> Result<f64> {
    if y.num_classes() != model.num_classes() {
        return Err(RdtError::DimensionMismatch {
            expected: model.num_classes(),
            got: y.num_classes(),
        });
    }
    let m = cfg.trajectories_per_example;
    if m < 1 {
        return Err(RdtError::InvalidParameter(
            "trajectories_per_example must be at least 1".into(),
        ));
    }
    let step = cfg.learning_rate / m as f64;

    let mut loss_sum = 0.0;
    for _ in 0..m {
        let record = sample_route(model, x, rng)?;
        let leaf = record.leaf;
        let loss = cfg.loss.value(model.alpha(leaf)?, y)?;
        if !loss.is_finite() {
            return Err(RdtError::NonFiniteLoss);
        }
        loss_sum += loss;

        if !model.alpha_frozen() {
            let grad = cfg.loss.grad(model.alpha(leaf)?, y)?;
            for (a, g) in model.alpha_mut(leaf)?.iter_mut().zip(&grad) {
                *a -= step * g;
            }
        }

        for s in &record.steps {
            let node = s.dist.node_id;
            let b = if cfg.baseline_enabled { baseline.value(node) } else { 0.0 };
            let scale = if cfg.depth_scaled_steps { depth_step_scale(model, node)? } else { 1.0 };
            let grad = step_gradient_from_dist(&s.dist, s.chosen_idx, x);
            model.theta_mut(node)?.add_scaled(&grad, -step * scale * (loss - b));
        }

        if cfg.baseline_enabled {
            for s in &record.steps {
                baseline.push(s.dist.node_id, loss);
            }
        }
    }
    Ok(loss_sum / m as f64)
}

/// Runs `cfg.epochs` passes over the training set, visiting every example
/// once per epoch in shuffled order (or resampling uniformly when the config
/// says so). Deterministic given `cfg.seed`.
pub fn train(
    model: &mut RdtModel,
    train_set: &Dataset,
    cfg: &TrainConfig,
    eval_set: Option<&Dataset>,
) -> Result<TrainLog> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(RdtError::InvalidParameter("training set is empty".into()));
    }
    check_compat(model, train_set)?;
    if let Some(es) = eval_set {
        check_compat(model, es)?;
    }

    let n = train_set.len();
    let mut rng = SplitRng::seed_from_u64(cfg.seed);
    let mut baseline = BaselineState::for_model(model);
    let mut order: Vec<usize> = (0..n).collect();
    let mut log = TrainLog {
        train_loss: Vec::with_capacity(cfg.epochs),
        train_acc: Vec::with_capacity(cfg.epochs),
        test_acc: Vec::new(),
        final_theta_norm: 0.0,
        final_alpha_norm: 0.0,
    };

    for epoch in 1..=cfg.epochs {
        let mut epoch_loss = 0.0;
        let visit = |model: &mut RdtModel,
                     idx: usize,
                     baseline: &mut BaselineState,
                     rng: &mut SplitRng|
         -> Result<f64> {
            let y = train_set.label(idx);
            train_step(model, &train_set.examples[idx].x, &y, cfg, baseline, rng)
        };
        if cfg.uniform_sampling {
            for _ in 0..n {
                let idx = rng.uniform_usize(n);
                epoch_loss += visit(model, idx, &mut baseline, &mut rng)
                    .map_err(|e| diverged(e, epoch))?;
            }
        } else {
            if cfg.shuffle_each_epoch {
                rng.shuffle(&mut order);
            }
            for &idx in &order {
                epoch_loss += visit(model, idx, &mut baseline, &mut rng)
                    .map_err(|e| diverged(e, epoch))?;
            }
        }
        log.train_loss.push(epoch_loss / n as f64);
        if cfg.track_metrics {
            log.train_acc.push(greedy_accuracy(model, train_set)?);
            if let Some(es) = eval_set {
                log.test_acc.push(greedy_accuracy(model, es)?);
            }
        }
    }
    log.final_theta_norm = model.theta_norm();
    log.final_alpha_norm = model.alpha_norm();
    Ok(log)
}

fn diverged(e: RdtError, epoch: usize) -> RdtError {
    match e {
        RdtError::NonFiniteLoss => RdtError::Diverged { epoch },
        other => other,
    }
}

/// `W^(d - (D-1))` for a node at depth `d`: 1 at the deepest internal level,
/// shrinking toward the root in proportion to the visit-count ratio, so every
/// level accumulates routing change at the same per-epoch rate.
fn depth_step_scale(model: &RdtModel, node: usize) -> Result<f64> {
    let topo = model.topology();
    let d = topo.node_depth(node)? as f64;
    let deepest = (topo.depth() - 1) as f64;
    let width = topo.width() as f64;
    Ok(libm::pow(width, d - deepest))
}

/// Monte Carlo estimate of the objective: the mean terminal loss over
/// `samples_per_example` sampled trajectories for every example.
pub fn estimate_objective(
    model: &RdtModel,
    dataset: &Dataset,
    samples_per_example: usize,
    loss: Loss,
    rng: &mut SplitRng,
) -> Result<f64> {
    if samples_per_example < 1 {
        return Err(RdtError::InvalidParameter(
            "samples_per_example must be at least 1".into(),
        ));
    }
    if dataset.is_empty() {
        return Err(RdtError::InvalidParameter("dataset is empty".into()));
    }
    check_compat(model, dataset)?;
    let mut total = 0.0;
    for (idx, ex) in dataset.examples.iter().enumerate() {
        let y = dataset.label(idx);
        for _ in 0..samples_per_example {
            let record = sample_route(model, &ex.x, rng)?;
            total += loss.value(model.alpha(record.leaf)?, &y)?;
        }
    }
    Ok(total / (dataset.len() * samples_per_example) as f64)
}

/// Exact gradient of the enumerated objective over `(theta, alpha)` in the
/// model's flat parameter layout: for every example, the score-function term
/// summed over all paths plus the probability-weighted leaf-loss gradients,
/// averaged over the dataset. Verification tool; guarded by the enumeration
/// limit.
pub fn exact_gradient(model: &RdtModel, dataset: &Dataset, loss: Loss) -> Result<Vec<f64>> {
    let leaves = model.topology().leaf_count();
    if leaves > ENUMERATION_LEAF_LIMIT {
        return Err(RdtError::TreeTooLarge { leaves, limit: ENUMERATION_LEAF_LIMIT });
    }
    if dataset.is_empty() {
        return Err(RdtError::InvalidParameter("dataset is empty".into()));
    }
    check_compat(model, dataset)?;

    let offsets = model.flat_offsets();
    let mut grad = vec![0.0; model.param_count()];
    let inv_n = 1.0 / dataset.len() as f64;

    for (idx, ex) in dataset.examples.iter().enumerate() {
        let y = dataset.label(idx);
        // Each internal node's distribution is evaluated once per example.
        let mut dists: Vec<Option<ChildDistribution>> = vec![None; model.topology().node_count()];
        for node in model.topology().internal_nodes().collect::<Vec<_>>() {
            dists[node] = Some(child_distribution(model, node, &ex.x)?);
        }
        // Depth-first walk over all paths, carrying the path probability and
        // the steps taken so far.
        let mut steps: Vec<(usize, usize)> = Vec::new(); // (node, chosen_idx)
        walk_paths(model, &dists, ROOT, 1.0, &mut steps, &mut |path_prob, steps, leaf| {
            let alpha = model.alpha(leaf)?;
            let l = loss.value(alpha, &y)?;
            let lgrad = loss.grad(alpha, &y)?;
            let leaf_off = offsets[leaf];
            for (c, g) in lgrad.iter().enumerate() {
                grad[leaf_off + c] += inv_n * path_prob * g;
            }
            for &(node, chosen_idx) in steps {
                let dist = dists[node].as_ref().unwrap();
                let sgrad = step_gradient_from_dist(dist, chosen_idx, &ex.x);
                let base = offsets[node];
                let row = model.input_dim() + 1;
                for c in 0..sgrad.num_children() {
                    for (k, w) in sgrad.weight_row(c).iter().enumerate() {
                        grad[base + c * row + k] += inv_n * path_prob * l * w;
                    }
                    grad[base + c * row + model.input_dim()] +=
                        inv_n * path_prob * l * sgrad.bias(c);
                }
            }
            Ok(())
        })?;
    }
    Ok(grad)
}

fn walk_paths(
    model: &RdtModel,
    dists: &[Option<ChildDistribution>],
    node: usize,
    prob: f64,
    steps: &mut Vec<(usize, usize)>,
    visit: &mut impl FnMut(f64, &[(usize, usize)], usize) -> Result<()>,
) -> Result<()> {
    if model.topology().is_leaf(node) {
        return visit(prob, steps, node);
    }
    let dist = dists[node].as_ref().expect("distribution computed for every internal node");
    for (idx, (&child, &p)) in dist.children.iter().zip(&dist.probs).enumerate() {
        steps.push((node, idx));
        walk_paths(model, dists, child, prob * p, steps, visit)?;
        steps.pop();
    }
    Ok(())
}

/// One unbiased Monte Carlo sample of the full gradient: a single sampled
/// trajectory per example, in the same flat layout as [`exact_gradient`].
pub fn stochastic_gradient_estimate(
    model: &RdtModel,
    dataset: &Dataset,
    loss: Loss,
    rng: &mut SplitRng,
) -> Result<Vec<f64>> {
    if dataset.is_empty() {
        return Err(RdtError::InvalidParameter("dataset is empty".into()));
    }
    check_compat(model, dataset)?;
    let offsets = model.flat_offsets();
    let mut grad = vec![0.0; model.param_count()];
    let inv_n = 1.0 / dataset.len() as f64;
    let row = model.input_dim() + 1;

    for (idx, ex) in dataset.examples.iter().enumerate() {
        let y = dataset.label(idx);
        let record = sample_route(model, &ex.x, rng)?;
        let alpha = model.alpha(record.leaf)?;
        let l = loss.value(alpha, &y)?;
        let lgrad = loss.grad(alpha, &y)?;
        let leaf_off = offsets[record.leaf];
        for (c, g) in lgrad.iter().enumerate() {
            grad[leaf_off + c] += inv_n * g;
        }
        for s in &record.steps {
            let sgrad = step_gradient_from_dist(&s.dist, s.chosen_idx, &ex.x);
            let base = offsets[s.dist.node_id];
            for c in 0..sgrad.num_children() {
                for (k, w) in sgrad.weight_row(c).iter().enumerate() {
                    grad[base + c * row + k] += inv_n * l * w;
                }
                grad[base + c * row + model.input_dim()] += inv_n * l * sgrad.bias(c);
            }
        }
    }
    Ok(grad)
}
