//! The experiment runner: dataset generation, per-row hyperparameter tuning,
//! seeded multi-run training for both methods, and aggregation.
//!
//! Training protocol per run: the training split is cut 80/20 into fit and
//! validation halves; each start is trained in chunks with the model
//! checkpointed on validation accuracy after every chunk, which realizes
//! tuning of the iteration count. The learned-leaf method additionally runs
//! several independent starts per run (the objective is far from convex) and
//! keeps the best checkpoint; the Random Tree baseline draws its leaf
//! labelling once per run, since multi-start selection over labellings would
//! change what the baseline measures.

use crate::config::{ExperimentConfig, Method};
use crate::error::Result;
use rdt_core::baseline::{leaf_class_coverage, make_random_tree, train_random_tree};
use rdt_core::data::{generate_gaussian_dataset, Dataset, Split};
use rdt_core::inference::{greedy_accuracy, stochastic_accuracy};
use rdt_core::train::{train, TrainConfig};
use rdt_core::tree::TreeTopology;
use rdt_core::{RdtModel, SplitRng};
use std::time::Instant;

#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub accuracy: f64,
    pub val_accuracy: f64,
    pub coverage: f64,
    /// Mean and standard error of sampled-routing accuracy, when enabled.
    pub stochastic: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub run_index: usize,
    pub seed: u64,
    pub result: std::result::Result<RunMetrics, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RowResult {
    pub method: Method,
    pub width: usize,
    pub depth: usize,
    pub leaves: usize,
    pub chosen_lr: f64,
    pub chosen_m: usize,
    pub runs: Vec<RunOutcome>,
    /// Wall-clock seconds; printed on stdout, never written to the report
    /// file (the file must be byte-identical across reruns).
    pub wall_secs: f64,
}

impl RowResult {
    pub fn ok_runs(&self) -> impl Iterator<Item = &RunMetrics> {
        self.runs.iter().filter_map(|r| r.result.as_ref().ok())
    }

    pub fn ok_count(&self) -> usize {
        self.ok_runs().count()
    }

    pub fn acc_mean(&self) -> f64 {
        mean(self.ok_runs().map(|m| m.accuracy))
    }

    /// Population variance across runs (zero for a single run).
    pub fn acc_var(&self) -> f64 {
        variance(self.ok_runs().map(|m| m.accuracy))
    }

    pub fn acc_std(&self) -> f64 {
        self.acc_var().sqrt()
    }

    pub fn stoch_mean(&self) -> Option<f64> {
        let vals: Vec<f64> =
            self.ok_runs().filter_map(|m| m.stochastic.map(|(a, _)| a)).collect();
        if vals.is_empty() {
            None
        } else {
            Some(mean(vals.iter().copied()))
        }
    }

    pub fn stoch_var(&self) -> Option<f64> {
        let vals: Vec<f64> =
            self.ok_runs().filter_map(|m| m.stochastic.map(|(a, _)| a)).collect();
        if vals.is_empty() {
            None
        } else {
            Some(variance(vals.iter().copied()))
        }
    }

    pub fn coverage_mean(&self) -> f64 {
        mean(self.ok_runs().map(|m| m.coverage))
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut count) = (0.0, 0usize);
    for v in values {
        sum += v;
        count += 1;
    }
    if count == 0 {
        f64::NAN
    } else {
        sum / count as f64
    }
}

fn variance(values: impl Iterator<Item = f64>) -> f64 {
    let vals: Vec<f64> = values.collect();
    if vals.is_empty() {
        return f64::NAN;
    }
    let m = mean(vals.iter().copied());
    vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / vals.len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub config: ExperimentConfig,
    pub rows: Vec<RowResult>,
}

/// Deterministic seed mixer for tuning streams.
fn mix(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn split_fit_val(full: &Dataset, rng: &mut SplitRng) -> Result<(Dataset, Dataset)> {
    let mut idx: Vec<usize> = (0..full.len()).collect();
    rng.shuffle(&mut idx);
    let cut = full.len() * 4 / 5;
    let take = |ids: &[usize], split: Split| -> Result<Dataset> {
        Ok(Dataset::new(
            ids.iter().map(|&i| full.examples[i].clone()).collect(),
            full.num_classes,
            full.input_dim,
            split,
        )?)
    };
    Ok((take(&idx[..cut], Split::Train)?, take(&idx[cut..], Split::Test)?))
}

fn train_config(cfg: &ExperimentConfig, lr: f64, m: usize, epochs: usize, seed: u64) -> TrainConfig {
    let mut tc = TrainConfig::new(lr, epochs).with_seed(seed).with_loss(cfg.loss);
    tc.trajectories_per_example = m;
    tc.baseline_enabled = cfg.baseline;
    tc.depth_scaled_steps = cfg.depth_scaled;
    tc.track_metrics = false;
    tc
}

/// Trains `starts` fresh models in validation-checkpointed chunks and returns
/// the best checkpoint with its validation accuracy.
#[allow(clippy::too_many_arguments)]
fn train_with_selection(
    cfg: &ExperimentConfig,
    width: usize,
    depth: usize,
    method: Method,
    fit: &Dataset,
    val: &Dataset,
    lr: f64,
    m: usize,
    starts: usize,
    epochs: usize,
    rng: &mut SplitRng,
) -> Result<(f64, RdtModel)> {
    let mut best: Option<(f64, RdtModel)> = None;
    for _ in 0..starts {
        let topology = TreeTopology::complete(width, depth)?;
        let mut model =
            make_random_tree(topology, fit.input_dim, cfg.classes, cfg.init_scale, rng.next_u64())?;
        if method == Method::Rdt {
            // Learned leaves start from the same one-hot law the baseline
            // freezes; training is free to reassign them.
            model.set_alpha_frozen(false);
        }
        let mut remaining = epochs;
        while remaining > 0 {
            let span = remaining.min(cfg.chunk_epochs);
            remaining -= span;
            let tc = train_config(cfg, lr, m, span, rng.next_u64());
            match method {
                Method::Rdt => train(&mut model, fit, &tc, None)?,
                Method::RandomTree => train_random_tree(&mut model, fit, &tc, None)?,
            };
            let acc = greedy_accuracy(&model, val)?;
            if best.as_ref().is_none_or(|(b, _)| acc > *b) {
                best = Some((acc, model.clone()));
            }
        }
    }
    Ok(best.expect("at least one start"))
}

fn starts_for(cfg: &ExperimentConfig, method: Method) -> usize {
    match method {
        Method::Rdt => cfg.restarts,
        Method::RandomTree => 1,
    }
}

/// Picks `(lr, M)` from the grids by validation accuracy, on a reduced
/// budget. Ties keep the earliest grid point.
fn tune(
    cfg: &ExperimentConfig,
    width: usize,
    depth: usize,
    method: Method,
    train_full: &Dataset,
    salt: u64,
) -> Result<(f64, usize)> {
    if cfg.lr_grid.len() == 1 && cfg.m_grid.len() == 1 {
        return Ok((cfg.lr_grid[0], cfg.m_grid[0]));
    }
    let mut rng = SplitRng::seed_from_u64(mix(cfg.master_seed, salt));
    let (fit, val) = split_fit_val(train_full, &mut rng)?;
    let tune_starts = starts_for(cfg, method).clamp(1, 2);
    let tune_epochs = (cfg.epochs / 2).max(cfg.chunk_epochs);
    let mut best: Option<(f64, (f64, usize))> = None;
    for &lr in &cfg.lr_grid {
        for &m in &cfg.m_grid {
            let (acc, _) = train_with_selection(
                cfg, width, depth, method, &fit, &val, lr, m, tune_starts, tune_epochs, &mut rng,
            )?;
            if best.as_ref().is_none_or(|(b, _)| acc > *b) {
                best = Some((acc, (lr, m)));
            }
        }
    }
    Ok(best.expect("nonempty grid").1)
}

#[allow(clippy::too_many_arguments)]
fn one_run(
    cfg: &ExperimentConfig,
    width: usize,
    depth: usize,
    method: Method,
    train_full: &Dataset,
    test: &Dataset,
    lr: f64,
    m: usize,
    run_seed: u64,
) -> Result<RunMetrics> {
    let mut rng = SplitRng::seed_from_u64(run_seed);
    let (fit, val) = split_fit_val(train_full, &mut rng)?;
    let (val_accuracy, model) = train_with_selection(
        cfg,
        width,
        depth,
        method,
        &fit,
        &val,
        lr,
        m,
        starts_for(cfg, method),
        cfg.epochs,
        &mut rng,
    )?;
    let accuracy = greedy_accuracy(&model, test)?;
    let coverage = leaf_class_coverage(&model)?;
    let stochastic = if cfg.stochastic_samples > 0 {
        let mut eval_rng = rng.split();
        Some(stochastic_accuracy(&model, test, cfg.stochastic_samples, &mut eval_rng)?)
    } else {
        None
    };
    Ok(RunMetrics { accuracy, val_accuracy, coverage, stochastic })
}

/// Runs the whole experiment. Progress lines go to stderr; per-run failures
/// are recorded in the output instead of aborting the experiment.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let (train_full, test) = generate_gaussian_dataset(
        cfg.classes,
        cfg.per_class,
        cfg.data_seed,
        cfg.mean_bounds,
        cfg.sigma_range,
    )?;

    let mut rows = Vec::new();
    for (row_idx, &(width, depth)) in cfg.rows.iter().enumerate() {
        for (method_idx, &method) in cfg.methods.iter().enumerate() {
            let started = Instant::now();
            let salt = (row_idx as u64) << 8 | method_idx as u64;
            let (lr, m) = tune(cfg, width, depth, method, &train_full, salt)?;
            let mut runs = Vec::with_capacity(cfg.runs);
            for run_index in 0..cfg.runs {
                // Run seeds are master + run index.
                let seed = cfg.master_seed + run_index as u64;
                let result =
                    one_run(cfg, width, depth, method, &train_full, &test, lr, m, seed)
                        .map_err(|e| e.to_string());
                runs.push(RunOutcome { run_index, seed, result });
            }
            let leaves = width.pow(depth as u32);
            eprintln!(
                "{} ({width},{depth}) L={leaves}: done in {:.1}s",
                method.as_str(),
                started.elapsed().as_secs_f64()
            );
            rows.push(RowResult {
                method,
                width,
                depth,
                leaves,
                chosen_lr: lr,
                chosen_m: m,
                runs,
                wall_secs: started.elapsed().as_secs_f64(),
            });
        }
    }
    Ok(ExperimentOutput { config: cfg.clone(), rows })
}
