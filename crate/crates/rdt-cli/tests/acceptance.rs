//! Acceptance suite: one test per release criterion, each printing a PASS
//! line with the measured values (visible under `--nocapture`).
//!
//! The slow criteria (the 16- and 32-category tables) drive the same
//! experiment runner and config files as the `rdt experiment` command.

use rdt_cli::config::{ExperimentConfig, Method};
use rdt_cli::experiment::{run_experiment, RowResult};
use rdt_cli::report::{render_machine, verify_report};
use rdt_core::data::{generate_gaussian_dataset, Dataset, LabeledExample, Split};
use rdt_core::inference::{
    enumerate_paths, exact_expected_loss, greedy_accuracy, predict, RouteMode,
};
use rdt_core::loss::{LabelVector, Loss};
use rdt_core::model::RdtModel;
use rdt_core::policy::{child_distribution, log_prob_step_gradient};
use rdt_core::rng::SplitRng;
use rdt_core::train::{exact_gradient, stochastic_gradient_estimate, train, TrainConfig};
use rdt_core::tree::TreeTopology;
use std::path::Path;

fn pass(criterion: usize, name: &str, detail: &str) {
    println!("acceptance criterion {criterion} ({name}): PASS  [{detail}]");
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-2)
}

fn random_instance(seed: u64) -> (RdtModel, Dataset) {
    let mut rng = SplitRng::seed_from_u64(seed);
    let width = 2 + rng.uniform_usize(2);
    let depth = 1 + rng.uniform_usize(3);
    let classes = 2 + rng.uniform_usize(7);
    let n = 1 + rng.uniform_usize(20);
    let topo = TreeTopology::complete(width, depth).unwrap();
    let model = RdtModel::init(topo, 2, classes, 0.5, rng.next_u64()).unwrap();
    let examples = (0..n)
        .map(|_| LabeledExample {
            x: vec![rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)],
            class: rng.uniform_usize(classes),
        })
        .collect();
    let data = Dataset::new(examples, classes, 2, Split::Train).unwrap();
    (model, data)
}

fn enumerated_objective(model: &RdtModel, data: &Dataset, loss: Loss) -> f64 {
    let mut total = 0.0;
    for (idx, ex) in data.examples.iter().enumerate() {
        total += exact_expected_loss(model, &ex.x, &data.label(idx), loss).unwrap();
    }
    total / data.len() as f64
}

/// Criterion 1: the enumerated gradient matches central finite differences
/// of the enumerated objective, relative tolerance 1e-4 at step 1e-5, on 100
/// random small instances (hinge checked away from its kinks).
#[test]
fn criterion_1_gradient_oracle_equivalence() {
    let started = std::time::Instant::now();
    let step = 1e-5;
    let mut checked = 0usize;
    let mut seed = 0u64;
    let mut coords = 0usize;
    while checked < 100 {
        seed += 1;
        let (model, data) = random_instance(10_000 + seed);
        let loss = if checked % 2 == 0 { Loss::Square } else { Loss::Hinge };
        if loss == Loss::Hinge {
            let near_kink = model.topology().leaves().any(|leaf| {
                model
                    .alpha(leaf)
                    .unwrap()
                    .iter()
                    .any(|a| (a - 1.0).abs() <= 1e-3 || (a + 1.0).abs() <= 1e-3)
            });
            if near_kink {
                continue;
            }
        }
        checked += 1;
        let analytic = exact_gradient(&model, &data, loss).unwrap();
        let base = model.flatten();
        let mut scratch = model.clone();
        for j in 0..base.len() {
            let mut up = base.clone();
            up[j] += step;
            scratch.assign_from_flat(&up).unwrap();
            let fu = enumerated_objective(&scratch, &data, loss);
            let mut down = base.clone();
            down[j] -= step;
            scratch.assign_from_flat(&down).unwrap();
            let fd = enumerated_objective(&scratch, &data, loss);
            let numeric = (fu - fd) / (2.0 * step);
            assert!(
                close(analytic[j], numeric, 1e-4),
                "instance {seed} ({loss:?}) coord {j}: analytic {} vs fd {numeric}",
                analytic[j]
            );
            coords += 1;
        }
    }
    assert!(started.elapsed().as_secs() < 60, "criterion 1 must finish within a minute");
    pass(1, "gradient oracle equivalence", &format!(
        "100 instances, {coords} coordinates, {:.1}s",
        started.elapsed().as_secs_f64()
    ));
}

/// Criterion 2: 1e4 single-trajectory gradient estimates average to the
/// enumerated gradient within 5 standard errors per coordinate on a fixed
/// (2,2) instance.
#[test]
fn criterion_2_estimator_unbiasedness() {
    let topo = TreeTopology::complete(2, 2).unwrap();
    let model = RdtModel::init(topo, 2, 4, 0.4, 99).unwrap();
    let mut rng = SplitRng::seed_from_u64(77);
    let examples = (0..5)
        .map(|_| LabeledExample {
            x: vec![rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)],
            class: rng.uniform_usize(4),
        })
        .collect();
    let data = Dataset::new(examples, 4, 2, Split::Train).unwrap();
    let exact = exact_gradient(&model, &data, Loss::Square).unwrap();

    let samples = 10_000;
    let dim = exact.len();
    let mut mean = vec![0.0; dim];
    let mut m2 = vec![0.0; dim];
    let mut grad_rng = SplitRng::seed_from_u64(7);
    for s in 0..samples {
        let g = stochastic_gradient_estimate(&model, &data, Loss::Square, &mut grad_rng).unwrap();
        for j in 0..dim {
            let delta = g[j] - mean[j];
            mean[j] += delta / (s + 1) as f64;
            m2[j] += delta * (g[j] - mean[j]);
        }
    }
    let mut worst = 0.0f64;
    for j in 0..dim {
        let var = m2[j] / (samples - 1) as f64;
        let se = (var / samples as f64).sqrt();
        let err = (mean[j] - exact[j]).abs();
        assert!(err <= 5.0 * se + 1e-12, "coord {j}: err {err}, se {se}");
        if se > 0.0 {
            worst = worst.max(err / se);
        }
    }
    pass(2, "estimator unbiasedness", &format!(
        "{dim} coordinates, worst error {worst:.2} standard errors"
    ));
}

/// Criterion 3: probability laws over 1000 random models: child
/// distributions normalize (1e-9), enumerated path probabilities normalize
/// (1e-9), and the score-function zero-mean identity holds (1e-8).
#[test]
fn criterion_3_probability_laws() {
    let mut rng = SplitRng::seed_from_u64(31_337);
    for round in 0..1000 {
        let width = 2 + rng.uniform_usize(2);
        let depth = 1 + rng.uniform_usize(3);
        let classes = 2 + rng.uniform_usize(7);
        let topo = TreeTopology::complete(width, depth).unwrap();
        let model = RdtModel::init(topo, 2, classes, 2.0, rng.next_u64()).unwrap();
        let x = [rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)];

        for node in model.topology().internal_nodes().collect::<Vec<_>>() {
            let dist = child_distribution(&model, node, &x).unwrap();
            let total: f64 = dist.probs.iter().sum();
            assert!((total - 1.0).abs() < 1e-9, "round {round} node {node}: {total}");
        }

        let paths = enumerate_paths(&model, &x).unwrap();
        let total: f64 = paths.iter().map(|(_, p)| p).sum();
        assert!((total - 1.0).abs() < 1e-9, "round {round}: paths sum {total}");

        let mut acc = vec![0.0; model.param_count()];
        for (trajectory, prob) in &paths {
            for pair in trajectory.nodes.windows(2) {
                let g = log_prob_step_gradient(&model, pair[0], &x, pair[1]).unwrap();
                for c in 0..g.num_children() {
                    for (dim, w) in g.weight_row(c).iter().enumerate() {
                        acc[model.flat_index_theta(pair[0], c, dim).unwrap()] += prob * w;
                    }
                    acc[model.flat_index_theta(pair[0], c, model.input_dim()).unwrap()] +=
                        prob * g.bias(c);
                }
            }
        }
        for (j, v) in acc.iter().enumerate() {
            assert!(v.abs() < 1e-8, "round {round} coord {j}: zero-mean residual {v}");
        }
    }
    pass(3, "probability laws", "1000 random models");
}

fn load_config(name: &str) -> ExperimentConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    let text = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("read {}: {e}", path.display()));
    ExperimentConfig::parse(&text).expect("config parses")
}

fn row<'a>(rows: &'a [RowResult], method: Method, width: usize, depth: usize) -> &'a RowResult {
    rows.iter()
        .find(|r| r.method == method && r.width == width && r.depth == depth)
        .expect("row present")
}

/// Criterion 4: the 16-category table. (a) the learned-leaf model beats the
/// Random Tree baseline on every shape; (b) the (2,5) tree reaches 0.60 mean
/// accuracy; (c) accuracy is monotone in the leaf budget over (2,3) ->
/// (2,4) -> (2,5).
#[test]
fn criterion_4_table16_ordering_and_bands() {
    let started = std::time::Instant::now();
    let cfg = load_config("table16.cfg");
    let out = run_experiment(&cfg).expect("experiment runs");
    let machine = render_machine(&out);
    verify_report(&machine).expect("report self-check");

    let leaves: Vec<usize> = cfg
        .rows
        .iter()
        .map(|&(w, d)| row(&out.rows, Method::Rdt, w, d).leaves)
        .collect();
    assert_eq!(leaves, vec![8, 16, 32, 9, 27], "leaf column of the table");

    let mut detail = String::new();
    for &(w, d) in &cfg.rows {
        let rdt = row(&out.rows, Method::Rdt, w, d);
        let rt = row(&out.rows, Method::RandomTree, w, d);
        assert_eq!(rdt.ok_count(), cfg.runs, "every learned run completed");
        assert_eq!(rt.ok_count(), cfg.runs, "every baseline run completed");
        assert!(
            rdt.acc_mean() > rt.acc_mean(),
            "({w},{d}): learned {:.3} must beat baseline {:.3}",
            rdt.acc_mean(),
            rt.acc_mean()
        );
        detail.push_str(&format!(
            "({w},{d}) {:.3}/{:.3} ",
            rdt.acc_mean(),
            rt.acc_mean()
        ));
    }

    let acc23 = row(&out.rows, Method::Rdt, 2, 3).acc_mean();
    let acc24 = row(&out.rows, Method::Rdt, 2, 4).acc_mean();
    let acc25 = row(&out.rows, Method::Rdt, 2, 5).acc_mean();
    assert!(acc25 >= 0.60, "(2,5) mean accuracy {acc25:.3} below the 0.60 band");
    assert!(
        acc25 >= acc24 && acc24 >= acc23,
        "leaf over-provisioning must not hurt: {acc23:.3} -> {acc24:.3} -> {acc25:.3}"
    );
    assert!(started.elapsed().as_secs() < 15 * 60, "criterion 4 exceeded 15 minutes");
    pass(4, "16-category ordering and bands", &format!(
        "{detail}in {:.0}s",
        started.elapsed().as_secs_f64()
    ));
}

/// Criterion 5: the 32-category spot check at (2,6): mean accuracy at least
/// 0.60 and at least 0.30 above the Random Tree baseline.
#[test]
fn criterion_5_spot32_band_and_gap() {
    let started = std::time::Instant::now();
    let cfg = load_config("spot32.cfg");
    let out = run_experiment(&cfg).expect("experiment runs");
    verify_report(&render_machine(&out)).expect("report self-check");

    let rdt = row(&out.rows, Method::Rdt, 2, 6).acc_mean();
    let rt = row(&out.rows, Method::RandomTree, 2, 6).acc_mean();
    assert!(rdt >= 0.60, "(2,6) mean accuracy {rdt:.3} below the 0.60 band");
    assert!(
        rdt - rt >= 0.30,
        "(2,6) gap {:.3} below 0.30 (learned {rdt:.3}, baseline {rt:.3})",
        rdt - rt
    );
    assert!(started.elapsed().as_secs() < 20 * 60, "criterion 5 exceeded 20 minutes");
    pass(5, "32-category band and gap", &format!(
        "learned {rdt:.3}, baseline {rt:.3}, in {:.0}s",
        started.elapsed().as_secs_f64()
    ));
}

/// Criterion 6: a prediction spends exactly depth-many policy evaluations,
/// independent of the class count.
#[test]
fn criterion_6_inference_complexity() {
    let mut rng = SplitRng::seed_from_u64(5);
    for (w, d) in [(2usize, 1usize), (2, 3), (2, 5), (3, 2), (3, 4), (4, 2)] {
        let topo = TreeTopology::complete(w, d).unwrap();
        let model = RdtModel::init(topo, 2, 16, 0.5, rng.next_u64()).unwrap();
        for _ in 0..20 {
            let x = [rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)];
            let greedy = predict(&model, &x, RouteMode::Greedy).unwrap();
            assert_eq!(greedy.policy_evals, d, "greedy ({w},{d})");
            let sampled = predict(&model, &x, RouteMode::Stochastic(&mut rng)).unwrap();
            assert_eq!(sampled.policy_evals, d, "stochastic ({w},{d})");
        }
    }
    pass(6, "inference complexity", "policy evaluations equal depth on all tested shapes");
}

/// Criterion 7: determinism. A rerun of the same experiment config produces
/// a byte-identical report; greedy evaluation is call-stable; frozen leaf
/// scores survive training bit-exactly.
#[test]
fn criterion_7_determinism() {
    let mut cfg = ExperimentConfig::default();
    cfg.classes = 4;
    cfg.per_class = 20;
    cfg.rows = vec![(2, 2)];
    cfg.runs = 2;
    cfg.lr_grid = vec![0.05, 0.02];
    cfg.m_grid = vec![1];
    cfg.epochs = 40;
    cfg.chunk_epochs = 20;
    cfg.restarts = 2;
    cfg.stochastic_samples = 20;
    let a = render_machine(&run_experiment(&cfg).unwrap());
    let b = render_machine(&run_experiment(&cfg).unwrap());
    assert_eq!(a, b, "rerun must give a byte-identical report");

    let (train_set, test_set) =
        generate_gaussian_dataset(4, 40, 3, (-1.0, 1.0), (0.05, 0.15)).unwrap();
    let topo = TreeTopology::complete(2, 2).unwrap();
    let mut model = RdtModel::init(topo.clone(), 2, 4, 0.1, 9).unwrap();
    train(&mut model, &train_set, &TrainConfig::new(0.05, 20).with_seed(1), None).unwrap();
    let e1 = greedy_accuracy(&model, &test_set).unwrap();
    let e2 = greedy_accuracy(&model, &test_set).unwrap();
    assert_eq!(e1.to_bits(), e2.to_bits(), "greedy evaluation is call-stable");

    let mut frozen = rdt_core::baseline::make_random_tree(topo, 2, 4, 0.1, 11).unwrap();
    let before: Vec<u64> = frozen
        .topology()
        .leaves()
        .flat_map(|l| frozen.alpha(l).unwrap().to_vec())
        .map(f64::to_bits)
        .collect();
    rdt_core::baseline::train_random_tree(
        &mut frozen,
        &train_set,
        &TrainConfig::new(0.05, 10).with_seed(2),
        None,
    )
    .unwrap();
    let after: Vec<u64> = frozen
        .topology()
        .leaves()
        .flat_map(|l| frozen.alpha(l).unwrap().to_vec())
        .map(f64::to_bits)
        .collect();
    assert_eq!(before, after, "frozen leaf scores are bit-exact through training");
    pass(7, "determinism", "byte-identical rerun, stable eval, bit-exact frozen leaves");
}

/// Criterion 8: two well-separated Gaussian classes and the smallest tree
/// reach 0.95 test accuracy in at least 4 of 5 seeded runs.
#[test]
fn criterion_8_separable_sanity() {
    let mut hits = 0;
    let mut accs = Vec::new();
    for seed in 0..5u64 {
        // Means 1.5 apart with sigma 0.1: 15 sigmas of separation.
        let mut rng = SplitRng::seed_from_u64(100 + seed);
        let mut train_ex = Vec::new();
        let mut test_ex = Vec::new();
        for (class, mu) in [[-0.75, 0.0], [0.75, 0.0]].iter().enumerate() {
            for k in 0..100 {
                let x = vec![
                    mu[0] + 0.1 * rng.standard_normal(),
                    mu[1] + 0.1 * rng.standard_normal(),
                ];
                if k < 50 {
                    train_ex.push(LabeledExample { x, class });
                } else {
                    test_ex.push(LabeledExample { x, class });
                }
            }
        }
        let train_set = Dataset::new(train_ex, 2, 2, Split::Train).unwrap();
        let test_set = Dataset::new(test_ex, 2, 2, Split::Test).unwrap();

        let topo = TreeTopology::complete(2, 1).unwrap();
        let mut model = RdtModel::init(topo, 2, 2, 0.1, seed).unwrap();
        train(&mut model, &train_set, &TrainConfig::new(0.1, 100).with_seed(seed), None)
            .unwrap();
        let acc = greedy_accuracy(&model, &test_set).unwrap();
        if acc >= 0.95 {
            hits += 1;
        }
        accs.push(acc);
    }
    assert!(hits >= 4, "only {hits}/5 seeds reached 0.95: {accs:?}");
    pass(8, "separable sanity", &format!("{hits}/5 seeds at >= 0.95, accuracies {accs:?}"));
}
