//! Finite-difference oracles for every analytic gradient in the crate.
//!
//! The numeric side never calls the gradient code under test: it perturbs
//! parameters through the flat layout and re-evaluates the forward
//! quantities only.

use rdt_core::data::{Dataset, LabeledExample, Split};
use rdt_core::inference::exact_expected_loss;
use rdt_core::loss::{
    hinge_loss, hinge_loss_grad, square_loss, square_loss_grad, LabelVector, Loss,
};
use rdt_core::model::RdtModel;
use rdt_core::policy::{child_distribution, log_prob_step_gradient};
use rdt_core::rng::SplitRng;
use rdt_core::train::{exact_gradient, stochastic_gradient_estimate};
use rdt_core::tree::TreeTopology;

/// |a - b| within `tol` relative to the larger magnitude, with a floor so
/// coordinates near zero are compared absolutely (finite differences carry
/// ~1e-10 of noise).
fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-2)
}

fn random_instance(
    seed: u64,
    max_depth: usize,
    max_classes: usize,
    max_examples: usize,
) -> (RdtModel, Dataset) {
    let mut rng = SplitRng::seed_from_u64(seed);
    let width = 2 + rng.uniform_usize(2);
    let depth = 1 + rng.uniform_usize(max_depth);
    let classes = 2 + rng.uniform_usize(max_classes - 1);
    let n = 1 + rng.uniform_usize(max_examples);
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

/// Mean enumerated expected loss over the dataset: the quantity whose
/// gradient `exact_gradient` claims to compute.
fn enumerated_objective(model: &RdtModel, data: &Dataset, loss: Loss) -> f64 {
    let mut total = 0.0;
    for (idx, ex) in data.examples.iter().enumerate() {
        total += exact_expected_loss(model, &ex.x, &data.label(idx), loss).unwrap();
    }
    total / data.len() as f64
}

fn fd_objective_gradient(model: &RdtModel, data: &Dataset, loss: Loss, step: f64) -> Vec<f64> {
    let base = model.flatten();
    let mut scratch = model.clone();
    let mut grad = Vec::with_capacity(base.len());
    for j in 0..base.len() {
        let mut plus = base.clone();
        plus[j] += step;
        scratch.assign_from_flat(&plus).unwrap();
        let up = enumerated_objective(&scratch, data, loss);
        let mut minus = base.clone();
        minus[j] -= step;
        scratch.assign_from_flat(&minus).unwrap();
        let down = enumerated_objective(&scratch, data, loss);
        grad.push((up - down) / (2.0 * step));
    }
    grad
}

/// Any leaf coordinate within `margin` of +/-1 sits near a hinge kink for
/// one of the two label signs.
fn has_hinge_kink(model: &RdtModel, margin: f64) -> bool {
    model.topology().leaves().any(|leaf| {
        model
            .alpha(leaf)
            .unwrap()
            .iter()
            .any(|a| (a - 1.0).abs() <= margin || (a + 1.0).abs() <= margin)
    })
}

#[test]
fn square_loss_grad_matches_finite_differences() {
    let mut rng = SplitRng::seed_from_u64(41);
    let step = 1e-7;
    for _ in 0..50 {
        let c = 2 + rng.uniform_usize(7);
        let alpha = rng.uniform_vec(c, -2.0, 2.0);
        let y = LabelVector::new(rng.uniform_usize(c), c).unwrap();
        let grad = square_loss_grad(&alpha, &y).unwrap();
        for j in 0..c {
            let mut up = alpha.clone();
            up[j] += step;
            let mut down = alpha.clone();
            down[j] -= step;
            let fd = (square_loss(&up, &y).unwrap() - square_loss(&down, &y).unwrap())
                / (2.0 * step);
            assert!(close(grad[j], fd, 1e-6), "coord {j}: grad {} vs fd {fd}", grad[j]);
        }
    }
}

#[test]
fn hinge_loss_grad_matches_finite_differences_away_from_kinks() {
    let mut rng = SplitRng::seed_from_u64(42);
    let step = 1e-6;
    let mut checked = 0;
    while checked < 50 {
        let c = 2 + rng.uniform_usize(7);
        let alpha = rng.uniform_vec(c, -2.0, 2.0);
        if alpha.iter().any(|a| (a - 1.0).abs() <= 1e-3 || (a + 1.0).abs() <= 1e-3) {
            continue;
        }
        checked += 1;
        let y = LabelVector::new(rng.uniform_usize(c), c).unwrap();
        let grad = hinge_loss_grad(&alpha, &y).unwrap();
        for j in 0..c {
            let mut up = alpha.clone();
            up[j] += step;
            let mut down = alpha.clone();
            down[j] -= step;
            let fd =
                (hinge_loss(&up, &y).unwrap() - hinge_loss(&down, &y).unwrap()) / (2.0 * step);
            assert!(close(grad[j], fd, 1e-5), "coord {j}: grad {} vs fd {fd}", grad[j]);
        }
    }
}

#[test]
fn step_gradient_matches_finite_differences_of_log_prob() {
    // Fixed-case tolerance 1e-5 at step 1e-6, random cases at 1e-4.
    let mut rng = SplitRng::seed_from_u64(43);
    for case in 0..30 {
        let width = 2 + rng.uniform_usize(2);
        let topo = TreeTopology::complete(width, 2).unwrap();
        let model = RdtModel::init(topo, 2, 4, 0.8, rng.next_u64()).unwrap();
        let x = [rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)];
        let node = 0usize;
        let children = model.topology().children(node).unwrap().to_vec();
        let chosen = children[rng.uniform_usize(children.len())];
        let chosen_idx = children.iter().position(|&c| c == chosen).unwrap();

        let analytic = log_prob_step_gradient(&model, node, &x, chosen).unwrap();
        let step = 1e-6;
        let tol = if case == 0 { 1e-5 } else { 1e-4 };

        let log_prob = |m: &RdtModel| -> f64 {
            child_distribution(m, node, &x).unwrap().probs[chosen_idx].ln()
        };
        for child in 0..children.len() {
            for dim in 0..3 {
                let flat_idx = model.flat_index_theta(node, child, dim).unwrap();
                let base = model.flatten();
                let mut scratch = model.clone();
                let mut up = base.clone();
                up[flat_idx] += step;
                scratch.assign_from_flat(&up).unwrap();
                let lp_up = log_prob(&scratch);
                let mut down = base;
                down[flat_idx] -= step;
                scratch.assign_from_flat(&down).unwrap();
                let lp_down = log_prob(&scratch);
                let fd = (lp_up - lp_down) / (2.0 * step);
                let got = if dim < 2 {
                    analytic.weight_row(child)[dim]
                } else {
                    analytic.bias(child)
                };
                assert!(
                    close(got, fd, tol),
                    "case {case} child {child} dim {dim}: analytic {got} vs fd {fd}"
                );
            }
        }
    }
}

#[test]
fn exact_gradient_matches_finite_differences_on_random_instances() {
    // Square loss on 60 instances, hinge (away from kinks) on 40, all with
    // relative tolerance 1e-4 at step 1e-5.
    let step = 1e-5;
    for seed in 0..60u64 {
        let (model, data) = random_instance(1000 + seed, 3, 8, 20);
        let analytic = exact_gradient(&model, &data, Loss::Square).unwrap();
        let numeric = fd_objective_gradient(&model, &data, Loss::Square, step);
        for (j, (a, f)) in analytic.iter().zip(&numeric).enumerate() {
            assert!(close(*a, *f, 1e-4), "seed {seed} square coord {j}: {a} vs {f}");
        }
    }
    let mut seed = 0u64;
    let mut checked = 0;
    while checked < 40 {
        seed += 1;
        let (model, data) = random_instance(2000 + seed, 3, 8, 20);
        if has_hinge_kink(&model, 1e-3) {
            continue;
        }
        checked += 1;
        let analytic = exact_gradient(&model, &data, Loss::Hinge).unwrap();
        let numeric = fd_objective_gradient(&model, &data, Loss::Hinge, step);
        for (j, (a, f)) in analytic.iter().zip(&numeric).enumerate() {
            assert!(close(*a, *f, 1e-4), "seed {seed} hinge coord {j}: {a} vs {f}");
        }
    }
}

#[test]
fn stochastic_estimates_average_to_the_exact_gradient() {
    // 1e4 single-trajectory estimates on a fixed (2,2) instance agree with
    // the enumerated gradient within 5 standard errors per coordinate.
    let (model, data) = {
        let topo = TreeTopology::complete(2, 2).unwrap();
        let model = RdtModel::init(topo, 2, 4, 0.4, 99).unwrap();
        let mut rng = SplitRng::seed_from_u64(77);
        let examples = (0..5)
            .map(|_| LabeledExample {
                x: vec![rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)],
                class: rng.uniform_usize(4),
            })
            .collect();
        (model, Dataset::new(examples, 4, 2, Split::Train).unwrap())
    };
    let exact = exact_gradient(&model, &data, Loss::Square).unwrap();

    let samples = 10_000;
    let dim = exact.len();
    let mut mean = vec![0.0; dim];
    let mut m2 = vec![0.0; dim];
    let mut rng = SplitRng::seed_from_u64(7);
    for s in 0..samples {
        let g = stochastic_gradient_estimate(&model, &data, Loss::Square, &mut rng).unwrap();
        for j in 0..dim {
            let delta = g[j] - mean[j];
            mean[j] += delta / (s + 1) as f64;
            m2[j] += delta * (g[j] - mean[j]);
        }
    }
    for j in 0..dim {
        let var = m2[j] / (samples - 1) as f64;
        let se = (var / samples as f64).sqrt();
        let err = (mean[j] - exact[j]).abs();
        assert!(
            err <= 5.0 * se + 1e-12,
            "coord {j}: mean {} vs exact {}, se {se}",
            mean[j], exact[j]
        );
    }
}
