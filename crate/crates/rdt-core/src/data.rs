//! Synthetic 2D Gaussian-cluster datasets and decision-frontier grids.

use crate::error::{RdtError, Result};
use crate::inference::{predict, RouteMode};
use crate::loss::LabelVector;
use crate::model::RdtModel;
use crate::rng::SplitRng;
use alloc::format;
use alloc::vec::Vec;

/// Default box the cluster means are drawn from, per coordinate.
pub const DEFAULT_MEAN_BOUNDS: (f64, f64) = (-1.0, 1.0);
/// Default range the per-cluster standard deviation is drawn from.
pub const DEFAULT_SIGMA_RANGE: (f64, f64) = (0.05, 0.15);

/// One input vector with its 0-based class index.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledExample {
    pub x: Vec<f64>,
    pub class: usize,
}

/// Which half of a split a dataset holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

impl core::str::FromStr for Split {
    type Err = RdtError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(RdtError::InvalidParameter(format!(
                "unknown split tag {other:?} (expected \"train\" or \"test\")"
            ))),
        }
    }
}

/// A labelled collection of examples.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub examples: Vec<LabeledExample>,
    pub num_classes: usize,
    pub input_dim: usize,
    pub split: Split,
}

impl Dataset {
    /// Wraps examples after checking class ranges, dimensions, and finiteness.
    pub fn new(
        examples: Vec<LabeledExample>,
        num_classes: usize,
        input_dim: usize,
        split: Split,
    ) -> Result<Self> {
        if num_classes < 2 {
            return Err(RdtError::InvalidParameter(format!(
                "dataset needs at least 2 classes, got {num_classes}"
            )));
        }
        for (i, ex) in examples.iter().enumerate() {
            if ex.x.len() != input_dim {
                return Err(RdtError::DimensionMismatch { expected: input_dim, got: ex.x.len() });
            }
            if ex.class >= num_classes {
                return Err(RdtError::InvalidParameter(format!(
                    "example {i} has class {} but the dataset declares {num_classes} classes",
                    ex.class
                )));
            }
            if ex.x.iter().any(|v| !v.is_finite()) {
                return Err(RdtError::InvalidParameter(format!(
                    "example {i} holds a non-finite coordinate"
                )));
            }
        }
        Ok(Dataset { examples, num_classes, input_dim, split })
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// The `{-1, +1}`-coded label of example `idx`.
    pub fn label(&self, idx: usize) -> LabelVector {
        LabelVector::new(self.examples[idx].class, self.num_classes)
            .expect("dataset invariants guarantee a valid class index")
    }
}

/// Draws `num_classes` isotropic Gaussian clusters in 2D and splits each
/// class half into train, half into test.
///
/// Per class: a mean with both coordinates uniform in `mean_bounds`, a
/// standard deviation uniform in `sigma_range`, then `per_class` draws from
/// `N(mean, sigma^2 I)`. The first half of the draws goes to the train split,
/// the second half to test, so the splits are disjoint by construction.
pub fn generate_gaussian_dataset(
    num_classes: usize,
    per_class: usize,
    seed: u64,
    mean_bounds: (f64, f64),
    sigma_range: (f64, f64),
) -> Result<(Dataset, Dataset)> {
    if num_classes < 2 {
        return Err(RdtError::InvalidParameter(format!(
            "need at least 2 classes, got {num_classes}"
        )));
    }
    if per_class < 2 || !per_class.is_multiple_of(2) {
        return Err(RdtError::InvalidParameter(format!(
            "per_class must be even and positive, got {per_class}"
        )));
    }
    if !mean_bounds.0.is_finite() || !mean_bounds.1.is_finite() || mean_bounds.0 > mean_bounds.1
    {
        return Err(RdtError::InvalidParameter(format!(
            "invalid mean bounds [{}, {}]",
            mean_bounds.0, mean_bounds.1
        )));
    }
    if sigma_range.0 <= 0.0
        || sigma_range.0.is_nan()
        || !sigma_range.1.is_finite()
        || sigma_range.0 > sigma_range.1
    {
        return Err(RdtError::InvalidParameter(format!(
            "invalid sigma range [{}, {}]",
            sigma_range.0, sigma_range.1
        )));
    }

    let mut rng = SplitRng::seed_from_u64(seed);
    let half = per_class / 2;
    let mut train = Vec::with_capacity(num_classes * half);
    let mut test = Vec::with_capacity(num_classes * half);
    for class in 0..num_classes {
        let mu = [
            rng.uniform(mean_bounds.0, mean_bounds.1),
            rng.uniform(mean_bounds.0, mean_bounds.1),
        ];
        let sigma = rng.uniform(sigma_range.0, sigma_range.1);
        for k in 0..per_class {
            let x = alloc::vec![
                mu[0] + sigma * rng.standard_normal(),
                mu[1] + sigma * rng.standard_normal(),
            ];
            let ex = LabeledExample { x, class };
            if k < half {
                train.push(ex);
            } else {
                test.push(ex);
            }
        }
    }
    Ok((
        Dataset::new(train, num_classes, 2, Split::Train)?,
        Dataset::new(test, num_classes, 2, Split::Test)?,
    ))
}

/// Axis-aligned rectangle a frontier grid is evaluated over.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridBounds {
    pub x0_min: f64,
    pub x0_max: f64,
    pub x1_min: f64,
    pub x1_max: f64,
}

impl GridBounds {
    pub fn new(x0_min: f64, x0_max: f64, x1_min: f64, x1_max: f64) -> Result<Self> {
        let b = GridBounds { x0_min, x0_max, x1_min, x1_max };
        let degenerate = |lo: f64, hi: f64| !(lo.is_finite() && hi.is_finite()) || lo >= hi;
        if degenerate(x0_min, x0_max) || degenerate(x1_min, x1_max) {
            return Err(RdtError::InvalidParameter(format!(
                "degenerate grid bounds [{x0_min}, {x0_max}] x [{x1_min}, {x1_max}]"
            )));
        }
        Ok(b)
    }
}

/// Greedy class predictions over a lattice, row-major with `x0` varying
/// slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontierGrid {
    pub bounds: GridBounds,
    pub resolution: usize,
    pub classes: Vec<usize>,
}

impl FrontierGrid {
    /// Lattice coordinate `i` (of `resolution`) between `lo` and `hi`,
    /// endpoints included.
    pub fn coord(lo: f64, hi: f64, i: usize, resolution: usize) -> f64 {
        lo + (hi - lo) * i as f64 / (resolution - 1) as f64
    }

    /// Iterates `(x0, x1, class)` rows in storage order.
    pub fn rows(&self) -> impl Iterator<Item = (f64, f64, usize)> + '_ {
        let r = self.resolution;
        let b = self.bounds;
        self.classes.iter().enumerate().map(move |(idx, &class)| {
            let (i0, i1) = (idx / r, idx % r);
            (
                Self::coord(b.x0_min, b.x0_max, i0, r),
                Self::coord(b.x1_min, b.x1_max, i1, r),
                class,
            )
        })
    }
}

/// Evaluates the model's greedy prediction on a `resolution x resolution`
/// lattice over `bounds`.
pub fn frontier_grid(
    model: &RdtModel,
    bounds: GridBounds,
    resolution: usize,
) -> Result<FrontierGrid> {
    if resolution < 2 {
        return Err(RdtError::InvalidParameter(format!(
            "grid resolution must be at least 2, got {resolution}"
        )));
    }
    if model.input_dim() != 2 {
        return Err(RdtError::InvalidParameter(format!(
            "frontier grids need a 2D model, this one has input_dim {}",
            model.input_dim()
        )));
    }
    let mut classes = Vec::with_capacity(resolution * resolution);
    for i0 in 0..resolution {
        let x0 = FrontierGrid::coord(bounds.x0_min, bounds.x0_max, i0, resolution);
        for i1 in 0..resolution {
            let x1 = FrontierGrid::coord(bounds.x1_min, bounds.x1_max, i1, resolution);
            classes.push(predict(model, &[x0, x1], RouteMode::Greedy)?.class);
        }
    }
    Ok(FrontierGrid { bounds, resolution, classes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::TreeTopology;

    #[test]
    fn sixteen_classes_give_800_plus_800() {
        let (train, test) = generate_gaussian_dataset(
            16,
            100,
            7,
            DEFAULT_MEAN_BOUNDS,
            DEFAULT_SIGMA_RANGE,
        )
        .unwrap();
        assert_eq!(train.len(), 800);
        assert_eq!(test.len(), 800);
        assert_eq!(train.split, Split::Train);
        assert_eq!(test.split, Split::Test);
        // Exactly per_class / 2 examples of every class in each split.
        for class in 0..16 {
            assert_eq!(train.examples.iter().filter(|e| e.class == class).count(), 50);
            assert_eq!(test.examples.iter().filter(|e| e.class == class).count(), 50);
        }
    }

    #[test]
    fn thirty_two_classes_give_1600_plus_1600() {
        let (train, test) =
            generate_gaussian_dataset(32, 100, 3, DEFAULT_MEAN_BOUNDS, DEFAULT_SIGMA_RANGE)
                .unwrap();
        assert_eq!(train.len(), 1600);
        assert_eq!(test.len(), 1600);
    }

    #[test]
    fn generation_is_reproducible_and_seeds_differ() {
        let a = generate_gaussian_dataset(4, 10, 11, DEFAULT_MEAN_BOUNDS, DEFAULT_SIGMA_RANGE)
            .unwrap();
        let b = generate_gaussian_dataset(4, 10, 11, DEFAULT_MEAN_BOUNDS, DEFAULT_SIGMA_RANGE)
            .unwrap();
        assert_eq!(a, b);
        let c = generate_gaussian_dataset(4, 10, 12, DEFAULT_MEAN_BOUNDS, DEFAULT_SIGMA_RANGE)
            .unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn class_means_stay_near_their_centers() {
        // Sample mean of 50 draws is within 4 sigma / sqrt(50) of the center
        // per coordinate; with these fixed seeds the bound holds.
        for seed in 0..5 {
            let (train, _) =
                generate_gaussian_dataset(16, 100, seed, DEFAULT_MEAN_BOUNDS, DEFAULT_SIGMA_RANGE)
                    .unwrap();
            // Re-derive the class parameters by replaying the generator.
            let mut rng = SplitRng::seed_from_u64(seed);
            for class in 0..16 {
                let mu = [rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)];
                let sigma = rng.uniform(0.05, 0.15);
                for _ in 0..200 {
                    rng.standard_normal();
                }
                let members: Vec<&LabeledExample> =
                    train.examples.iter().filter(|e| e.class == class).collect();
                let bound = 4.0 * sigma / (50.0f64).sqrt();
                for dim in 0..2 {
                    let mean: f64 =
                        members.iter().map(|e| e.x[dim]).sum::<f64>() / members.len() as f64;
                    assert!(
                        (mean - mu[dim]).abs() < bound,
                        "seed {seed} class {class} dim {dim}: mean {mean} vs mu {}",
                        mu[dim]
                    );
                }
            }
        }
    }

    #[test]
    fn means_respect_the_default_box() {
        let (train, test) =
            generate_gaussian_dataset(8, 20, 5, DEFAULT_MEAN_BOUNDS, DEFAULT_SIGMA_RANGE).unwrap();
        let mut rng = SplitRng::seed_from_u64(5);
        for _ in 0..8 {
            let m0 = rng.uniform(-1.0, 1.0);
            let m1 = rng.uniform(-1.0, 1.0);
            assert!((-1.0..1.0).contains(&m0) && (-1.0..1.0).contains(&m1));
            rng.uniform(0.05, 0.15);
            for _ in 0..40 {
                rng.standard_normal();
            }
        }
        drop((train, test));
    }

    #[test]
    fn rejects_bad_generation_parameters() {
        assert!(generate_gaussian_dataset(1, 100, 0, (-1.0, 1.0), (0.05, 0.15)).is_err());
        assert!(generate_gaussian_dataset(4, 99, 0, (-1.0, 1.0), (0.05, 0.15)).is_err());
        assert!(generate_gaussian_dataset(4, 100, 0, (-1.0, 1.0), (0.0, 0.15)).is_err());
        assert!(generate_gaussian_dataset(4, 100, 0, (1.0, -1.0), (0.05, 0.15)).is_err());
    }

    #[test]
    fn dataset_validation_catches_bad_rows() {
        let ex = |x: Vec<f64>, class: usize| LabeledExample { x, class };
        assert!(Dataset::new(alloc::vec![ex(alloc::vec![0.0, 0.0], 5)], 4, 2, Split::Train)
            .is_err());
        assert!(Dataset::new(alloc::vec![ex(alloc::vec![0.0], 1)], 4, 2, Split::Train).is_err());
        assert!(Dataset::new(
            alloc::vec![ex(alloc::vec![f64::NAN, 0.0], 1)],
            4,
            2,
            Split::Train
        )
        .is_err());
    }

    #[test]
    fn constant_model_yields_a_single_class_grid() {
        let topo = TreeTopology::complete(2, 2).unwrap();
        let mut m = RdtModel::init(topo, 2, 4, 0.1, 0).unwrap();
        for leaf in m.topology().leaves().collect::<Vec<_>>() {
            m.alpha_mut(leaf).unwrap().copy_from_slice(&[-1.0, -1.0, 3.0, -1.0]);
        }
        let bounds = GridBounds::new(-1.0, 1.0, -1.0, 1.0).unwrap();
        let grid = frontier_grid(&m, bounds, 5).unwrap();
        assert_eq!(grid.classes.len(), 25);
        assert!(grid.classes.iter().all(|&c| c == 2));
        assert_eq!(grid.rows().count(), 25);
    }

    #[test]
    fn grid_matches_pointwise_predictions() {
        let topo = TreeTopology::complete(2, 3).unwrap();
        let m = RdtModel::init(topo, 2, 4, 0.8, 21).unwrap();
        let bounds = GridBounds::new(-1.5, 1.5, -1.0, 2.0).unwrap();
        let grid = frontier_grid(&m, bounds, 7).unwrap();
        for (x0, x1, class) in grid.rows() {
            let direct = predict(&m, &[x0, x1], RouteMode::Greedy).unwrap().class;
            assert_eq!(class, direct);
        }
    }

    #[test]
    fn rejects_degenerate_grids() {
        let topo = TreeTopology::complete(2, 1).unwrap();
        let m = RdtModel::init(topo, 2, 4, 0.1, 0).unwrap();
        assert!(frontier_grid(&m, GridBounds::new(-1.0, 1.0, -1.0, 1.0).unwrap(), 1).is_err());
        assert!(GridBounds::new(1.0, -1.0, -1.0, 1.0).is_err());
    }
}
