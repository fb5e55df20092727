//! Reinforced decision trees.
//!
//! A classifier shaped like a decision tree where every internal node holds a
//! stochastic linear routing policy over its children and every leaf holds a
//! learnable score vector (one score per class). Routing an input from the
//! root to a leaf costs one policy evaluation per level, so prediction is
//! linear in the tree depth no matter how many classes there are. Routing
//! parameters and leaf scores are trained jointly: the leaf scores follow the
//! gradient of a differentiable classification loss, the routing parameters
//! follow a score-function (policy-gradient) estimate weighted by that loss.
//!
//! The crate is `no_std` (alloc only); file formats and the command-line
//! front end live in the companion `rdt-cli` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod baseline;
pub mod data;
pub mod error;
pub mod inference;
pub mod loss;
mod math;
pub mod model;
pub mod policy;
pub mod rng;
pub mod train;
pub mod tree;

pub use error::{RdtError, Result};
pub use model::RdtModel;
pub use rng::SplitRng;
pub use tree::TreeTopology;
