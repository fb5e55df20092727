//! Error type shared by every operation in the crate.

use alloc::string::String;
use core::fmt;

/// Errors raised by tree construction, inference, and training.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RdtError {
    /// An argument is outside its legal domain (bad width, nonpositive
    /// learning rate, odd per-class count, ...).
    InvalidParameter(String),
    /// An input vector's length does not match the expected dimension.
    DimensionMismatch { expected: usize, got: usize },
    /// The node id is not part of the topology.
    UnknownNode(usize),
    /// The operation needs an internal node but was given a leaf.
    NotAnInternalNode(usize),
    /// The operation needs a leaf but was given an internal node.
    NotALeaf(usize),
    /// The node sequence is not a root-to-leaf path of the topology.
    InvalidTrajectory(String),
    /// Exact enumeration was requested on a tree above the guard size.
    TreeTooLarge { leaves: usize, limit: usize },
    /// A training step produced a non-finite loss.
    NonFiniteLoss,
    /// Training diverged (non-finite loss) during the given 1-based epoch.
    Diverged { epoch: usize },
    /// The model's `alpha_frozen` flag does not match what the operation
    /// requires.
    FrozenAlphaMismatch { expected: bool },
}

impl fmt::Display for RdtError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RdtError::InvalidParameter(what) => write!(f, "invalid parameter: {what}"),
            RdtError::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            RdtError::UnknownNode(id) => write!(f, "node {id} is not part of the tree"),
            RdtError::NotAnInternalNode(id) => write!(f, "node {id} is not an internal node"),
            RdtError::NotALeaf(id) => write!(f, "node {id} is not a leaf"),
            RdtError::InvalidTrajectory(why) => write!(f, "invalid trajectory: {why}"),
            RdtError::TreeTooLarge { leaves, limit } => {
                write!(f, "tree has {leaves} leaves, enumeration is limited to {limit}")
            }
            RdtError::NonFiniteLoss => write!(f, "loss is not finite"),
            RdtError::Diverged { epoch } => {
                write!(f, "training diverged (non-finite loss) in epoch {epoch}")
            }
            RdtError::FrozenAlphaMismatch { expected } => {
                if *expected {
                    write!(f, "operation requires a model with frozen leaf scores")
                } else {
                    write!(f, "operation requires a model with trainable leaf scores")
                }
            }
        }
    }
}

impl core::error::Error for RdtError {}

pub type Result<T> = core::result::Result<T, RdtError>;
