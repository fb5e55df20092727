//! Model parameters: one routing block per internal node, one score vector
//! per leaf.

use crate::error::{RdtError, Result};
use crate::math;
use crate::rng::SplitRng;
use crate::tree::TreeTopology;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

/// Routing parameters of one internal node: an affine score per child.
///
/// `weights` is child-major (`children * input_dim` values), `biases` has one
/// entry per child. The score of child `c` on input `x` is
/// `weights[c] . x + biases[c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaBlock {
    weights: Vec<f64>,
    biases: Vec<f64>,
    input_dim: usize,
}

impl ThetaBlock {
    pub fn zeros(num_children: usize, input_dim: usize) -> Self {
        ThetaBlock {
            weights: vec![0.0; num_children * input_dim],
            biases: vec![0.0; num_children],
            input_dim,
        }
    }

    pub fn num_children(&self) -> usize {
        self.biases.len()
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn weight_row(&self, child: usize) -> &[f64] {
        &self.weights[child * self.input_dim..(child + 1) * self.input_dim]
    }

    pub fn weight_row_mut(&mut self, child: usize) -> &mut [f64] {
        &mut self.weights[child * self.input_dim..(child + 1) * self.input_dim]
    }

    pub fn bias(&self, child: usize) -> f64 {
        self.biases[child]
    }

    pub fn bias_mut(&mut self, child: usize) -> &mut f64 {
        &mut self.biases[child]
    }

    /// Affine score of `child` on `x`.
    pub fn score(&self, child: usize, x: &[f64]) -> f64 {
        let row = self.weight_row(child);
        let mut s = self.biases[child];
        for (w, v) in row.iter().zip(x) {
            s += w * v;
        }
        s
    }

    /// `self += scale * other`. Shapes must match.
    pub fn add_scaled(&mut self, other: &ThetaBlock, scale: f64) {
        debug_assert_eq!(self.weights.len(), other.weights.len());
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += scale * b;
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            *a += scale * b;
        }
    }

    fn fill_uniform(&mut self, scale: f64, rng: &mut SplitRng) {
        for w in self.weights.iter_mut() {
            *w = rng.uniform(-scale, scale);
        }
        for b in self.biases.iter_mut() {
            *b = rng.uniform(-scale, scale);
        }
    }

    fn values(&self) -> impl Iterator<Item = f64> + '_ {
        // Flat order: per child, weights then bias.
        (0..self.num_children()).flat_map(move |c| {
            self.weight_row(c)
                .iter()
                .copied()
                .chain(core::iter::once(self.biases[c]))
        })
    }
}

/// Parameters attached to one node: a routing block if internal, a score
/// vector if leaf.
#[derive(Debug, Clone, PartialEq)]
pub enum NodeParams {
    Internal(ThetaBlock),
    Leaf(Vec<f64>),
}

/// A reinforced decision tree: topology plus all routing and leaf parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct RdtModel {
    topology: TreeTopology,
    input_dim: usize,
    num_classes: usize,
    params: Vec<NodeParams>,
    alpha_frozen: bool,
}

impl RdtModel {
    /// Fresh model with every parameter drawn uniformly from
    /// `[-init_scale, init_scale]`. Deterministic given `seed`.
    pub fn init(
        topology: TreeTopology,
        input_dim: usize,
        num_classes: usize,
        init_scale: f64,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = SplitRng::seed_from_u64(seed);
        Self::init_with_rng(topology, input_dim, num_classes, init_scale, &mut rng)
    }

    pub(crate) fn init_with_rng(
        topology: TreeTopology,
        input_dim: usize,
        num_classes: usize,
        init_scale: f64,
        rng: &mut SplitRng,
    ) -> Result<Self> {
        if input_dim < 1 {
            return Err(RdtError::InvalidParameter(format!(
                "input_dim must be at least 1, got {input_dim}"
            )));
        }
        if num_classes < 2 {
            return Err(RdtError::InvalidParameter(format!(
                "num_classes must be at least 2, got {num_classes}"
            )));
        }
        if init_scale <= 0.0 || !init_scale.is_finite() {
            return Err(RdtError::InvalidParameter(format!(
                "init_scale must be positive and finite, got {init_scale}"
            )));
        }
        // Draw order is node id ascending, so a seed pins every parameter.
        let params = (0..topology.node_count())
            .map(|id| -> Result<NodeParams> {
                if topology.is_leaf(id) {
                    Ok(NodeParams::Leaf(rng.uniform_vec(num_classes, -init_scale, init_scale)))
                } else {
                    let mut block = ThetaBlock::zeros(topology.children(id)?.len(), input_dim);
                    block.fill_uniform(init_scale, rng);
                    Ok(NodeParams::Internal(block))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(RdtModel { topology, input_dim, num_classes, params, alpha_frozen: false })
    }

    /// Assembles a model from explicit per-node parameters, checking every
    /// invariant. Used by loaders.
    pub fn from_parts(
        topology: TreeTopology,
        input_dim: usize,
        num_classes: usize,
        params: Vec<NodeParams>,
        alpha_frozen: bool,
    ) -> Result<Self> {
        if params.len() != topology.node_count() {
            return Err(RdtError::InvalidParameter(format!(
                "expected parameters for {} nodes, got {}",
                topology.node_count(),
                params.len()
            )));
        }
        for (id, p) in params.iter().enumerate() {
            match p {
                NodeParams::Internal(block) => {
                    if topology.is_leaf(id) {
                        return Err(RdtError::NotAnInternalNode(id));
                    }
                    let children = topology.children(id)?.len();
                    if block.num_children() != children || block.input_dim() != input_dim {
                        return Err(RdtError::InvalidParameter(format!(
                            "theta block of node {id} has the wrong shape"
                        )));
                    }
                    if block.values().any(|v| !v.is_finite()) {
                        return Err(RdtError::InvalidParameter(format!(
                            "theta block of node {id} holds a non-finite value"
                        )));
                    }
                }
                NodeParams::Leaf(alpha) => {
                    if !topology.is_leaf(id) {
                        return Err(RdtError::NotALeaf(id));
                    }
                    if alpha.len() != num_classes {
                        return Err(RdtError::DimensionMismatch {
                            expected: num_classes,
                            got: alpha.len(),
                        });
                    }
                    if alpha.iter().any(|v| !v.is_finite()) {
                        return Err(RdtError::InvalidParameter(format!(
                            "alpha of leaf {id} holds a non-finite value"
                        )));
                    }
                }
            }
        }
        Ok(RdtModel { topology, input_dim, num_classes, params, alpha_frozen })
    }

    pub fn topology(&self) -> &TreeTopology {
        &self.topology
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn alpha_frozen(&self) -> bool {
        self.alpha_frozen
    }

    pub fn set_alpha_frozen(&mut self, frozen: bool) {
        self.alpha_frozen = frozen;
    }

    pub fn theta(&self, node: usize) -> Result<&ThetaBlock> {
        match self.params.get(node) {
            Some(NodeParams::Internal(block)) => Ok(block),
            Some(NodeParams::Leaf(_)) => Err(RdtError::NotAnInternalNode(node)),
            None => Err(RdtError::UnknownNode(node)),
        }
    }

    pub fn theta_mut(&mut self, node: usize) -> Result<&mut ThetaBlock> {
        match self.params.get_mut(node) {
            Some(NodeParams::Internal(block)) => Ok(block),
            Some(NodeParams::Leaf(_)) => Err(RdtError::NotAnInternalNode(node)),
            None => Err(RdtError::UnknownNode(node)),
        }
    }

    pub fn alpha(&self, leaf: usize) -> Result<&[f64]> {
        match self.params.get(leaf) {
            Some(NodeParams::Leaf(alpha)) => Ok(alpha),
            Some(NodeParams::Internal(_)) => Err(RdtError::NotALeaf(leaf)),
            None => Err(RdtError::UnknownNode(leaf)),
        }
    }

    pub fn alpha_mut(&mut self, leaf: usize) -> Result<&mut [f64]> {
        match self.params.get_mut(leaf) {
            Some(NodeParams::Leaf(alpha)) => Ok(alpha),
            Some(NodeParams::Internal(_)) => Err(RdtError::NotALeaf(leaf)),
            None => Err(RdtError::UnknownNode(leaf)),
        }
    }

    pub fn node_params(&self, node: usize) -> Result<&NodeParams> {
        self.params.get(node).ok_or(RdtError::UnknownNode(node))
    }

    /// Total number of scalar parameters.
    pub fn param_count(&self) -> usize {
        self.params
            .iter()
            .map(|p| match p {
                NodeParams::Internal(b) => b.num_children() * (b.input_dim() + 1),
                NodeParams::Leaf(a) => a.len(),
            })
            .sum()
    }

    /// All parameters in canonical flat order: node ids ascending; for an
    /// internal node, each child's weights followed by its bias; for a leaf,
    /// the score vector.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for p in &self.params {
            match p {
                NodeParams::Internal(block) => out.extend(block.values()),
                NodeParams::Leaf(alpha) => out.extend_from_slice(alpha),
            }
        }
        out
    }

    /// Overwrites every parameter from a flat vector in canonical order.
    pub fn assign_from_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(RdtError::DimensionMismatch {
                expected: self.param_count(),
                got: flat.len(),
            });
        }
        let mut it = flat.iter().copied();
        for p in self.params.iter_mut() {
            match p {
                NodeParams::Internal(block) => {
                    for c in 0..block.num_children() {
                        for w in block.weight_row_mut(c) {
                            *w = it.next().unwrap();
                        }
                        *block.bias_mut(c) = it.next().unwrap();
                    }
                }
                NodeParams::Leaf(alpha) => {
                    for a in alpha.iter_mut() {
                        *a = it.next().unwrap();
                    }
                }
            }
        }
        Ok(())
    }

    /// Position of the weight coordinate `(node, child, dim)` in the flat
    /// layout; `dim == input_dim` addresses the bias.
    pub fn flat_index_theta(&self, node: usize, child: usize, dim: usize) -> Result<usize> {
        self.theta(node)?;
        let base = self.flat_offset(node);
        Ok(base + child * (self.input_dim + 1) + dim)
    }

    /// Position of the leaf score coordinate `(leaf, class)` in the flat
    /// layout.
    pub fn flat_index_alpha(&self, leaf: usize, class: usize) -> Result<usize> {
        self.alpha(leaf)?;
        Ok(self.flat_offset(leaf) + class)
    }

    fn flat_offset(&self, node: usize) -> usize {
        self.params[..node]
            .iter()
            .map(|p| match p {
                NodeParams::Internal(b) => b.num_children() * (b.input_dim() + 1),
                NodeParams::Leaf(a) => a.len(),
            })
            .sum()
    }

    /// Start of every node's slice in the flat layout, indexed by node id.
    pub(crate) fn flat_offsets(&self) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(self.params.len());
        let mut off = 0;
        for p in &self.params {
            offsets.push(off);
            off += match p {
                NodeParams::Internal(b) => b.num_children() * (b.input_dim() + 1),
                NodeParams::Leaf(a) => a.len(),
            };
        }
        offsets
    }

    /// L2 norm of all routing parameters.
    pub fn theta_norm(&self) -> f64 {
        let mut sq = 0.0;
        for p in &self.params {
            if let NodeParams::Internal(block) = p {
                for v in block.values() {
                    sq += v * v;
                }
            }
        }
        math::sqrt(sq)
    }

    /// L2 norm of all leaf scores.
    pub fn alpha_norm(&self) -> f64 {
        let mut sq = 0.0;
        for p in &self.params {
            if let NodeParams::Leaf(alpha) = p {
                for v in alpha {
                    sq += v * v;
                }
            }
        }
        math::sqrt(sq)
    }
}
