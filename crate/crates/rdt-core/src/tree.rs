//! Tree topology: node ids, parent/child structure, and the complete-tree
//! builder used by the experiments.

use crate::error::{RdtError, Result};
use alloc::format;
use alloc::vec::Vec;

/// Node id of the root.
pub const ROOT: usize = 0;

/// Parent/children structure of a tree.
///
/// Node ids are assigned breadth-first from the root (root = 0), so for a
/// complete tree every internal node id is smaller than every leaf id. The
/// type itself places no constraint on the shape, but the only public
/// constructor builds complete `W`-ary trees of a fixed depth.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeTopology {
    width: usize,
    depth: usize,
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
}

impl TreeTopology {
    /// Builds a complete tree where every internal node has `width` children
    /// and every leaf sits at `depth`.
    pub fn complete(width: usize, depth: usize) -> Result<Self> {
        if width < 2 {
            return Err(RdtError::InvalidParameter(format!(
                "tree width must be at least 2, got {width}"
            )));
        }
        if depth < 1 {
            return Err(RdtError::InvalidParameter(format!(
                "tree depth must be at least 1, got {depth}"
            )));
        }
        // node_count = (W^(D+1) - 1) / (W - 1); reject sizes that overflow.
        let mut node_count: usize = 1;
        let mut level_size: usize = 1;
        for _ in 0..depth {
            level_size = level_size.checked_mul(width).ok_or_else(|| {
                RdtError::InvalidParameter(format!("tree ({width}, {depth}) is too large"))
            })?;
            node_count = node_count.checked_add(level_size).ok_or_else(|| {
                RdtError::InvalidParameter(format!("tree ({width}, {depth}) is too large"))
            })?;
        }
        let internal_count = node_count - level_size;

        let mut parent = Vec::with_capacity(node_count);
        let mut children = Vec::with_capacity(node_count);
        parent.push(None);
        for id in 1..node_count {
            parent.push(Some((id - 1) / width));
        }
        for id in 0..node_count {
            if id < internal_count {
                children.push((0..width).map(|c| id * width + c + 1).collect());
            } else {
                children.push(Vec::new());
            }
        }
        Ok(TreeTopology { width, depth, parent, children })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn node_count(&self) -> usize {
        self.parent.len()
    }

    pub fn leaf_count(&self) -> usize {
        self.children.iter().filter(|c| c.is_empty()).count()
    }

    pub fn internal_count(&self) -> usize {
        self.node_count() - self.leaf_count()
    }

    pub fn contains(&self, id: usize) -> bool {
        id < self.node_count()
    }

    pub fn is_leaf(&self, id: usize) -> bool {
        self.contains(id) && self.children[id].is_empty()
    }

    pub fn children(&self, id: usize) -> Result<&[usize]> {
        if !self.contains(id) {
            return Err(RdtError::UnknownNode(id));
        }
        Ok(&self.children[id])
    }

    pub fn parent(&self, id: usize) -> Result<Option<usize>> {
        if !self.contains(id) {
            return Err(RdtError::UnknownNode(id));
        }
        Ok(self.parent[id])
    }

    /// Number of edges between the root and `id`.
    pub fn node_depth(&self, id: usize) -> Result<usize> {
        if !self.contains(id) {
            return Err(RdtError::UnknownNode(id));
        }
        let mut d = 0;
        let mut cur = id;
        while let Some(p) = self.parent[cur] {
            cur = p;
            d += 1;
        }
        Ok(d)
    }

    /// Node ids of all leaves, ascending.
    pub fn leaves(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.node_count()).filter(|&id| self.children[id].is_empty())
    }

    /// Node ids of all internal nodes, ascending.
    pub fn internal_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.node_count()).filter(|&id| !self.children[id].is_empty())
    }

    /// Index of `child` within `children(node)`.
    pub fn child_index(&self, node: usize, child: usize) -> Result<usize> {
        self.children(node)?
            .iter()
            .position(|&c| c == child)
            .ok_or_else(|| {
                RdtError::InvalidTrajectory(format!("node {child} is not a child of node {node}"))
            })
    }
}

/// A root-to-leaf path together with the probability of each step.
///
/// `nodes` runs from the root to a leaf; `step_probs[i]` is the probability
/// with which `nodes[i+1]` was chosen at `nodes[i]`, so it has one entry per
/// edge.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub nodes: Vec<usize>,
    pub step_probs: Vec<f64>,
}

impl Trajectory {
    /// The leaf this trajectory ends at.
    pub fn leaf(&self) -> usize {
        *self.nodes.last().expect("trajectory is never empty")
    }

    /// Product of the recorded step probabilities.
    pub fn recorded_probability(&self) -> f64 {
        self.step_probs.iter().product()
    }

    /// Checks that the node sequence is a root-to-leaf path of `topology`.
    pub fn validate(&self, topology: &TreeTopology) -> Result<()> {
        let first = *self
            .nodes
            .first()
            .ok_or_else(|| RdtError::InvalidTrajectory("empty node sequence".into()))?;
        if first != ROOT {
            return Err(RdtError::InvalidTrajectory(format!(
                "trajectory starts at node {first}, not the root"
            )));
        }
        for pair in self.nodes.windows(2) {
            if !topology.children(pair[0])?.contains(&pair[1]) {
                return Err(RdtError::InvalidTrajectory(format!(
                    "node {} is not a child of node {}",
                    pair[1], pair[0]
                )));
            }
        }
        let last = *self.nodes.last().unwrap();
        if !topology.is_leaf(last) {
            return Err(RdtError::InvalidTrajectory(format!(
                "trajectory ends at internal node {last}"
            )));
        }
        if self.step_probs.len() + 1 != self.nodes.len() {
            return Err(RdtError::InvalidTrajectory(format!(
                "{} nodes but {} step probabilities",
                self.nodes.len(),
                self.step_probs.len()
            )));
        }
        Ok(())
    }
}
