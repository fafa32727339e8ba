//! Arena-backed binary partition trees shared by every partitioner.
//!
//! A split node sends `x` to its left child iff `value(x) <= threshold`,
//! where `value` is either a projection onto a stored direction or a single
//! coordinate. Split nodes remember the refinement round in which they were
//! created, so a tree grown over several rounds can be cut back to the
//! partition that existed at any earlier round.

use crate::geometry::{dot, CellData};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SplitKind {
    /// Per-cell median of projections.
    Median,
    /// Shared threshold: median over the subtree root plus a random offset.
    Noisy,
    /// Per-cell median along the coordinate of largest spread.
    KdMedian,
    /// Midpoint of the longest side of the cell's bounding box.
    DyadicMidpoint,
}

impl SplitKind {
    pub fn is_median(self) -> bool {
        matches!(self, SplitKind::Median | SplitKind::KdMedian)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitRule {
    /// Projection onto `directions[id]`.
    Projection(usize),
    /// A single coordinate.
    Axis(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub rule: SplitRule,
    pub kind: SplitKind,
    pub threshold: f64,
    pub left: usize,
    pub right: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    /// Level in the full tree.
    pub depth: usize,
    /// Training points in the node.
    pub count: usize,
    pub split: Option<Split>,
    /// Round in which the node was split; meaningless for leaves.
    pub split_round: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionTree {
    dim: usize,
    directions: Vec<Vec<f64>>,
    nodes: Vec<TreeNode>,
}

/// Where a routed point ended up and how many splits it crossed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Route {
    pub node: usize,
    pub steps: usize,
}

pub const ROOT: usize = 0;

impl PartitionTree {
    pub fn new(dim: usize, root_depth: usize, root_count: usize) -> Self {
        Self {
            dim,
            directions: Vec::new(),
            nodes: vec![TreeNode {
                depth: root_depth,
                count: root_count,
                split: None,
                split_round: 0,
            }],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &TreeNode {
        &self.nodes[id]
    }

    pub fn directions(&self) -> &[Vec<f64>] {
        &self.directions
    }

    pub fn add_direction(&mut self, direction: Vec<f64>) -> usize {
        debug_assert_eq!(direction.len(), self.dim);
        self.directions.push(direction);
        self.directions.len() - 1
    }

    /// Turns leaf `node` into a split with two fresh leaf children.
    pub fn split_leaf(
        &mut self,
        node: usize,
        rule: SplitRule,
        kind: SplitKind,
        threshold: f64,
        counts: (usize, usize),
    ) -> (usize, usize) {
        debug_assert!(self.nodes[node].split.is_none());
        let depth = self.nodes[node].depth + 1;
        let left = self.nodes.len();
        let right = left + 1;
        for count in [counts.0, counts.1] {
            self.nodes.push(TreeNode {
                depth,
                count,
                split: None,
                split_round: 0,
            });
        }
        self.nodes[node].split = Some(Split {
            rule,
            kind,
            threshold,
            left,
            right,
        });
        (left, right)
    }

    #[inline]
    pub fn rule_value(&self, rule: SplitRule, x: &[f64]) -> f64 {
        match rule {
            SplitRule::Projection(d) => dot(&self.directions[d], x),
            SplitRule::Axis(a) => x[a],
        }
    }

    #[inline]
    pub fn goes_left(&self, split: &Split, x: &[f64]) -> bool {
        self.rule_value(split.rule, x) <= split.threshold
    }

    /// Routes `x` to a leaf.
    pub fn route(&self, x: &[f64]) -> Route {
        self.route_until(x, usize::MAX)
    }

    /// Routes `x` through splits made in rounds `<= round` only.
    pub fn route_until(&self, x: &[f64], round: usize) -> Route {
        let mut node = ROOT;
        let mut steps = 0;
        while let Some(split) = &self.nodes[node].split {
            if self.nodes[node].split_round > round {
                break;
            }
            node = if self.goes_left(split, x) {
                split.left
            } else {
                split.right
            };
            steps += 1;
        }
        Route { node, steps }
    }

    /// Largest node depth minus the root's.
    pub fn height(&self) -> usize {
        let root = self.nodes[ROOT].depth;
        self.nodes.iter().map(|n| n.depth - root).max().unwrap_or(0)
    }

    /// Replaces leaf `at` by the root of `sub`, tagging every split of
    /// `sub` with `round`. Returns the id each `sub` node received here.
    pub fn graft(&mut self, at: usize, sub: &PartitionTree, round: usize) -> Vec<usize> {
        assert!(self.nodes[at].split.is_none(), "graft target must be a leaf");
        let direction_offset = self.directions.len();
        self.directions.extend(sub.directions.iter().cloned());

        let mut ids = Vec::with_capacity(sub.nodes.len());
        ids.push(at);
        let base = self.nodes.len();
        ids.extend((1..sub.nodes.len()).map(|i| base + i - 1));

        let remap = |split: &Split| Split {
            rule: match split.rule {
                SplitRule::Projection(d) => SplitRule::Projection(d + direction_offset),
                axis => axis,
            },
            kind: split.kind,
            threshold: split.threshold,
            left: ids[split.left],
            right: ids[split.right],
        };
        let root_split = sub.nodes[ROOT].split.as_ref().map(remap);
        let rest: Vec<TreeNode> = sub.nodes[1..]
            .iter()
            .map(|n| TreeNode {
                depth: n.depth,
                count: n.count,
                split: n.split.as_ref().map(remap),
                split_round: round,
            })
            .collect();
        let target = &mut self.nodes[at];
        target.split = root_split;
        target.split_round = round;
        self.nodes.extend(rest);
        ids
    }
}

/// A frontier cell of a subtree.
#[derive(Debug, Clone, PartialEq)]
pub struct Leaf {
    pub node: usize,
    pub cell: CellData,
    /// Set when the leaf holds at most one point and is never split again.
    pub frozen: bool,
}

impl Leaf {
    pub fn new(node: usize, cell: CellData) -> Self {
        let frozen = cell.len() <= 1;
        Self { node, cell, frozen }
    }
}

/// A tree grown from one cell, with its leaf frontier.
#[derive(Debug, Clone, PartialEq)]
pub struct Subtree {
    pub tree: PartitionTree,
    /// Leaves in left-to-right construction order.
    pub leaves: Vec<Leaf>,
    /// Longest root-to-leaf path.
    pub depth: usize,
    /// Level of the root in the full tree.
    pub root_level: usize,
    /// Stream the subtree was drawn from, for replay.
    pub stream: Option<RngStream>,
    /// Random directions drawn while growing this subtree.
    pub directions_drawn: usize,
}

impl Subtree {
    pub fn frontier(&self) -> Vec<CellData> {
        self.leaves.iter().map(|l| l.cell.clone()).collect()
    }

    pub fn frontier_size(&self) -> usize {
        self.leaves.len()
    }

    /// Routes a point from the subtree root and returns the index into
    /// `leaves` of the cell it lands in.
    pub fn leaf_of(&self, x: &[f64]) -> Option<usize> {
        let node = self.tree.route(x).node;
        self.leaves.iter().position(|l| l.node == node)
    }
}
