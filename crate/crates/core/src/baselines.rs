//! Axis-parallel partitioners for comparison: k-d trees split at the median
//! of the coordinate with the largest spread, dyadic trees bisect the longest
//! side of the cell's bounding box. Both grow level by level until the
//! frontier's average data diameter reaches the target, like the random
//! projection core, but are fully deterministic.

use crate::error::{invalid, Result};
use crate::geometry::{diameter_with, weighted_rms, CellData, DiameterMode, PointSet};
use crate::regress::{CellContext, Partitioner, Refinement};
use crate::rng::RngStream;
use crate::rptree::{default_depth_cap, median_split_indices};
use crate::tree::{Leaf, PartitionTree, SplitKind, SplitRule, Subtree, ROOT};

/// Relative inflation applied to data-derived root boxes so that extreme
/// points sit strictly inside.
pub const BOX_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct BoundingBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoundingBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return invalid("box corners must have the same positive dimension");
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(l <= h)) {
            return invalid("box lower corner exceeds upper corner");
        }
        Ok(Self { lo, hi })
    }

    pub fn unit(dim: usize) -> Self {
        Self {
            lo: vec![0.0; dim],
            hi: vec![1.0; dim],
        }
    }

    /// Smallest box holding the indexed points, inflated by [`BOX_MARGIN`]
    /// relative to each side (or to the coordinate scale for flat sides).
    pub fn around(data: &PointSet, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return invalid("cannot bound an empty cell");
        }
        let dim = data.dim();
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for &i in indices {
            for (k, &c) in data.point(i).iter().enumerate() {
                lo[k] = lo[k].min(c);
                hi[k] = hi[k].max(c);
            }
        }
        for k in 0..dim {
            let scale = (hi[k] - lo[k]).max(lo[k].abs().max(hi[k].abs())).max(1.0);
            let margin = BOX_MARGIN * if hi[k] > lo[k] { hi[k] - lo[k] } else { scale };
            lo[k] -= margin;
            hi[k] += margin;
        }
        Ok(Self { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    /// Longest side, lowest axis on ties.
    pub fn longest_axis(&self) -> usize {
        let mut best = 0;
        for k in 1..self.dim() {
            if self.side(k) > self.side(best) {
                best = k;
            }
        }
        best
    }

    pub fn side(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }

    pub fn bisect(&self, axis: usize) -> (f64, Self, Self) {
        let mid = self.lo[axis] + self.side(axis) / 2.0;
        let mut left = self.clone();
        let mut right = self.clone();
        left.hi[axis] = mid;
        right.lo[axis] = mid;
        (mid, left, right)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(c, (l, h))| l <= c && c <= h)
    }
}

/// Output of an axis-parallel build.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisPartition {
    pub subtree: Subtree,
    /// Box of each leaf (dyadic builds only), parallel to `subtree.leaves`.
    pub leaf_boxes: Option<Vec<BoundingBox>>,
    /// The depth cap was reached before the target; the frontier is returned as is.
    pub cap_exceeded: bool,
}

struct AxisCell {
    node: usize,
    indices: Vec<usize>,
    depth: usize,
    diam: f64,
    bbox: Option<BoundingBox>,
}

enum Rule {
    Kd,
    Dyadic,
}

/// Coordinate with the largest range over `indices`, lowest axis on ties.
fn widest_axis(data: &PointSet, indices: &[usize]) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for k in 0..data.dim() {
        let (lo, hi) = indices.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
            let c = data.point(i)[k];
            (lo.min(c), hi.max(c))
        });
        if hi - lo > best.1 {
            best = (k, hi - lo);
        }
    }
    best.0
}

fn grow_axis(
    root: &CellData,
    root_box: Option<BoundingBox>,
    data: &PointSet,
    target: f64,
    depth_cap: usize,
    rule: Rule,
) -> Result<AxisPartition> {
    if !(target >= 0.0) {
        return invalid(format!("target diameter {target} must be nonnegative"));
    }
    if let Some(&i) = root.indices.iter().find(|&&i| i >= data.len()) {
        return invalid(format!("sample index {i} out of range"));
    }
    let mode = DiameterMode::Exact;
    let level = root.depth;
    let mut tree = PartitionTree::new(data.dim(), level, root.len());
    let mut frontier = vec![AxisCell {
        node: ROOT,
        indices: root.indices.clone(),
        depth: level,
        diam: diameter_with(mode, data, &root.indices),
        bbox: root_box,
    }];
    let mut cap_exceeded = false;

    for i in 1.. {
        let avg = weighted_rms(frontier.iter().map(|c| (c.indices.len(), c.diam)));
        if avg <= target {
            break;
        }
        if i > depth_cap {
            cap_exceeded = true;
            break;
        }
        let mut next = Vec::with_capacity(frontier.len() * 2);
        for cell in frontier {
            if cell.indices.len() <= 1 {
                next.push(cell);
                continue;
            }
            let (axis, threshold, left, right, boxes, kind) = match rule {
                Rule::Kd => {
                    let axis = widest_axis(data, &cell.indices);
                    let (l, r, t) = median_split_indices(data, &cell.indices, |x| x[axis]);
                    (axis, t, l, r, None, SplitKind::KdMedian)
                }
                Rule::Dyadic => {
                    let bbox = cell.bbox.as_ref().expect("dyadic cells carry boxes");
                    let axis = bbox.longest_axis();
                    let (mid, lb, rb) = bbox.bisect(axis);
                    let (l, r): (Vec<usize>, Vec<usize>) =
                        cell.indices.iter().partition(|&&j| data.point(j)[axis] <= mid);
                    (axis, mid, l, r, Some((lb, rb)), SplitKind::DyadicMidpoint)
                }
            };
            let (l_node, r_node) = tree.split_leaf(
                cell.node,
                SplitRule::Axis(axis),
                kind,
                threshold,
                (left.len(), right.len()),
            );
            let (lb, rb) = match boxes {
                Some((lb, rb)) => (Some(lb), Some(rb)),
                None => (None, None),
            };
            for (node, indices, bbox) in [(l_node, left, lb), (r_node, right, rb)] {
                let diam = if indices.len() == cell.indices.len() {
                    cell.diam
                } else {
                    diameter_with(mode, data, &indices)
                };
                next.push(AxisCell {
                    node,
                    indices,
                    depth: cell.depth + 1,
                    diam,
                    bbox,
                });
            }
        }
        frontier = next;
    }

    let depth = tree.height();
    let mut leaves = Vec::with_capacity(frontier.len());
    let mut boxes = Vec::new();
    for cell in frontier {
        leaves.push(Leaf::new(cell.node, CellData::new(cell.indices, cell.depth)));
        if let Some(b) = cell.bbox {
            boxes.push(b);
        }
    }
    let leaf_boxes = (!boxes.is_empty()).then_some(boxes);
    Ok(AxisPartition {
        subtree: Subtree {
            tree,
            leaves,
            depth,
            root_level: level,
            stream: None,
            directions_drawn: 0,
        },
        leaf_boxes,
        cap_exceeded,
    })
}

/// k-d tree build: per-cell median along the coordinate of largest spread.
pub fn kd_partition(
    root: &CellData,
    data: &PointSet,
    target: f64,
    depth_cap: usize,
) -> Result<AxisPartition> {
    grow_axis(root, None, data, target, depth_cap, Rule::Kd)
}

/// Dyadic build: bisect the longest side of each cell's box at its midpoint.
pub fn dyadic_partition(
    root: &CellData,
    root_box: &BoundingBox,
    data: &PointSet,
    target: f64,
    depth_cap: usize,
) -> Result<AxisPartition> {
    if root_box.dim() != data.dim() {
        return invalid("bounding box dimension does not match the data");
    }
    grow_axis(root, Some(root_box.clone()), data, target, depth_cap, Rule::Dyadic)
}

/// [`kd_partition`] behind the adaptive-loop interface.
#[derive(Debug, Clone, Copy, Default)]
pub struct KdPartitioner {
    pub depth_cap: Option<usize>,
}

impl Partitioner for KdPartitioner {
    fn refine(
        &self,
        ctx: &CellContext<'_>,
        data: &PointSet,
        _delta: f64,
        _stream: RngStream,
    ) -> Result<Refinement> {
        let cap = cap_for(self.depth_cap, data.len(), ctx.cell.depth);
        let built = kd_partition(ctx.cell, data, ctx.diameter / 2.0, cap)?;
        Ok(Refinement {
            subtree: built.subtree,
            leaf_boxes: None,
            directions_drawn: 0,
        })
    }
}

/// [`dyadic_partition`] behind the adaptive-loop interface; the root box is
/// the inflated data bounding box.
#[derive(Debug, Clone, Copy, Default)]
pub struct DyadicPartitioner {
    pub depth_cap: Option<usize>,
}

impl Partitioner for DyadicPartitioner {
    fn refine(
        &self,
        ctx: &CellContext<'_>,
        data: &PointSet,
        _delta: f64,
        _stream: RngStream,
    ) -> Result<Refinement> {
        let Some(bbox) = ctx.bbox else {
            return invalid("dyadic refinement needs the cell's bounding box");
        };
        let cap = cap_for(self.depth_cap, data.len(), ctx.cell.depth);
        let built = dyadic_partition(ctx.cell, bbox, data, ctx.diameter / 2.0, cap)?;
        Ok(Refinement {
            subtree: built.subtree,
            leaf_boxes: built.leaf_boxes,
            directions_drawn: 0,
        })
    }

    fn root_box(&self, data: &PointSet) -> Option<BoundingBox> {
        let all: Vec<usize> = (0..data.len()).collect();
        BoundingBox::around(data, &all).ok()
    }
}

fn cap_for(cap: Option<usize>, n: usize, level: usize) -> usize {
    match cap {
        Some(c) => c.saturating_sub(level),
        None => default_depth_cap(n, level),
    }
}
