//! Randomized hyperplane splitting.
//!
//! [`basic_rptree`] grows a subtree level by level until the average data
//! diameter of its frontier drops to a target. Every level draws one random
//! direction shared by all cells. Levels alternate between per-cell median
//! splits, which keep the tree balanced, and noisy splits, which cut every
//! cell at one common threshold (median over the subtree root plus a random
//! offset). The parity of the global level decides which kind a level gets.
//!
//! [`core_rptree`] repeats the build with independent streams and keeps the
//! shallowest result.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::geometry::{diameter_with, dot, weighted_rms, CellData, DiameterMode, PointSet};
use crate::rng::RngStream;
use crate::tree::{Leaf, PartitionTree, SplitKind, SplitRule, Subtree, ROOT};

/// Which points the noisy-split median is taken over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoisyMedianScope {
    /// Median over the points of the subtree root, shared by all cells.
    #[default]
    Root,
    /// Median over each cell's own points.
    Cell,
}

impl NoisyMedianScope {
    pub fn as_str(self) -> &'static str {
        match self {
            NoisyMedianScope::Root => "root",
            NoisyMedianScope::Cell => "cell",
        }
    }
}

impl std::str::FromStr for NoisyMedianScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "root" => Ok(NoisyMedianScope::Root),
            "cell" => Ok(NoisyMedianScope::Cell),
            other => invalid(format!("unknown noisy median scope '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SplitOptions {
    pub diameter_mode: DiameterMode,
    pub noisy_median_scope: NoisyMedianScope,
    /// Overrides the default cap of `6 * ceil(log2 n)` levels for the full tree.
    pub depth_cap: Option<usize>,
    /// Overrides the boosted repetition count `ceil(log2(6 n^2 / delta))`.
    pub repetitions: Option<usize>,
}

/// `ceil(log2(n))`, with `ceil(log2(0)) = ceil(log2(1)) = 0`.
pub fn ceil_log2(n: usize) -> usize {
    if n <= 1 {
        0
    } else {
        (usize::BITS - (n - 1).leading_zeros()) as usize
    }
}

/// Height bound for the full tree over `n` samples.
pub fn tree_height_bound(n: usize) -> usize {
    6 * ceil_log2(n)
}

/// Levels a subtree rooted at `level` may grow before it hits the global
/// height bound.
pub fn default_depth_cap(n: usize, level: usize) -> usize {
    tree_height_bound(n).saturating_sub(level)
}

/// Number of boosted repetitions, `ceil(log2(6 n^2 / delta))`.
pub fn repetitions(n: usize, delta: f64) -> Result<usize> {
    if !(delta > 0.0 && delta < 1.0) {
        return invalid(format!("confidence {delta} is not in (0, 1)"));
    }
    let n = n.max(1) as f64;
    Ok((6.0 * n * n / delta).log2().ceil() as usize)
}

/// Gaussian direction with i.i.d. coordinates of variance `1 / dim`.
pub fn sample_direction<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<Vec<f64>> {
    if dim == 0 {
        return invalid("direction dimension must be positive");
    }
    let scale = 1.0 / (dim as f64).sqrt();
    loop {
        let v: Vec<f64> = (0..dim)
            .map(|_| rng.sample::<f64, _>(StandardNormal) * scale)
            .collect();
        if v.iter().any(|&c| c != 0.0) {
            return Ok(v);
        }
    }
}

/// Offset uniform on `[-6 / sqrt(dim), 6 / sqrt(dim)] * root_diam`.
pub fn sample_noise_offset<R: Rng + ?Sized>(root_diam: f64, dim: usize, rng: &mut R) -> f64 {
    let u: f64 = rng.random_range(-1.0..=1.0);
    u * 6.0 / (dim.max(1) as f64).sqrt() * root_diam
}

fn sorted_projections(data: &PointSet, indices: &[usize], direction: &[f64]) -> Vec<(f64, usize)> {
    let mut proj: Vec<(f64, usize)> = indices
        .iter()
        .map(|&i| (dot(direction, data.point(i)), i))
        .collect();
    proj.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    proj
}

/// Median of a sorted slice; the midpoint of the middle pair for even length.
fn median_sorted(values: &[(f64, usize)]) -> f64 {
    let m = values.len();
    if m % 2 == 1 {
        values[m / 2].0
    } else {
        midpoint(values[m / 2 - 1].0, values[m / 2].0)
    }
}

/// A point strictly below `hi` when `lo < hi`, so that `lo` routes left and
/// `hi` routes right.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid < hi {
        mid
    } else {
        lo
    }
}

/// Balanced split at the median of projections onto `direction`.
///
/// The first `ceil(m/2)` points in projection order (ties broken by sample
/// index) go left. The routing threshold is the midpoint between the last
/// left and the first right projection.
pub fn per_cell_median_split(
    cell: &CellData,
    data: &PointSet,
    direction: &[f64],
) -> Result<(CellData, CellData, f64)> {
    if cell.len() < 2 {
        return invalid(format!("median split needs at least 2 points, got {}", cell.len()));
    }
    if direction.len() != data.dim() {
        return invalid("direction dimension does not match the data");
    }
    if let Some(&i) = cell.indices.iter().find(|&&i| i >= data.len()) {
        return invalid(format!("sample index {i} out of range"));
    }
    let (left, right, threshold) = median_split_indices(data, &cell.indices, |x| dot(direction, x));
    Ok((
        CellData::new(left, cell.depth + 1),
        CellData::new(right, cell.depth + 1),
        threshold,
    ))
}

pub(crate) fn median_split_indices(
    data: &PointSet,
    indices: &[usize],
    value: impl Fn(&[f64]) -> f64,
) -> (Vec<usize>, Vec<usize>, f64) {
    let mut proj: Vec<(f64, usize)> = indices
        .iter()
        .map(|&i| (value(data.point(i)), i))
        .collect();
    proj.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let half = proj.len().div_ceil(2);
    let threshold = midpoint(proj[half - 1].0, proj[half].0);
    let left = proj[..half].iter().map(|p| p.1).collect();
    let right = proj[half..].iter().map(|p| p.1).collect();
    (left, right, threshold)
}

struct WorkCell {
    node: usize,
    indices: Vec<usize>,
    depth: usize,
    diam: f64,
}

/// Grows one randomized subtree from `root` until the average data diameter
/// of its frontier is at most `target`.
///
/// `root.depth` is the root's level in the full tree and fixes the
/// alternation: a level whose global index is odd is a noisy level. Fails
/// with [`Error::CapExceeded`] if more than `depth_cap` levels are needed.
pub fn basic_rptree(
    root: &CellData,
    data: &PointSet,
    target: f64,
    depth_cap: usize,
    stream: RngStream,
    options: &SplitOptions,
) -> Result<Subtree> {
    validate_root(root, data, target)?;
    let root_diam = diameter_with(options.diameter_mode, data, &root.indices);
    grow(root, data, target, depth_cap, stream, root_diam, options)
}

fn validate_root(root: &CellData, data: &PointSet, target: f64) -> Result<()> {
    if !(target >= 0.0) {
        return invalid(format!("target diameter {target} must be nonnegative"));
    }
    if let Some(&i) = root.indices.iter().find(|&&i| i >= data.len()) {
        return invalid(format!("sample index {i} out of range for {} points", data.len()));
    }
    Ok(())
}

fn grow(
    root: &CellData,
    data: &PointSet,
    target: f64,
    depth_cap: usize,
    stream: RngStream,
    root_diam: f64,
    options: &SplitOptions,
) -> Result<Subtree> {
    let dim = data.dim();
    let level = root.depth;
    let mut rng = stream.rng();
    let mut tree = PartitionTree::new(dim, level, root.len());
    let mut frontier = vec![WorkCell {
        node: ROOT,
        indices: root.indices.clone(),
        depth: level,
        diam: root_diam,
    }];
    let mut directions_drawn = 0;

    for i in 1.. {
        let avg = weighted_rms(frontier.iter().map(|w| (w.indices.len(), w.diam)));
        if avg <= target {
            break;
        }
        if i > depth_cap {
            return Err(Error::CapExceeded {
                cap: depth_cap,
                target,
                level,
                points: root.len(),
            });
        }
        let direction = sample_direction(dim, &mut rng)?;
        let offset = sample_noise_offset(root_diam, dim, &mut rng);
        directions_drawn += 1;
        let noisy = (level + i) % 2 == 1;
        let shared_threshold = (noisy && options.noisy_median_scope == NoisyMedianScope::Root)
            .then(|| median_sorted(&sorted_projections(data, &root.indices, &direction)) + offset);
        let dir_id = tree.add_direction(direction);
        let direction = &tree.directions()[dir_id];

        let mut next = Vec::with_capacity(frontier.len() * 2);
        let mut children = Vec::new();
        for cell in frontier {
            if cell.indices.len() <= 1 {
                next.push(cell);
                continue;
            }
            let (left, right, threshold, kind) = if noisy {
                let t = match shared_threshold {
                    Some(t) => t,
                    None => {
                        median_sorted(&sorted_projections(data, &cell.indices, direction)) + offset
                    }
                };
                let (left, right): (Vec<usize>, Vec<usize>) = cell
                    .indices
                    .iter()
                    .partition(|&&j| dot(direction, data.point(j)) <= t);
                (left, right, t, SplitKind::Noisy)
            } else {
                let (l, r, t) = median_split_indices(data, &cell.indices, |x| dot(direction, x));
                (l, r, t, SplitKind::Median)
            };
            children.push((cell, left, right, threshold, kind));
        }
        for (cell, left, right, threshold, kind) in children {
            let (l, r) = tree.split_leaf(
                cell.node,
                SplitRule::Projection(dir_id),
                kind,
                threshold,
                (left.len(), right.len()),
            );
            for (node, indices) in [(l, left), (r, right)] {
                let diam = if indices.len() == cell.indices.len() {
                    cell.diam
                } else {
                    diameter_with(options.diameter_mode, data, &indices)
                };
                next.push(WorkCell {
                    node,
                    indices,
                    depth: cell.depth + 1,
                    diam,
                });
            }
        }
        frontier = next;
    }

    let depth = tree.height();
    let leaves = frontier
        .into_iter()
        .map(|w| Leaf::new(w.node, CellData::new(w.indices, w.depth)))
        .collect();
    Ok(Subtree {
        tree,
        leaves,
        depth,
        root_level: level,
        stream: Some(stream),
        directions_drawn,
    })
}

/// Result of a boosted build, with bookkeeping over all repetitions.
#[derive(Debug, Clone)]
pub struct CoreBuild {
    pub subtree: Subtree,
    pub repetitions: usize,
    /// Repetitions that hit the depth cap.
    pub failed: usize,
    /// Directions drawn across every repetition.
    pub directions_drawn: usize,
    pub root_diameter: f64,
}

/// Runs `ceil(log2(6 n^2 / delta))` independent [`basic_rptree`] builds and
/// returns the shallowest, preferring the lowest repetition index on ties.
/// `n` is the total sample size, `data.len()`.
pub fn core_rptree(
    root: &CellData,
    data: &PointSet,
    target: f64,
    delta: f64,
    stream: RngStream,
    options: &SplitOptions,
) -> Result<Subtree> {
    core_rptree_detailed(root, data, target, delta, stream, options).map(|b| b.subtree)
}

pub fn core_rptree_detailed(
    root: &CellData,
    data: &PointSet,
    target: f64,
    delta: f64,
    stream: RngStream,
    options: &SplitOptions,
) -> Result<CoreBuild> {
    validate_root(root, data, target)?;
    let n = data.len();
    let reps = match options.repetitions {
        Some(r) => r.max(1),
        None => repetitions(n, delta)?,
    };
    if !(delta > 0.0 && delta < 1.0) {
        return invalid(format!("confidence {delta} is not in (0, 1)"));
    }
    let cap = options
        .depth_cap
        .map(|c| c.saturating_sub(root.depth))
        .unwrap_or_else(|| default_depth_cap(n, root.depth));
    let root_diameter = diameter_with(options.diameter_mode, data, &root.indices);

    let trivial = root.len() <= 1 || root_diameter <= target;
    let reps = if trivial { 1 } else { reps };
    let attempts: Vec<Result<Subtree>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            grow(
                root,
                data,
                target,
                cap,
                stream.with_repetition(r as u64),
                root_diameter,
                options,
            )
        })
        .collect();

    let mut failed = 0;
    let mut directions_drawn = 0;
    let mut best: Option<Subtree> = None;
    for attempt in attempts {
        match attempt {
            Ok(sub) => {
                directions_drawn += sub.directions_drawn;
                if best.as_ref().is_none_or(|b| sub.depth < b.depth) {
                    best = Some(sub);
                }
            }
            Err(Error::CapExceeded { .. }) => {
                failed += 1;
                // A failed build drew one direction per level up to the cap.
                directions_drawn += cap;
            }
            Err(e) => return Err(e),
        }
    }
    match best {
        Some(subtree) => Ok(CoreBuild {
            subtree,
            repetitions: reps,
            failed,
            directions_drawn,
            root_diameter,
        }),
        None => Err(Error::AllRepetitionsFailed {
            repetitions: reps,
            cap,
            level: root.depth,
            points: root.len(),
            target,
        }),
    }
}
