//! Adaptive partitioning and the piecewise-constant regressor.
//!
//! [`adaptive_rptree`] refines a partition in rounds. Round `i` replaces
//! every cell `A` of the previous frontier by the leaves of a boosted subtree
//! that halves `A`'s data diameter, so the average data diameter at least
//! halves per round. After each round a stopping rule decides whether to
//! stop and which round's partition to keep:
//!
//! - cross-validation: once the frontier has zero diameter or reaches level
//!   `2 log2 n`, keep the round with the lowest risk on a held-out sample;
//! - automatic stopping: once the level exceeds a diameter-dependent
//!   threshold, keep the better of the last two rounds under the penalized
//!   objective `alpha(n)/n * |A| + diam(A)^2`.

use std::sync::Arc;

use rayon::prelude::*;

use crate::baselines::BoundingBox;
use crate::error::{invalid, Error, Result};
use crate::geometry::{diameter_with, weighted_rms, CellData, DiameterMode, PointSet};
use crate::rng::RngStream;
use crate::rptree::{core_rptree_detailed, SplitOptions};
use crate::tree::{PartitionTree, Subtree, ROOT};

/// Paired inputs and outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: PointSet,
    pub y: PointSet,
}

impl Dataset {
    pub fn new(x: PointSet, y: PointSet) -> Result<Self> {
        if x.len() != y.len() {
            return invalid(format!("{} inputs but {} outputs", x.len(), y.len()));
        }
        Ok(Self { x, y })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.x.dim()
    }

    pub fn output_dim(&self) -> usize {
        self.y.dim()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaParams {
    pub n: usize,
    pub delta: f64,
}

/// `log2(n)^2 * max(1, log2 log2(n / delta)) + log2(1 / delta)`.
pub fn alpha(params: AlphaParams) -> Result<f64> {
    let AlphaParams { n, delta } = params;
    if n < 2 {
        return invalid(format!("alpha needs n >= 2, got {n}"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return invalid(format!("confidence {delta} is not in (0, 1)"));
    }
    let n = n as f64;
    let loglog = (n / delta).log2().log2().max(1.0);
    Ok(n.log2().powi(2) * loglog + (1.0 / delta).log2())
}

/// The frontier after one refinement round.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionSnapshot {
    pub round: usize,
    pub cells: Vec<CellData>,
    /// Tree node of each cell, parallel to `cells`.
    pub nodes: Vec<usize>,
    /// Deepest cell level.
    pub level: usize,
    pub size: usize,
    pub avg_diam: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionRule {
    CrossValidation,
    AutoStop,
}

impl SelectionRule {
    pub fn as_str(self) -> &'static str {
        match self {
            SelectionRule::CrossValidation => "cv",
            SelectionRule::AutoStop => "autostop",
        }
    }
}

impl std::str::FromStr for SelectionRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cv" => Ok(SelectionRule::CrossValidation),
            "autostop" => Ok(SelectionRule::AutoStop),
            other => invalid(format!("unknown selector '{other}'")),
        }
    }
}

/// How the partition was chosen.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub rule: SelectionRule,
    /// Round after which the stopping rule fired.
    pub fired_round: usize,
    pub chosen_round: usize,
    /// Held-out risk of every candidate round (cross-validation only).
    pub cv_risks: Vec<f64>,
    /// Penalized objective of the two compared rounds (automatic stopping only).
    pub autostop: Option<AutoStopChoice>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubtreeDepth {
    pub round: usize,
    pub cell: usize,
    pub depth: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub snapshots: Vec<PartitionSnapshot>,
    pub subtree_depths: Vec<SubtreeDepth>,
    pub selection: Selection,
    /// Random directions drawn over the whole build, discarded repetitions included.
    pub directions_drawn: usize,
}

/// Maximum depth over every subtree built while refining.
pub fn decrease_rate(trace: &Trace) -> Result<usize> {
    trace
        .subtree_depths
        .iter()
        .map(|s| s.depth)
        .max()
        .ok_or_else(|| Error::InvalidInput("trace records no subtree builds".into()))
}

/// A frozen partition with per-cell output means.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressorModel {
    tree: Arc<PartitionTree>,
    frontier: PartitionSnapshot,
    cell_means: Vec<Option<Vec<f64>>>,
    cell_of_node: Vec<usize>,
    default_output: Vec<f64>,
}

const NOT_FRONTIER: usize = usize::MAX;

impl RegressorModel {
    pub fn tree(&self) -> &PartitionTree {
        &self.tree
    }

    pub fn frontier(&self) -> &PartitionSnapshot {
        &self.frontier
    }

    pub fn cell_means(&self) -> &[Option<Vec<f64>>] {
        &self.cell_means
    }

    pub fn default_output(&self) -> &[f64] {
        &self.default_output
    }

    pub fn input_dim(&self) -> usize {
        self.tree.dim()
    }

    /// Index into the frontier of the cell `x` falls in, and the number of
    /// splits crossed to get there.
    pub fn locate(&self, x: &[f64]) -> Result<(usize, usize)> {
        if x.len() != self.tree.dim() {
            return invalid(format!(
                "query has dimension {}, model expects {}",
                x.len(),
                self.tree.dim()
            ));
        }
        let route = self.tree.route_until(x, self.frontier.round);
        let cell = self.cell_of_node[route.node];
        debug_assert_ne!(cell, NOT_FRONTIER);
        Ok((cell, route.steps))
    }

    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.predict_ref(x).map(<[f64]>::to_vec)
    }

    pub fn predict_ref(&self, x: &[f64]) -> Result<&[f64]> {
        let (cell, _) = self.locate(x)?;
        Ok(self.cell_means[cell]
            .as_deref()
            .unwrap_or(&self.default_output))
    }

    /// Prediction together with the routing path length.
    pub fn predict_with_steps(&self, x: &[f64]) -> Result<(&[f64], usize)> {
        let (cell, steps) = self.locate(x)?;
        let value = self.cell_means[cell]
            .as_deref()
            .unwrap_or(&self.default_output);
        Ok((value, steps))
    }
}

/// Fits the per-cell output means of `frontier`. The default output for
/// cells without training points is the global training mean.
pub fn fit_cell_means(
    tree: Arc<PartitionTree>,
    frontier: &PartitionSnapshot,
    data: &Dataset,
) -> Result<RegressorModel> {
    if data.is_empty() {
        return invalid("cannot fit means without training data");
    }
    let out_dim = data.output_dim();
    let mut cell_of_node = vec![NOT_FRONTIER; tree.nodes().len()];
    let mut seen = vec![false; data.len()];
    let mut cell_means = Vec::with_capacity(frontier.cells.len());
    for (c, (cell, &node)) in frontier.cells.iter().zip(&frontier.nodes).enumerate() {
        if node >= cell_of_node.len() {
            return invalid(format!("frontier node {node} is not in the tree"));
        }
        cell_of_node[node] = c;
        if cell.is_empty() {
            cell_means.push(None);
            continue;
        }
        let mut sum = vec![0.0; out_dim];
        for &i in &cell.indices {
            if i >= data.len() || std::mem::replace(&mut seen[i], true) {
                return invalid(format!("sample {i} is out of range or repeated in the frontier"));
            }
            for (s, y) in sum.iter_mut().zip(data.y.point(i)) {
                *s += y;
            }
        }
        let m = cell.len() as f64;
        cell_means.push(Some(sum.into_iter().map(|s| s / m).collect()));
    }
    if seen.iter().any(|s| !s) {
        return invalid("frontier does not cover every training sample");
    }
    let mut default_output = vec![0.0; out_dim];
    for y in data.y.iter() {
        for (d, v) in default_output.iter_mut().zip(y) {
            *d += v;
        }
    }
    for d in &mut default_output {
        *d /= data.len() as f64;
    }
    Ok(RegressorModel {
        tree,
        frontier: frontier.clone(),
        cell_means,
        cell_of_node,
        default_output,
    })
}

/// Mean squared Euclidean error of the model on `test`.
pub fn empirical_risk(model: &RegressorModel, test: &Dataset) -> Result<f64> {
    if test.is_empty() {
        return invalid("empirical risk needs a nonempty test set");
    }
    if test.output_dim() != model.default_output.len() {
        return invalid("test outputs do not match the model's output dimension");
    }
    let total = (0..test.len())
        .into_par_iter()
        .map(|i| {
            let pred = model.predict_ref(test.x.point(i))?;
            Ok(squared_error(pred, test.y.point(i)))
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .sum::<f64>();
    Ok(total / test.len() as f64)
}

#[inline]
pub(crate) fn squared_error(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Fits every candidate on the training data, scores it on `test`, and
/// returns the index of the lowest risk (earliest on ties) with all risks.
pub fn select_cv(
    tree: &Arc<PartitionTree>,
    candidates: &[PartitionSnapshot],
    train: &Dataset,
    test: &Dataset,
) -> Result<(usize, Vec<f64>)> {
    if candidates.is_empty() {
        return invalid("no candidate partitions to select from");
    }
    let risks = candidates
        .iter()
        .map(|snap| empirical_risk(&fit_cell_means(Arc::clone(tree), snap, train)?, test))
        .collect::<Result<Vec<f64>>>()?;
    let mut best = 0;
    for (j, &r) in risks.iter().enumerate() {
        if r < risks[best] {
            best = j;
        }
    }
    Ok((best, risks))
}

/// Which of the last two rounds automatic stopping kept.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AutoStopChoice {
    pub alpha: f64,
    /// Rounds compared: previous and current.
    pub candidates: [usize; 2],
    pub objectives: [f64; 2],
    pub chosen: usize,
}

/// `alpha / n * size + diam^2` (or `+ diam` when `squared` is off).
pub fn autostop_objective(alpha_over_n: f64, size: usize, avg_diam: f64, squared: bool) -> f64 {
    alpha_over_n * size as f64 + if squared { avg_diam * avg_diam } else { avg_diam }
}

/// Whether automatic stopping fires on `snapshot`: its level reaches
/// `log2(n * diam^2 / (alpha * root_diam^2))`, with `log2(0) = -inf`.
pub fn autostop_fires(
    snapshot: &PartitionSnapshot,
    params: AlphaParams,
    alpha: f64,
    root_diam: f64,
    squared: bool,
) -> bool {
    let sq = |d: f64| if squared { d * d } else { d };
    let num = params.n as f64 * sq(snapshot.avg_diam);
    if num == 0.0 {
        return true;
    }
    let den = alpha * sq(root_diam);
    if den == 0.0 {
        return false;
    }
    snapshot.level as f64 >= (num / den).log2()
}

/// Evaluates automatic stopping on the last snapshot. Returns `None` while
/// the trigger has not fired; otherwise the penalized-objective minimizer
/// over the last two snapshots, preferring the smaller partition on ties.
/// With a single snapshot it is compared with itself.
pub fn select_autostop(
    snapshots: &[PartitionSnapshot],
    params: AlphaParams,
    root_diam: f64,
    squared: bool,
) -> Result<Option<AutoStopChoice>> {
    let Some(current) = snapshots.last() else {
        return invalid("no snapshots to select from");
    };
    let a = alpha(params)?;
    if !autostop_fires(current, params, a, root_diam, squared) {
        return Ok(None);
    }
    let i = snapshots.len() - 1;
    let prev = i.saturating_sub(1);
    let (objectives, pick) =
        autostop_compare(&snapshots[prev], current, a / params.n as f64, squared);
    let chosen = [prev, i][pick];
    Ok(Some(AutoStopChoice {
        alpha: a,
        candidates: [prev, i],
        objectives,
        chosen,
    }))
}

/// Penalized objectives of `previous` and `current`, and which of the two
/// (0 or 1) minimizes it; equal objectives go to the smaller partition.
pub fn autostop_compare(
    previous: &PartitionSnapshot,
    current: &PartitionSnapshot,
    alpha_over_n: f64,
    squared: bool,
) -> ([f64; 2], usize) {
    let objectives = [previous, current]
        .map(|s| autostop_objective(alpha_over_n, s.size, s.avg_diam, squared));
    let pick = match objectives[0].total_cmp(&objectives[1]) {
        std::cmp::Ordering::Less => 0,
        std::cmp::Ordering::Greater => 1,
        std::cmp::Ordering::Equal => usize::from(current.size < previous.size),
    };
    (objectives, pick)
}

/// One cell handed to a partitioner.
pub struct CellContext<'a> {
    pub cell: &'a CellData,
    /// Bounding box of the cell, for partitioners that track one.
    pub bbox: Option<&'a BoundingBox>,
    /// Diameter of the cell in the configured mode.
    pub diameter: f64,
}

/// A subtree replacing one cell.
pub struct Refinement {
    pub subtree: Subtree,
    /// Bounding box of each leaf, parallel to `subtree.leaves`.
    pub leaf_boxes: Option<Vec<BoundingBox>>,
    pub directions_drawn: usize,
}

/// Something that can refine one cell until its data diameter halves.
pub trait Partitioner: Sync {
    fn refine(
        &self,
        ctx: &CellContext<'_>,
        data: &PointSet,
        delta: f64,
        stream: RngStream,
    ) -> Result<Refinement>;

    fn root_box(&self, _data: &PointSet) -> Option<BoundingBox> {
        None
    }

    fn diameter_mode(&self) -> DiameterMode {
        DiameterMode::Exact
    }
}

/// Boosted random projection subtrees.
#[derive(Debug, Clone, Copy, Default)]
pub struct RpTreePartitioner {
    pub options: SplitOptions,
}

impl Partitioner for RpTreePartitioner {
    fn refine(
        &self,
        ctx: &CellContext<'_>,
        data: &PointSet,
        delta: f64,
        stream: RngStream,
    ) -> Result<Refinement> {
        let build = core_rptree_detailed(
            ctx.cell,
            data,
            ctx.diameter / 2.0,
            delta,
            stream,
            &self.options,
        )?;
        Ok(Refinement {
            subtree: build.subtree,
            leaf_boxes: None,
            directions_drawn: build.directions_drawn,
        })
    }

    fn diameter_mode(&self) -> DiameterMode {
        self.options.diameter_mode
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveConfig {
    pub delta: f64,
    pub seed: u64,
    /// Read the stopping rule's diameter terms as squared average diameters.
    pub autostop_squared: bool,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        Self {
            delta: 0.05,
            seed: 0,
            autostop_squared: true,
        }
    }
}

/// Stopping rule, with the held-out sample cross-validation needs.
#[derive(Debug, Clone, Copy)]
pub enum Selector<'a> {
    CrossValidation(&'a Dataset),
    AutoStop,
}

impl Selector<'_> {
    pub fn rule(&self) -> SelectionRule {
        match self {
            Selector::CrossValidation(_) => SelectionRule::CrossValidation,
            Selector::AutoStop => SelectionRule::AutoStop,
        }
    }
}

/// Grows a random projection tree in diameter-halving rounds and fits the
/// regressor on the partition chosen by `selector`.
pub fn adaptive_rptree(
    data: &Dataset,
    config: &AdaptiveConfig,
    options: &SplitOptions,
    selector: Selector<'_>,
) -> Result<(RegressorModel, Trace)> {
    adaptive_partition(data, &RpTreePartitioner { options: *options }, config, selector)
}

/// The adaptive loop over any [`Partitioner`].
pub fn adaptive_partition<P: Partitioner>(
    data: &Dataset,
    partitioner: &P,
    config: &AdaptiveConfig,
    selector: Selector<'_>,
) -> Result<(RegressorModel, Trace)> {
    let n = data.len();
    if n < 2 {
        return invalid(format!("need at least 2 training samples, got {n}"));
    }
    if data.output_dim() == 0 {
        return invalid("outputs must have positive dimension");
    }
    if let Selector::CrossValidation(test) = selector {
        if test.is_empty() {
            return Err(Error::Config("cross-validation needs a nonempty test sample".into()));
        }
        if test.input_dim() != data.input_dim() || test.output_dim() != data.output_dim() {
            return Err(Error::Config("test sample dimensions differ from training data".into()));
        }
    }
    let params = AlphaParams {
        n,
        delta: config.delta,
    };
    // Validates n and delta up front.
    alpha(params)?;
    let mode = partitioner.diameter_mode();
    let stream = RngStream::new(config.seed);

    let root = CellData::root(n);
    let root_diam = diameter_with(mode, &data.x, &root.indices);
    let mut tree = PartitionTree::new(data.input_dim(), 0, n);
    let mut frontier_diams = vec![root_diam];
    let mut frontier_boxes: Option<Vec<BoundingBox>> = partitioner.root_box(&data.x).map(|b| vec![b]);
    let mut snapshots = vec![PartitionSnapshot {
        round: 0,
        cells: vec![root],
        nodes: vec![ROOT],
        level: 0,
        size: 1,
        avg_diam: root_diam,
    }];
    let mut subtree_depths = Vec::new();
    let mut directions_drawn = 0;

    for round in 1.. {
        let prev = snapshots.last().expect("at least the root snapshot");
        let refinements = prev
            .cells
            .par_iter()
            .enumerate()
            .map(|(c, cell)| {
                let ctx = CellContext {
                    cell,
                    bbox: frontier_boxes.as_ref().map(|b| &b[c]),
                    diameter: frontier_diams[c],
                };
                partitioner.refine(&ctx, &data.x, config.delta, stream.at(round as u64, c as u64, 0))
            })
            .collect::<Result<Vec<Refinement>>>()?;

        let mut cells = Vec::new();
        let mut nodes = Vec::new();
        let mut boxes = frontier_boxes.as_ref().map(|_| Vec::new());
        let mut any_split = false;
        for (c, (refinement, &at)) in refinements.into_iter().zip(&prev.nodes).enumerate() {
            let Refinement {
                subtree,
                leaf_boxes,
                directions_drawn: drawn,
            } = refinement;
            directions_drawn += drawn;
            subtree_depths.push(SubtreeDepth {
                round,
                cell: c,
                depth: subtree.depth,
            });
            any_split |= subtree.depth > 0;
            let ids = if subtree.depth > 0 {
                tree.graft(at, &subtree.tree, round)
            } else {
                vec![at]
            };
            if let (Some(out), Some(leaf_boxes)) = (boxes.as_mut(), leaf_boxes) {
                out.extend(leaf_boxes);
            }
            for leaf in subtree.leaves {
                nodes.push(ids[leaf.node]);
                cells.push(leaf.cell);
            }
        }
        frontier_diams = cells
            .par_iter()
            .map(|c| diameter_with(mode, &data.x, &c.indices))
            .collect();
        frontier_boxes = boxes;
        let avg_diam = weighted_rms(cells.iter().map(|c| c.len()).zip(frontier_diams.iter().copied()));
        let level = cells.iter().map(|c| c.depth).max().unwrap_or(0);
        if !any_split && avg_diam > 0.0 {
            return Err(Error::NoProgress { round, avg_diam });
        }
        snapshots.push(PartitionSnapshot {
            round,
            size: cells.len(),
            cells,
            nodes,
            level,
            avg_diam,
        });
        let current = snapshots.last().expect("just pushed");

        let selection = match selector {
            Selector::CrossValidation(test) => {
                let fires = current.avg_diam == 0.0
                    || current.level as f64 >= 2.0 * (n as f64).log2();
                if !fires {
                    continue;
                }
                let tree = Arc::new(tree.clone());
                let (chosen, risks) = select_cv(&tree, &snapshots, data, test)?;
                Selection {
                    rule: SelectionRule::CrossValidation,
                    fired_round: round,
                    chosen_round: chosen,
                    cv_risks: risks,
                    autostop: None,
                }
            }
            Selector::AutoStop => {
                match select_autostop(&snapshots, params, root_diam, config.autostop_squared)? {
                    None => continue,
                    Some(choice) => Selection {
                        rule: SelectionRule::AutoStop,
                        fired_round: round,
                        chosen_round: choice.chosen,
                        cv_risks: Vec::new(),
                        autostop: Some(choice),
                    },
                }
            }
        };
        let tree = Arc::new(tree);
        let model = fit_cell_means(tree, &snapshots[selection.chosen_round], data)?;
        return Ok((
            model,
            Trace {
                snapshots,
                subtree_depths,
                selection,
                directions_drawn,
            },
        ));
    }
    unreachable!("refinement loop only exits by returning")
}
