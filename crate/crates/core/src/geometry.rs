//! Point sets, data diameters and a brute-force doubling-dimension estimate.
//!
//! All distances are Euclidean. A cell is described by the sample indices it
//! holds; its data diameter is the largest distance between two of those
//! samples (zero for cells with fewer than two points).

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};

/// A set of points in `R^dim`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    dim: usize,
    coords: Vec<f64>,
}

impl PointSet {
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return invalid("ambient dimension must be positive");
        }
        if coords.len() % dim != 0 {
            return invalid(format!(
                "{} coordinates do not split into points of dimension {}",
                coords.len(),
                dim
            ));
        }
        if let Some(pos) = coords.iter().position(|c| !c.is_finite()) {
            return invalid(format!("non-finite coordinate in point {}", pos / dim));
        }
        Ok(Self { dim, coords })
    }

    pub fn from_rows<R: AsRef<[f64]>>(dim: usize, rows: &[R]) -> Result<Self> {
        let mut coords = Vec::with_capacity(rows.len() * dim);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != dim {
                return invalid(format!(
                    "point {} has {} coordinates, expected {}",
                    i,
                    row.len(),
                    dim
                ));
            }
            coords.extend_from_slice(row);
        }
        Self::new(dim, coords)
    }

    pub fn empty(dim: usize) -> Result<Self> {
        Self::new(dim, Vec::new())
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Squared distance between two stored points.
    #[inline]
    pub fn dist2(&self, a: usize, b: usize) -> f64 {
        dist2(self.point(a), self.point(b))
    }

    /// Restricts the set to the given indices, in order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        check_indices(indices, self.len())?;
        let mut coords = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            coords.extend_from_slice(self.point(i));
        }
        Ok(Self {
            dim: self.dim,
            coords,
        })
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

/// The sample indices falling in one cell, and the cell's level in the full
/// tree (root at level 0).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CellData {
    pub indices: Vec<usize>,
    pub depth: usize,
}

impl CellData {
    pub fn new(indices: Vec<usize>, depth: usize) -> Self {
        Self { indices, depth }
    }

    /// The root cell holding samples `0..n`.
    pub fn root(n: usize) -> Self {
        Self::new((0..n).collect(), 0)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DiameterMode {
    /// Maximum pairwise distance.
    #[default]
    Exact,
    /// Double-sweep estimate, within a factor two of the exact value.
    Approx2,
}

impl DiameterMode {
    pub fn as_str(self) -> &'static str {
        match self {
            DiameterMode::Exact => "exact",
            DiameterMode::Approx2 => "approx2",
        }
    }
}

impl std::str::FromStr for DiameterMode {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(DiameterMode::Exact),
            "approx2" => Ok(DiameterMode::Approx2),
            other => invalid(format!("unknown diameter mode '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiameterSummary {
    pub value: f64,
    pub method: DiameterMode,
}

fn check_indices(indices: &[usize], n: usize) -> Result<()> {
    match indices.iter().find(|&&i| i >= n) {
        Some(i) => invalid(format!("sample index {i} out of range for {n} points")),
        None => Ok(()),
    }
}

/// Exact data diameter of a cell.
pub fn data_diameter(cell: &CellData, data: &PointSet) -> Result<DiameterSummary> {
    check_indices(&cell.indices, data.len())?;
    Ok(DiameterSummary {
        value: exact_diameter(data, &cell.indices),
        method: DiameterMode::Exact,
    })
}

/// Double-sweep diameter estimate: farthest point from an arbitrary start,
/// then the farthest point from that one.
pub fn approx_diameter(cell: &CellData, data: &PointSet) -> Result<DiameterSummary> {
    check_indices(&cell.indices, data.len())?;
    Ok(DiameterSummary {
        value: double_sweep(data, &cell.indices).0,
        method: DiameterMode::Approx2,
    })
}

pub(crate) fn diameter_with(mode: DiameterMode, data: &PointSet, indices: &[usize]) -> f64 {
    match mode {
        DiameterMode::Exact => exact_diameter(data, indices),
        DiameterMode::Approx2 => double_sweep(data, indices).0,
    }
}

fn farthest_from(data: &PointSet, from: usize, indices: &[usize]) -> (usize, f64) {
    let origin = data.point(from);
    let mut best = (from, 0.0);
    for &j in indices {
        let d = dist2(origin, data.point(j));
        if d > best.1 {
            best = (j, d);
        }
    }
    best
}

/// Returns the swept diameter estimate and the squared value.
fn double_sweep(data: &PointSet, indices: &[usize]) -> (f64, f64) {
    if indices.len() < 2 {
        return (0.0, 0.0);
    }
    let (p, _) = farthest_from(data, indices[0], indices);
    let (_, d2) = farthest_from(data, p, indices);
    (d2.sqrt(), d2)
}

/// Maximum pairwise distance over `indices`.
///
/// Points are visited in decreasing distance from the centroid; a pair can
/// only beat the current maximum if the sum of the two radii does, which
/// prunes almost all pairs for low-dimensional data.
pub(crate) fn exact_diameter(data: &PointSet, indices: &[usize]) -> f64 {
    let m = indices.len();
    if m < 2 {
        return 0.0;
    }
    if m <= 32 {
        return brute_force_diameter(data, indices);
    }
    let dim = data.dim();
    let mut centroid = vec![0.0; dim];
    for &i in indices {
        for (c, x) in centroid.iter_mut().zip(data.point(i)) {
            *c += x;
        }
    }
    for c in &mut centroid {
        *c /= m as f64;
    }
    let mut radii: Vec<(f64, usize)> = indices
        .iter()
        .map(|&i| (dist2(&centroid, data.point(i)).sqrt(), i))
        .collect();
    radii.sort_unstable_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));

    let (_, mut best2) = double_sweep(data, indices);
    let mut best = best2.sqrt();
    // Slack covers rounding in the radii; pruning only skips pairs that
    // provably cannot exceed the current maximum.
    const SLACK: f64 = 1.0 + 1e-9;
    for a in 0..m - 1 {
        let (ra, ia) = radii[a];
        if (ra + radii[a + 1].0) * SLACK < best {
            break;
        }
        let pa = data.point(ia);
        for &(rb, ib) in &radii[a + 1..] {
            if (ra + rb) * SLACK < best {
                break;
            }
            let d2 = dist2(pa, data.point(ib));
            if d2 > best2 {
                best2 = d2;
                best = d2.sqrt();
            }
        }
    }
    best
}

fn brute_force_diameter(data: &PointSet, indices: &[usize]) -> f64 {
    let mut best2: f64 = 0.0;
    for (a, &i) in indices.iter().enumerate() {
        let pi = data.point(i);
        for &j in &indices[a + 1..] {
            best2 = best2.max(dist2(pi, data.point(j)));
        }
    }
    best2.sqrt()
}

/// Average data diameter of a collection of disjoint cells: the square root
/// of the point-count weighted mean of squared cell diameters.
pub fn avg_data_diameter(cells: &[CellData], data: &PointSet) -> Result<f64> {
    avg_data_diameter_with(cells, data, DiameterMode::Exact)
}

pub fn avg_data_diameter_with(
    cells: &[CellData],
    data: &PointSet,
    mode: DiameterMode,
) -> Result<f64> {
    let mut seen = vec![false; data.len()];
    for cell in cells {
        check_indices(&cell.indices, data.len())?;
        for &i in &cell.indices {
            if std::mem::replace(&mut seen[i], true) {
                return invalid(format!("sample {i} appears in more than one cell"));
            }
        }
    }
    let parts = cells
        .iter()
        .map(|c| (c.len(), diameter_with(mode, data, &c.indices)));
    Ok(weighted_rms(parts))
}

/// Weighted root-mean-square of `(count, diameter)` pairs; zero when every
/// count is zero.
pub fn weighted_rms(parts: impl IntoIterator<Item = (usize, f64)>) -> f64 {
    let (mut total, mut acc) = (0usize, 0.0f64);
    for (count, diam) in parts {
        total += count;
        acc += count as f64 * diam * diam;
    }
    if total == 0 {
        0.0
    } else {
        (acc / total as f64).sqrt()
    }
}

/// Greedy-cover estimate of the local doubling dimension at each scale.
///
/// At scale `r` the set is covered greedily by balls of radius `r`; the
/// points inside each such ball are then covered greedily with radius
/// `r / 2`. The estimate is `log2` of the largest child-cover count, an
/// upper-bound style figure suitable only for coarse comparisons. Points
/// are visited in an order shuffled by `seed`.
pub fn doubling_estimate(data: &PointSet, scales: &[f64], seed: u64) -> Result<Vec<f64>> {
    if data.is_empty() {
        return invalid("doubling estimate needs a nonempty point set");
    }
    if let Some(r) = scales.iter().find(|&&r| !(r > 0.0 && r.is_finite())) {
        return invalid(format!("scale {r} is not a positive finite radius"));
    }
    if scales.windows(2).any(|w| w[1] > w[0]) {
        return invalid("scales must be in descending order");
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let estimates = scales
        .iter()
        .map(|&r| {
            let centers = greedy_centers(data, &order, r);
            let worst = centers
                .iter()
                .map(|&c| {
                    let r2 = r * r;
                    let ball: Vec<usize> = order
                        .iter()
                        .copied()
                        .filter(|&j| data.dist2(c, j) <= r2)
                        .collect();
                    greedy_centers(data, &ball, r / 2.0).len()
                })
                .max()
                .unwrap_or(1);
            (worst as f64).log2()
        })
        .collect();
    Ok(estimates)
}

fn greedy_centers(data: &PointSet, order: &[usize], radius: f64) -> Vec<usize> {
    let r2 = radius * radius;
    let mut centers: Vec<usize> = Vec::new();
    for &i in order {
        if !centers.iter().any(|&c| data.dist2(c, i) <= r2) {
            centers.push(i);
        }
    }
    centers
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_points(n: usize, dim: usize, seed: u64) -> PointSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coords = (0..n * dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        PointSet::new(dim, coords).unwrap()
    }

    // Independent pairwise scan, kept separate from the pruned implementation.
    fn pairwise_oracle(points: &[Vec<f64>]) -> f64 {
        let mut best: f64 = 0.0;
        for a in points {
            for b in points {
                let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
                best = best.max(d.sqrt());
            }
        }
        best
    }

    fn rows(data: &PointSet) -> Vec<Vec<f64>> {
        data.iter().map(|p| p.to_vec()).collect()
    }

    #[test]
    fn rejects_bad_point_sets() {
        assert!(PointSet::new(0, vec![]).is_err());
        assert!(PointSet::new(2, vec![1.0, 2.0, 3.0]).is_err());
        assert!(PointSet::new(1, vec![f64::NAN]).is_err());
        assert!(PointSet::from_rows(2, &[vec![1.0]]).is_err());
    }

    #[test]
    fn empty_cell_has_zero_diameter() {
        let data = PointSet::from_rows(2, &[[0.0, 0.0], [3.0, 4.0]]).unwrap();
        let d = data_diameter(&CellData::new(vec![], 0), &data).unwrap();
        assert_eq!(d.value, 0.0);
        let d = data_diameter(&CellData::new(vec![1], 0), &data).unwrap();
        assert_eq!(d.value, 0.0);
    }

    #[test]
    fn three_four_five() {
        let data = PointSet::from_rows(2, &[[0.0, 0.0], [3.0, 4.0]]).unwrap();
        let d = data_diameter(&CellData::root(2), &data).unwrap();
        assert_eq!(d.value, 5.0);
        assert_eq!(d.method, DiameterMode::Exact);
    }

    #[test]
    fn out_of_range_index_is_rejected() {
        let data = PointSet::from_rows(2, &[[0.0, 0.0]]).unwrap();
        assert!(data_diameter(&CellData::new(vec![3], 0), &data).is_err());
        assert!(approx_diameter(&CellData::new(vec![3], 0), &data).is_err());
    }

    #[test]
    fn matches_pairwise_scan_small_and_large() {
        let small = random_points(10, 3, 7);
        let exact = data_diameter(&CellData::root(10), &small).unwrap().value;
        assert!((exact - pairwise_oracle(&rows(&small))).abs() <= 1e-12);

        // Large enough to exercise the pruned path.
        for seed in 0..5 {
            let big = random_points(400, 4, seed);
            let exact = data_diameter(&CellData::root(400), &big).unwrap().value;
            assert!((exact - pairwise_oracle(&rows(&big))).abs() <= 1e-12);
        }
    }

    #[test]
    fn average_diameter_examples() {
        let data = random_points(20, 2, 3);
        let all = CellData::root(20);
        let whole = data_diameter(&all, &data).unwrap().value;
        let avg = avg_data_diameter(std::slice::from_ref(&all), &data).unwrap();
        assert!((avg - whole).abs() < 1e-15);

        let cells = [CellData::new(vec![], 1), all.clone()];
        assert!((avg_data_diameter(&cells, &data).unwrap() - whole).abs() < 1e-15);

        // A: three points with diameter 2, B: a single point.
        let data = PointSet::from_rows(1, &[[0.0], [1.0], [2.0], [9.0]]).unwrap();
        let cells = [CellData::new(vec![0, 1, 2], 1), CellData::new(vec![3], 1)];
        let avg = avg_data_diameter(&cells, &data).unwrap();
        assert!((avg - 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn overlapping_cells_are_rejected() {
        let data = random_points(4, 2, 1);
        let cells = [CellData::new(vec![0, 1], 1), CellData::new(vec![1, 2], 1)];
        assert!(avg_data_diameter(&cells, &data).is_err());
        assert_eq!(avg_data_diameter(&[], &data).unwrap(), 0.0);
    }

    #[test]
    fn approx_diameter_examples() {
        let data = PointSet::from_rows(2, &[[0.0, 0.0], [3.0, 4.0]]).unwrap();
        assert_eq!(approx_diameter(&CellData::root(2), &data).unwrap().value, 5.0);

        let collinear: Vec<[f64; 3]> = [0.3, -2.0, 1.5, 0.0, 4.0, -1.0]
            .iter()
            .map(|&t| [t, 2.0 * t, -t])
            .collect();
        let data = PointSet::from_rows(3, &collinear).unwrap();
        let cell = CellData::root(collinear.len());
        let approx = approx_diameter(&cell, &data).unwrap();
        let exact = data_diameter(&cell, &data).unwrap();
        assert!((approx.value - exact.value).abs() < 1e-12);
        assert_eq!(approx.method, DiameterMode::Approx2);

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let circle: Vec<[f64; 2]> = (0..200)
            .map(|_| {
                let a: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                [a.cos(), a.sin()]
            })
            .collect();
        let data = PointSet::from_rows(2, &circle).unwrap();
        let cell = CellData::root(200);
        let approx = approx_diameter(&cell, &data).unwrap().value;
        let exact = pairwise_oracle(&rows(&data));
        assert!(approx <= exact + 1e-12 && approx >= exact / 2.0);

        let empty = approx_diameter(&CellData::default(), &data).unwrap();
        assert_eq!(empty.value, 0.0);
        assert_eq!(empty.method, DiameterMode::Approx2);
    }

    #[test]
    fn doubling_estimate_examples() {
        let same = PointSet::from_rows(2, &vec![[0.5, 0.5]; 30]).unwrap();
        let est = doubling_estimate(&same, &[1.0, 0.1], 0).unwrap();
        assert_eq!(est, vec![0.0, 0.0]);

        let segment: Vec<[f64; 5]> = (0..1000)
            .map(|i| {
                let t = i as f64 / 999.0;
                [t, 0.0, 0.0, 0.0, 0.0]
            })
            .collect();
        let data = PointSet::from_rows(5, &segment).unwrap();
        let est = doubling_estimate(&data, &[0.5], 4).unwrap();
        assert!(est[0] <= 2.0, "segment estimate {}", est[0]);

        let grid: Vec<[f64; 2]> = (0..1000)
            .map(|i| [(i % 40) as f64 / 39.0, (i / 40) as f64 / 24.0])
            .collect();
        let data = PointSet::from_rows(2, &grid).unwrap();
        let est = doubling_estimate(&data, &[0.5, 0.25], 4).unwrap();
        // A disk needs seven half-radius disks; greedy covers use a few more.
        for e in est {
            assert!(e <= 12f64.log2() + 1e-12, "grid estimate {e}");
        }
    }

    #[test]
    fn doubling_estimate_errors() {
        assert!(doubling_estimate(&PointSet::empty(2).unwrap(), &[1.0], 0).is_err());
        let data = random_points(5, 2, 0);
        assert!(doubling_estimate(&data, &[0.0], 0).is_err());
        assert!(doubling_estimate(&data, &[0.1, 0.5], 0).is_err());
    }
}
