//! Synthetic regression data with known intrinsic dimension.
//!
//! Input generators place points on low-dimensional sets embedded in `R^D`
//! (a sparse "star" of axis segments, a flat subspace, a round sphere, a
//! Hilbert curve). Outputs come from a Lipschitz function plus bounded noise,
//! so the excess risk of a fitted model can be measured against the true
//! regression function.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::geometry::{dot, PointSet};
use crate::regress::{squared_error, Dataset, RegressorModel};

/// Orthonormal map from `R^k` into `R^dim`, stored as `k` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    dim: usize,
    columns: Vec<Vec<f64>>,
}

impl Embedding {
    /// The first `k` coordinate axes.
    pub fn identity(dim: usize, k: usize) -> Result<Self> {
        if k == 0 || k > dim {
            return invalid(format!("cannot embed R^{k} into R^{dim}"));
        }
        let columns = (0..k)
            .map(|j| {
                let mut e = vec![0.0; dim];
                e[j] = 1.0;
                e
            })
            .collect();
        Ok(Self { dim, columns })
    }

    /// Orthonormalized Gaussian matrix drawn from `seed`.
    pub fn random(dim: usize, k: usize, seed: u64) -> Result<Self> {
        if k == 0 || k > dim {
            return invalid(format!("cannot embed R^{k} into R^{dim}"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gauss = DMatrix::<f64>::from_fn(dim, k, |_, _| rng.sample(StandardNormal));
        let q = gauss.qr().q();
        let columns = (0..k).map(|j| q.column(j).iter().copied().collect()).collect();
        Ok(Self { dim, columns })
    }

    pub fn from_seed(dim: usize, k: usize, seed: Option<u64>) -> Result<Self> {
        match seed {
            Some(s) => Self::random(dim, k, s),
            None => Self::identity(dim, k),
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.dim
    }

    pub fn intrinsic_dim(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn embed(&self, z: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.dim];
        for (c, col) in z.iter().zip(&self.columns) {
            for (xi, v) in x.iter_mut().zip(col) {
                *xi += c * v;
            }
        }
        x
    }

    /// Coordinates of the orthogonal projection of `x` onto the span.
    pub fn coordinates(&self, x: &[f64]) -> Vec<f64> {
        self.columns.iter().map(|c| dot(c, x)).collect()
    }
}

fn check_n_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        return invalid("ambient dimension must be positive");
    }
    Ok(())
}

/// Points `t e_i + sign * epsilon e_j` with `i != j`, `t ~ U[-1, 1]`.
pub fn gen_sparse_star<R: Rng + ?Sized>(dim: usize, epsilon: f64, n: usize, rng: &mut R) -> Result<PointSet> {
    if dim < 2 {
        return invalid("sparse star needs at least 2 dimensions");
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return invalid(format!("star offset {epsilon} must lie in (0, 1)"));
    }
    let mut coords = vec![0.0; n * dim];
    for p in coords.chunks_exact_mut(dim) {
        let i = rng.random_range(0..dim);
        let mut j = rng.random_range(0..dim - 1);
        if j >= i {
            j += 1;
        }
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        p[i] = rng.random_range(-1.0..=1.0);
        p[j] = sign * epsilon;
    }
    PointSet::new(dim, coords)
}

/// Uniform points of `[-1, 1]^d` embedded orthonormally into `R^dim`.
pub fn gen_subspace<R: Rng + ?Sized>(
    dim: usize,
    d: usize,
    n: usize,
    rotation_seed: Option<u64>,
    rng: &mut R,
) -> Result<PointSet> {
    check_n_dim(dim)?;
    let embedding = Embedding::from_seed(dim, d, rotation_seed)?;
    sample_embedded(&embedding, n, |rng, z| {
        for c in z.iter_mut() {
            *c = rng.random_range(-1.0..=1.0);
        }
    }, rng)
}

/// Uniform points of the unit sphere `S^d` embedded into `R^dim`.
pub fn gen_sphere_manifold<R: Rng + ?Sized>(
    dim: usize,
    d: usize,
    n: usize,
    rotation_seed: Option<u64>,
    rng: &mut R,
) -> Result<PointSet> {
    check_n_dim(dim)?;
    if d == 0 || d >= dim {
        return invalid(format!("sphere dimension {d} must lie in [1, {dim})"));
    }
    let embedding = Embedding::from_seed(dim, d + 1, rotation_seed)?;
    sample_embedded(&embedding, n, |rng, z| unit_gaussian_direction(rng, z), rng)
}

/// Points along a planar Hilbert curve of the given order, scaled to
/// `[-1, 1]^2` and embedded into `R^dim`.
pub fn gen_hilbert_curve<R: Rng + ?Sized>(
    dim: usize,
    order: u32,
    n: usize,
    rotation_seed: Option<u64>,
    rng: &mut R,
) -> Result<PointSet> {
    if dim < 2 {
        return invalid("a planar curve needs at least 2 dimensions");
    }
    if order == 0 || order > 16 {
        return invalid(format!("curve order {order} must lie in [1, 16]"));
    }
    let embedding = Embedding::from_seed(dim, 2, rotation_seed)?;
    sample_embedded(&embedding, n, |rng, z| {
        let t: f64 = rng.random_range(0.0..1.0);
        let (x, y) = hilbert_point(order, t);
        z[0] = 2.0 * x - 1.0;
        z[1] = 2.0 * y - 1.0;
    }, rng)
}

fn sample_embedded<R: Rng + ?Sized>(
    embedding: &Embedding,
    n: usize,
    mut draw: impl FnMut(&mut R, &mut [f64]),
    rng: &mut R,
) -> Result<PointSet> {
    let mut z = vec![0.0; embedding.intrinsic_dim()];
    let mut coords = Vec::with_capacity(n * embedding.ambient_dim());
    for _ in 0..n {
        draw(rng, &mut z);
        coords.extend(embedding.embed(&z));
    }
    PointSet::new(embedding.ambient_dim(), coords)
}

fn unit_gaussian_direction<R: Rng + ?Sized>(rng: &mut R, z: &mut [f64]) {
    loop {
        for c in z.iter_mut() {
            *c = rng.sample(StandardNormal);
        }
        let norm = z.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm > 1e-300 {
            z.iter_mut().for_each(|c| *c /= norm);
            return;
        }
    }
}

/// Cell-center position of curve index `h` on a `2^order` grid, scaled to [0, 1].
fn hilbert_index_to_xy(order: u32, mut h: u64) -> (f64, f64) {
    let side = 1u64 << order;
    let (mut x, mut y) = (0u64, 0u64);
    let mut s = 1u64;
    while s < side {
        let rx = 1 & (h / 2);
        let ry = 1 & (h ^ rx);
        if ry == 0 {
            if rx == 1 {
                x = s - 1 - x;
                y = s - 1 - y;
            }
            std::mem::swap(&mut x, &mut y);
        }
        x += s * rx;
        y += s * ry;
        h /= 4;
        s *= 2;
    }
    let scale = side as f64;
    ((x as f64 + 0.5) / scale, (y as f64 + 0.5) / scale)
}

/// Point at parameter `t in [0, 1)` along the piecewise-linear curve.
pub fn hilbert_point(order: u32, t: f64) -> (f64, f64) {
    let cells = 1u64 << (2 * order);
    let pos = t.clamp(0.0, 1.0) * (cells - 1) as f64;
    let h = (pos.floor() as u64).min(cells - 2);
    let frac = pos - h as f64;
    let (x0, y0) = hilbert_index_to_xy(order, h);
    let (x1, y1) = hilbert_index_to_xy(order, h + 1);
    (x0 + frac * (x1 - x0), y0 + frac * (y1 - y0))
}

/// A Lipschitz regression function with known range over a ball.
#[derive(Debug, Clone, PartialEq)]
pub enum FunctionKind {
    /// `<w, x>`, Lipschitz constant `|w|`.
    Linear { w: Vec<f64> },
    /// `sin(c <w, x>) / c`, Lipschitz constant `|w|`.
    Sine { w: Vec<f64>, c: f64 },
    /// Constant output.
    Constant { value: Vec<f64> },
}

/// Regression function together with the radius of the origin-centred ball
/// containing its input domain.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionSpec {
    pub kind: FunctionKind,
    pub domain_radius: f64,
}

impl FunctionSpec {
    pub fn input_dim(&self) -> Option<usize> {
        match &self.kind {
            FunctionKind::Linear { w } | FunctionKind::Sine { w, .. } => Some(w.len()),
            FunctionKind::Constant { .. } => None,
        }
    }

    pub fn output_dim(&self) -> usize {
        match &self.kind {
            FunctionKind::Constant { value } => value.len(),
            _ => 1,
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match &self.kind {
            FunctionKind::Linear { w } | FunctionKind::Sine { w, .. } => norm(w),
            FunctionKind::Constant { .. } => 0.0,
        }
    }

    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        match &self.kind {
            FunctionKind::Linear { w } => out[0] = dot(w, x),
            FunctionKind::Sine { w, c } => out[0] = (c * dot(w, x)).sin() / c,
            FunctionKind::Constant { value } => out.copy_from_slice(value),
        }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.output_dim()];
        self.eval_into(x, &mut out);
        out
    }

    /// Diameter of the function's image over the domain ball.
    pub fn range(&self) -> f64 {
        let r = self.domain_radius;
        match &self.kind {
            FunctionKind::Linear { w } => 2.0 * norm(w) * r,
            FunctionKind::Sine { w, c } => 2.0 * (1.0 / c.abs()).min(norm(w) * r),
            FunctionKind::Constant { .. } => 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.domain_radius >= 0.0 && self.domain_radius.is_finite()) {
            return Err(Error::Config("domain radius must be finite and nonnegative".into()));
        }
        match &self.kind {
            FunctionKind::Sine { c, .. } if !(*c != 0.0 && c.is_finite()) => {
                Err(Error::Config("sine frequency must be finite and nonzero".into()))
            }
            FunctionKind::Constant { value } if value.is_empty() => {
                Err(Error::Config("constant output must have positive dimension".into()))
            }
            _ => Ok(()),
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseKind {
    /// Uniform in the ball of the noise radius.
    #[default]
    Uniform,
    /// Gaussian with standard deviation half the noise radius, clipped radially.
    GaussianClipped,
}

/// Bounded output noise; outputs stay inside a ball of diameter `y_diameter`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub y_diameter: f64,
}

impl NoiseSpec {
    /// `y_diameter / 2 - range(f) / 2`; negative values are a configuration error.
    pub fn radius(&self, f: &FunctionSpec) -> Result<f64> {
        let r = self.y_diameter / 2.0 - f.range() / 2.0;
        if !(r >= 0.0) || !r.is_finite() {
            return Err(Error::Config(format!(
                "output diameter {} cannot hold a function of range {}",
                self.y_diameter,
                f.range()
            )));
        }
        Ok(r)
    }

    fn sample_into<R: Rng + ?Sized>(&self, radius: f64, rng: &mut R, out: &mut [f64]) {
        if radius == 0.0 {
            out.fill(0.0);
            return;
        }
        match self.kind {
            NoiseKind::Uniform => {
                unit_gaussian_direction(rng, out);
                let u: f64 = rng.random_range(0.0..=1.0);
                let scale = radius * u.powf(1.0 / out.len() as f64);
                out.iter_mut().for_each(|c| *c *= scale);
            }
            NoiseKind::GaussianClipped => {
                for c in out.iter_mut() {
                    *c = rng.sample::<f64, _>(StandardNormal) * radius / 2.0;
                }
                let len = norm(out);
                if len > radius {
                    out.iter_mut().for_each(|c| *c *= radius / len);
                }
            }
        }
    }
}

/// Inputs, noisy outputs, and the noiseless values that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSample {
    pub data: Dataset,
    pub clean: PointSet,
    pub noise: PointSet,
}

impl SyntheticSample {
    /// Mean squared noise norm over the sample.
    pub fn noise_power(&self) -> f64 {
        if self.noise.is_empty() {
            return 0.0;
        }
        self.noise.iter().map(|e| e.iter().map(|c| c * c).sum::<f64>()).sum::<f64>()
            / self.noise.len() as f64
    }
}

/// `Y_i = f(X_i) + eta_i` with bounded noise.
pub fn gen_regression<R: Rng + ?Sized>(
    points: &PointSet,
    f: &FunctionSpec,
    noise: &NoiseSpec,
    rng: &mut R,
) -> Result<SyntheticSample> {
    f.validate()?;
    if let Some(d) = f.input_dim() {
        if d != points.dim() {
            return invalid(format!("function expects dimension {d}, points have {}", points.dim()));
        }
    }
    let radius = noise.radius(f)?;
    let out_dim = f.output_dim();
    let n = points.len();
    let mut clean = vec![0.0; n * out_dim];
    let mut eta = vec![0.0; n * out_dim];
    for (i, (c, e)) in clean
        .chunks_exact_mut(out_dim)
        .zip(eta.chunks_exact_mut(out_dim))
        .enumerate()
    {
        f.eval_into(points.point(i), c);
        noise.sample_into(radius, rng, e);
    }
    let y: Vec<f64> = clean.iter().zip(&eta).map(|(c, e)| c + e).collect();
    Ok(SyntheticSample {
        data: Dataset::new(points.clone(), PointSet::new(out_dim, y)?)?,
        clean: PointSet::new(out_dim, clean)?,
        noise: PointSet::new(out_dim, eta)?,
    })
}

/// Monte-Carlo estimate of `E |f(X) - f_n(X)|^2` over `points`, with its
/// standard error.
pub fn oracle_excess_risk_with_se(
    model: &RegressorModel,
    f: &FunctionSpec,
    points: &PointSet,
) -> Result<(f64, f64)> {
    if points.is_empty() {
        return invalid("oracle risk needs at least one point");
    }
    let losses = (0..points.len())
        .into_par_iter()
        .map(|i| {
            let x = points.point(i);
            Ok(squared_error(&f.eval(x), model.predict_ref(x)?))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(mean_and_se(&losses))
}

pub fn oracle_excess_risk(model: &RegressorModel, f: &FunctionSpec, points: &PointSet) -> Result<f64> {
    oracle_excess_risk_with_se(model, f, points).map(|(m, _)| m)
}

/// Sample mean and its standard error.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

/// Input families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    SparseStar { epsilon: f64 },
    Subspace { d: usize },
    SphereManifold { d: usize },
    HilbertCurve { order: u32 },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::SparseStar { .. } => "sparse_star",
            Family::Subspace { .. } => "subspace",
            Family::SphereManifold { .. } => "sphere_manifold",
            Family::HilbertCurve { .. } => "hilbert_curve",
        }
    }
}

/// The shape of the regression function, before it is bound to a generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FunctionShape {
    Linear,
    Sine { c: f64 },
    Constant { value: f64 },
}

/// Everything needed to draw a synthetic regression sample.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    pub family: Family,
    pub dim: usize,
    /// `None` embeds along the coordinate axes.
    pub rotation_seed: Option<u64>,
    pub shape: FunctionShape,
    /// Lipschitz constant of the regression function.
    pub lambda: f64,
    /// Seed for the direction of `w`.
    pub function_seed: u64,
    pub noise: NoiseSpec,
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        match self.family {
            Family::SparseStar { epsilon } => {
                if self.dim < 2 {
                    return cfg("sparse star needs D >= 2".into());
                }
                if !(epsilon > 0.0 && epsilon < 1.0) {
                    return cfg(format!("star offset {epsilon} must lie in (0, 1)"));
                }
            }
            Family::Subspace { d } if d == 0 || d > self.dim => {
                return cfg(format!("subspace dimension {d} must lie in [1, {}]", self.dim));
            }
            Family::SphereManifold { d } if d == 0 || d >= self.dim => {
                return cfg(format!("sphere dimension {d} must lie in [1, {})", self.dim));
            }
            Family::HilbertCurve { order } if self.dim < 2 || order == 0 || order > 16 => {
                return cfg("hilbert curve needs D >= 2 and order in [1, 16]".into());
            }
            _ => {}
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return cfg(format!("Lipschitz constant {} must be finite and nonnegative", self.lambda));
        }
        self.noise.radius(&self.function()?)?;
        Ok(())
    }

    pub fn intrinsic_dim(&self) -> usize {
        match self.family {
            Family::SparseStar { .. } => 2,
            Family::Subspace { d } => d,
            Family::SphereManifold { d } => d,
            Family::HilbertCurve { .. } => 2,
        }
    }

    fn embedding(&self) -> Result<Option<Embedding>> {
        Ok(match self.family {
            Family::SparseStar { .. } => None,
            Family::Subspace { d } => Some(Embedding::from_seed(self.dim, d, self.rotation_seed)?),
            Family::SphereManifold { d } => {
                Some(Embedding::from_seed(self.dim, d + 1, self.rotation_seed)?)
            }
            Family::HilbertCurve { .. } => Some(Embedding::from_seed(self.dim, 2, self.rotation_seed)?),
        })
    }

    /// Radius of an origin-centred ball containing every generated input.
    pub fn domain_radius(&self) -> f64 {
        match self.family {
            Family::SparseStar { epsilon } => (1.0 + epsilon * epsilon).sqrt(),
            Family::Subspace { d } => (d as f64).sqrt(),
            Family::SphereManifold { .. } => 1.0,
            Family::HilbertCurve { .. } => 2f64.sqrt(),
        }
    }

    /// The regression function. Its weight vector has norm `lambda` and lies
    /// in the span of the data when the family has an embedding.
    pub fn function(&self) -> Result<FunctionSpec> {
        let kind = match self.shape {
            FunctionShape::Linear => FunctionKind::Linear { w: self.weights()? },
            FunctionShape::Sine { c } => FunctionKind::Sine { w: self.weights()?, c },
            FunctionShape::Constant { value } => FunctionKind::Constant { value: vec![value] },
        };
        let f = FunctionSpec {
            kind,
            domain_radius: self.domain_radius(),
        };
        f.validate()?;
        Ok(f)
    }

    fn weights(&self) -> Result<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.function_seed);
        let direction = match self.embedding()? {
            Some(e) => {
                let mut u = vec![0.0; e.intrinsic_dim()];
                unit_gaussian_direction(&mut rng, &mut u);
                e.embed(&u)
            }
            None => {
                let mut u = vec![0.0; self.dim];
                unit_gaussian_direction(&mut rng, &mut u);
                u
            }
        };
        Ok(direction.into_iter().map(|c| c * self.lambda).collect())
    }

    pub fn sample_points<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<PointSet> {
        match self.family {
            Family::SparseStar { epsilon } => gen_sparse_star(self.dim, epsilon, n, rng),
            Family::Subspace { d } => gen_subspace(self.dim, d, n, self.rotation_seed, rng),
            Family::SphereManifold { d } => gen_sphere_manifold(self.dim, d, n, self.rotation_seed, rng),
            Family::HilbertCurve { order } => gen_hilbert_curve(self.dim, order, n, self.rotation_seed, rng),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<SyntheticSample> {
        let f = self.function()?;
        let points = self.sample_points(n, rng)?;
        gen_regression(&points, &f, &self.noise, rng)
    }

    /// Expected squared noise norm `E|eta|^2`.
    pub fn noise_floor(&self) -> Result<f64> {
        let f = self.function()?;
        let r = self.noise.radius(&f)?;
        let k = f.output_dim() as f64;
        Ok(match self.noise.kind {
            NoiseKind::Uniform => r * r * k / (k + 2.0),
            // Clipping makes the closed form messy; report the unclipped power.
            NoiseKind::GaussianClipped => k * r * r / 4.0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{data_diameter, doubling_estimate, CellData};

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn pairwise_max(p: &PointSet) -> f64 {
        let mut best: f64 = 0.0;
        for a in p.iter() {
            for b in p.iter() {
                let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
                best = best.max(d);
            }
        }
        best.sqrt()
    }

    #[test]
    fn sparse_star_structure() {
        let eps = 0.05;
        let p = gen_sparse_star(10, eps, 500, &mut rng(1)).unwrap();
        for x in p.iter() {
            let nz: Vec<f64> = x.iter().copied().filter(|&c| c != 0.0).collect();
            assert!(nz.len() <= 2);
            assert!(nz.iter().any(|c| (c.abs() - eps).abs() < 1e-15));
            assert!(nz.iter().all(|c| c.abs() <= 1.0));
        }
        let diam = pairwise_max(&p);
        assert!(diam <= 2.0 * (1.0 + eps * eps).sqrt() + 1e-12);
        assert!(diam >= 1.9, "diameter {diam}");
        assert!(gen_sparse_star(1, eps, 5, &mut rng(1)).is_err());
    }

    #[test]
    fn sparse_star_doubling_grows_slowly() {
        let est: Vec<f64> = [8usize, 32, 128]
            .iter()
            .map(|&d| {
                let p = gen_sparse_star(d, 0.05, 1500, &mut rng(d as u64)).unwrap();
                doubling_estimate(&p, &[0.5], 3).unwrap()[0]
            })
            .collect();
        // Sixteen-fold more axes, far less than sixteen-fold growth in the estimate.
        assert!(est[2] <= est[0] * 4.0 + 1.0, "estimates {est:?}");
    }

    #[test]
    fn subspace_identity_is_cube() {
        let p = gen_subspace(3, 3, 200, None, &mut rng(2)).unwrap();
        assert!(p.coords().iter().all(|c| (-1.0..=1.0).contains(c)));
    }

    #[test]
    fn subspace_lies_in_span_and_preserves_distances() {
        let (dim, d) = (12, 3);
        let e = Embedding::random(dim, d, 9).unwrap();
        let mut r = rng(4);
        let z: Vec<Vec<f64>> = (0..50)
            .map(|_| (0..d).map(|_| r.random_range(-1.0..=1.0)).collect())
            .collect();
        let x: Vec<Vec<f64>> = z.iter().map(|zi| e.embed(zi)).collect();
        for xi in &x {
            let back = e.embed(&e.coordinates(xi));
            let resid: f64 = xi.iter().zip(&back).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            assert!(resid < 1e-10);
        }
        for i in 0..z.len() {
            for j in 0..z.len() {
                let dz: f64 = z[i].iter().zip(&z[j]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                let dx: f64 = x[i].iter().zip(&x[j]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                assert!((dz - dx).abs() <= 1e-10 * dz.max(1.0));
            }
        }
        let p = gen_subspace(dim, d, 100, Some(9), &mut rng(5)).unwrap();
        for x in p.iter() {
            let back = e.embed(&e.coordinates(x));
            let resid: f64 = x.iter().zip(&back).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            assert!(resid < 1e-10);
        }
    }

    #[test]
    fn sphere_points_have_unit_norm() {
        let n = 4000;
        let p = gen_sphere_manifold(8, 2, n, Some(1), &mut rng(6)).unwrap();
        for x in p.iter() {
            assert!((norm(x) - 1.0).abs() < 1e-10);
        }
        for k in 0..8 {
            let mean = p.iter().map(|x| x[k]).sum::<f64>() / n as f64;
            assert!(mean.abs() < 3.0 / (n as f64).sqrt(), "coordinate {k} mean {mean}");
        }
        let circle = gen_sphere_manifold(5, 1, 400, Some(2), &mut rng(7)).unwrap();
        let diam = data_diameter(&CellData::root(400), &circle).unwrap().value;
        assert!(diam > 1.99 && diam <= 2.0 + 1e-12);
        assert!(gen_sphere_manifold(3, 3, 4, None, &mut rng(0)).is_err());
    }

    #[test]
    fn hilbert_curve_stays_in_square() {
        let p = gen_hilbert_curve(4, 3, 300, None, &mut rng(8)).unwrap();
        for x in p.iter() {
            assert!(x[0].abs() <= 1.0 && x[1].abs() <= 1.0);
            assert_eq!(x[2], 0.0);
        }
        // Consecutive curve indices are grid neighbours.
        for h in 0..63 {
            let (a, b) = (hilbert_index_to_xy(3, h), hilbert_index_to_xy(3, h + 1));
            let step = (a.0 - b.0).abs() + (a.1 - b.1).abs();
            assert!((step - 1.0 / 8.0).abs() < 1e-12);
        }
    }

    fn linear_spec(dim: usize, lambda: f64, y_diameter: f64) -> GeneratorSpec {
        GeneratorSpec {
            family: Family::Subspace { d: 2 },
            dim,
            rotation_seed: Some(3),
            shape: FunctionShape::Linear,
            lambda,
            function_seed: 11,
            noise: NoiseSpec {
                kind: NoiseKind::Uniform,
                y_diameter,
            },
        }
    }

    #[test]
    fn zero_noise_linear_outputs_are_exact() {
        let spec = linear_spec(6, 1.0, 2.0 * 2f64.sqrt());
        let f = spec.function().unwrap();
        assert!((f.lipschitz() - 1.0).abs() < 1e-12);
        assert!((spec.noise.radius(&f).unwrap()).abs() < 1e-12);
        let s = spec.sample(100, &mut rng(1)).unwrap();
        for i in 0..100 {
            let FunctionKind::Linear { w } = &f.kind else { unreachable!() };
            let expect = dot(w, s.data.x.point(i));
            assert!((s.data.y.point(i)[0] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_function_noise_is_bounded() {
        let f = FunctionSpec {
            kind: FunctionKind::Constant { value: vec![2.0, -1.0] },
            domain_radius: 1.0,
        };
        let noise = NoiseSpec {
            kind: NoiseKind::Uniform,
            y_diameter: 1.0,
        };
        let points = gen_subspace(3, 2, 500, None, &mut rng(2)).unwrap();
        let s = gen_regression(&points, &f, &noise, &mut rng(3)).unwrap();
        for y in s.data.y.iter() {
            let d = ((y[0] - 2.0).powi(2) + (y[1] + 1.0).powi(2)).sqrt();
            assert!(d <= 0.5 + 1e-12);
        }
        let clipped = NoiseSpec {
            kind: NoiseKind::GaussianClipped,
            y_diameter: 1.0,
        };
        let s = gen_regression(&points, &f, &clipped, &mut rng(3)).unwrap();
        assert!(s.noise.iter().all(|e| norm(e) <= 0.5 + 1e-12));
    }

    #[test]
    fn negative_noise_radius_is_config_error() {
        let spec = linear_spec(4, 5.0, 1.0);
        assert!(matches!(spec.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn lipschitz_constant_holds_on_pairs() {
        let mut spec = linear_spec(8, 1.5, 100.0);
        spec.shape = FunctionShape::Sine { c: 3.0 };
        let f = spec.function().unwrap();
        let lambda = f.lipschitz();
        assert!((lambda - 1.5).abs() < 1e-12);
        let p = spec.sample_points(200, &mut rng(4)).unwrap();
        let mut r = rng(5);
        let mut worst: f64 = 0.0;
        for _ in 0..10_000 {
            let (a, b) = (r.random_range(0..200), r.random_range(0..200));
            if a == b {
                continue;
            }
            let df = (f.eval(p.point(a))[0] - f.eval(p.point(b))[0]).abs();
            let dx = p.dist2(a, b).sqrt();
            worst = worst.max(df / dx);
        }
        assert!(worst <= lambda * (1.0 + 1e-6));
    }

    #[test]
    fn generators_are_seed_deterministic() {
        for family in [
            Family::SparseStar { epsilon: 0.1 },
            Family::Subspace { d: 2 },
            Family::SphereManifold { d: 1 },
            Family::HilbertCurve { order: 4 },
        ] {
            let spec = GeneratorSpec {
                family,
                ..linear_spec(5, 1.0, 10.0)
            };
            let a = spec.sample(50, &mut rng(9)).unwrap();
            let b = spec.sample(50, &mut rng(9)).unwrap();
            assert_eq!(a, b);
        }
    }
}
