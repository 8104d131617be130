//! Initial embedding channels.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{PfeError, Result};
use crate::graph::{AffinityGraph, Image};
use crate::pfe::laplacian_eigenmap;
use crate::segment::{kmeans, DEFAULT_MAX_ITERS};
use crate::sparsela::{cholesky_factor, DenseMatrix, SparseMatrix};

/// Relative covariance regularization, times `trace / dim`.
pub const COV_REG: f64 = 1e-4;
/// Covariance floor so zero-spread clusters stay invertible. Absolute in
/// [`GaussianModel::fit`]; relative to the mean feature variance in
/// [`fit_clusters_kmeans`].
pub const COV_FLOOR: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitKind {
    Random,
    ColorCombo,
    GmmDensity,
    WscDensity,
}

impl std::str::FromStr for InitKind {
    type Err = PfeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(InitKind::Random),
            "color_combo" | "color" => Ok(InitKind::ColorCombo),
            "gmm_density" | "gmm" => Ok(InitKind::GmmDensity),
            "wsc_density" | "wsc" => Ok(InitKind::WscDensity),
            other => Err(PfeError::Config(format!("unknown init scheme {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InitScheme {
    pub kind: InitKind,
    pub seed: u64,
}

/// Dispatches on `scheme.kind`. `graph` is only used by the WSC scheme.
pub fn initialize(
    scheme: InitScheme,
    img: &Image,
    graph: &AffinityGraph,
    d: usize,
) -> Result<DenseMatrix> {
    match scheme.kind {
        InitKind::Random => Ok(init_random(img.n_pixels(), d, scheme.seed)),
        InitKind::ColorCombo => init_color_combo(img, d),
        InitKind::GmmDensity => init_gmm_density(img, d, scheme.seed),
        InitKind::WscDensity => init_wsc_density(img, graph, d, scheme.seed),
    }
}

fn center_columns(a: &mut DenseMatrix) {
    let n = a.n_rows() as f64;
    for j in 0..a.n_cols() {
        let col = a.col_mut(j);
        let mean = col.iter().sum::<f64>() / n;
        col.iter_mut().for_each(|v| *v -= mean);
    }
}

/// Uniform values in `[-0.5, 0.5]`, column-centered.
pub fn init_random(n: usize, d: usize, seed: u64) -> DenseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut y = DenseMatrix::zeros(n, d);
    y.as_mut_slice()
        .iter_mut()
        .for_each(|v| *v = rng.random::<f64>() - 0.5);
    center_columns(&mut y);
    y
}

/// `R∘G`, `R∘B`, `G∘B`, `R∘G∘B`, centered, first `d` of them.
pub fn init_color_combo(img: &Image, d: usize) -> Result<DenseMatrix> {
    if img.channels() != 3 {
        return Err(PfeError::Shape("color combination needs an RGB image".into()));
    }
    if d > 4 {
        return Err(PfeError::Config(format!("color combination gives at most 4 channels, not {d}")));
    }
    let mut y = DenseMatrix::from_fn(img.n_pixels(), d, |i, j| {
        let px = img.pixel(i);
        let (r, g, b) = (px[0], px[1], px[2]);
        [r * g, r * b, g * b, r * g * b][j]
    });
    center_columns(&mut y);
    Ok(y)
}

/// Gaussian with precomputed inverse covariance.
#[derive(Clone, Debug)]
pub struct GaussianModel {
    pub mean: Vec<f64>,
    pub covariance: DenseMatrix,
    chol_lower: DenseMatrix,
    log_norm: f64,
}

impl GaussianModel {
    /// Sample mean and covariance of `points` (rows), with
    /// `COV_REG·trace/dim + COV_FLOOR` added to the diagonal.
    pub fn fit(points: &[&[f64]]) -> Result<Self> {
        Self::fit_with_floor(points, COV_FLOOR)
    }

    /// As [`fit`](Self::fit) with `floor` in place of `COV_FLOOR`.
    pub fn fit_with_floor(points: &[&[f64]], floor: f64) -> Result<Self> {
        let m = points.len();
        let dim = points.first().map_or(0, |p| p.len());
        if m == 0 {
            return Err(PfeError::Shape("cannot fit a Gaussian to no points".into()));
        }
        let mut mean = vec![0.0; dim];
        for p in points {
            for (a, &v) in mean.iter_mut().zip(*p) {
                *a += v;
            }
        }
        mean.iter_mut().for_each(|v| *v /= m as f64);
        let mut cov = DenseMatrix::zeros(dim, dim);
        for p in points {
            for a in 0..dim {
                for b in 0..=a {
                    let v = (p[a] - mean[a]) * (p[b] - mean[b]);
                    cov.as_mut_slice()[a + b * dim] += v;
                }
            }
        }
        let mut cov = DenseMatrix::from_fn(dim, dim, |a, b| {
            let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
            cov[(hi, lo)] / m as f64
        });
        let trace: f64 = (0..dim).map(|a| cov[(a, a)]).sum();
        let reg = COV_REG * trace / dim.max(1) as f64 + floor;
        for a in 0..dim {
            cov.as_mut_slice()[a + a * dim] += reg;
        }
        Self::new(mean, cov)
    }

    pub fn new(mean: Vec<f64>, covariance: DenseMatrix) -> Result<Self> {
        let dim = mean.len();
        if covariance.shape() != (dim, dim) {
            return Err(PfeError::Shape("covariance does not match mean".into()));
        }
        let mut triplets = Vec::new();
        for a in 0..dim {
            for b in 0..dim {
                triplets.push((a, b, covariance[(a, b)]));
            }
        }
        let factor = cholesky_factor(&SparseMatrix::from_triplets(&triplets, dim, dim)?)?;
        let chol_lower = factor.lower().to_dense();
        let log_det: f64 = (0..dim).map(|a| 2.0 * chol_lower[(a, a)].ln()).sum();
        let log_norm = -0.5 * (dim as f64 * (2.0 * std::f64::consts::PI).ln() + log_det);
        Ok(GaussianModel {
            mean,
            covariance,
            chol_lower,
            log_norm,
        })
    }

    /// Squared Mahalanobis distance of `x` from the mean.
    pub fn mahalanobis_sq(&self, x: &[f64]) -> f64 {
        let dim = self.mean.len();
        let mut z = vec![0.0; dim];
        for a in 0..dim {
            let mut s = x[a] - self.mean[a];
            for b in 0..a {
                s -= self.chol_lower[(a, b)] * z[b];
            }
            z[a] = s / self.chol_lower[(a, a)];
        }
        z.iter().map(|v| v * v).sum()
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        self.log_norm - 0.5 * self.mahalanobis_sq(x)
    }

    /// Density divided by its value at the mean.
    pub fn relative_density(&self, x: &[f64]) -> f64 {
        (-0.5 * self.mahalanobis_sq(x)).exp()
    }
}

/// Clusters with one Gaussian each.
#[derive(Clone, Debug)]
pub struct ClusterFit {
    pub labels: Vec<usize>,
    pub models: Vec<GaussianModel>,
    /// Member count of each model.
    pub sizes: Vec<usize>,
    /// Clusters that came out empty and were dropped.
    pub dropped: usize,
}

/// K-means on the rows of `features`, then a Gaussian per non-empty cluster.
/// The covariance floor scales with the overall feature variance, so
/// zero-spread clusters behave the same at any feature scale.
pub fn fit_clusters_kmeans(features: &DenseMatrix, k: usize, seed: u64) -> Result<ClusterFit> {
    let km = kmeans(features, k, seed, DEFAULT_MAX_ITERS)?;
    let n = features.n_rows();
    let spread = mean_variance(features);
    let floor = COV_FLOOR * if spread > 0.0 { spread } else { 1.0 };
    let rows: Vec<Vec<f64>> = (0..n).map(|i| features.row(i)).collect();
    let mut members: Vec<Vec<&[f64]>> = vec![Vec::new(); k];
    for (i, &l) in km.labels.iter().enumerate() {
        members[l].push(&rows[i]);
    }
    let mut remap = vec![usize::MAX; k];
    let mut models = Vec::new();
    let mut sizes = Vec::new();
    for (c, pts) in members.iter().enumerate() {
        if pts.is_empty() {
            continue;
        }
        remap[c] = models.len();
        models.push(GaussianModel::fit_with_floor(pts, floor)?);
        sizes.push(pts.len());
    }
    Ok(ClusterFit {
        labels: km.labels.iter().map(|&l| remap[l]).collect(),
        dropped: k - models.len(),
        models,
        sizes,
    })
}

fn mean_variance(a: &DenseMatrix) -> f64 {
    let n = a.n_rows() as f64;
    let total: f64 = a
        .columns()
        .map(|c| {
            let m = c.iter().sum::<f64>() / n;
            c.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n
        })
        .sum();
    total / a.n_cols().max(1) as f64
}

/// Sorts models by the mean luminance of their member pixels, then pads with
/// copies of the largest cluster's model up to `target`.
fn order_and_pad(fit: ClusterFit, img: &Image, target: usize) -> Vec<GaussianModel> {
    let k = fit.models.len();
    let mut lum = vec![0.0; k];
    for (i, &l) in fit.labels.iter().enumerate() {
        lum[l] += img.luminance(i);
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        let la = lum[a] / fit.sizes[a] as f64;
        let lb = lum[b] / fit.sizes[b] as f64;
        la.total_cmp(&lb).then(a.cmp(&b))
    });
    let largest = (0..k).max_by_key(|&c| (fit.sizes[c], std::cmp::Reverse(c))).unwrap();
    let mut models: Vec<GaussianModel> = order.iter().map(|&c| fit.models[c].clone()).collect();
    while models.len() < target {
        models.push(fit.models[largest].clone());
    }
    models
}

/// Model indices (0-based) mixed into channel `i` (1-based) of a `d`-channel
/// encoding: `{(2^{d+1−i}·j + k) mod 2^d | j = 1..2^{i−1}, k = 1..2^{d−i}}`,
/// read as 1-based positions in the sorted model sequence.
pub fn channel_members(i: usize, d: usize) -> Vec<usize> {
    let total = 1usize << d;
    let mut out = Vec::with_capacity(total / 2);
    for j in 1..=(1usize << (i - 1)) {
        for k in 1..=(1usize << (d - i)) {
            let pos = ((1usize << (d + 1 - i)) * j + k) % total;
            // position 0 stands for the 2^d-th model
            out.push((pos + total - 1) % total);
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

/// Channel `i` sums the relative densities of the models in
/// [`channel_members`], then is mean-centered.
pub fn density_encode(models: &[GaussianModel], features: &DenseMatrix, d: usize) -> Result<DenseMatrix> {
    if models.len() != 1 << d {
        return Err(PfeError::Shape(format!(
            "density encoding of {d} channels needs {} models, got {}",
            1 << d,
            models.len()
        )));
    }
    let n = features.n_rows();
    let rows: Vec<Vec<f64>> = (0..n).map(|i| features.row(i)).collect();
    let dens: Vec<Vec<f64>> = models
        .iter()
        .map(|m| rows.iter().map(|x| m.relative_density(x)).collect())
        .collect();
    let mut y = DenseMatrix::zeros(n, d);
    for i in 1..=d {
        let col = y.col_mut(i - 1);
        for &m in &channel_members(i, d) {
            for (v, p) in col.iter_mut().zip(&dens[m]) {
                *v += p;
            }
        }
    }
    center_columns(&mut y);
    Ok(y)
}

fn check_cluster_count(n: usize, d: usize) -> Result<usize> {
    if d == 0 || d >= usize::BITS as usize - 1 || 1usize << d > n {
        return Err(PfeError::Config(format!("2^{d} clusters for {n} pixels")));
    }
    Ok(1 << d)
}

/// K-means on RGB into `2^d` clusters, then density encoding.
pub fn init_gmm_density(img: &Image, d: usize, seed: u64) -> Result<DenseMatrix> {
    let k = check_cluster_count(img.n_pixels(), d)?;
    let c = img.channels();
    let feats = DenseMatrix::from_fn(img.n_pixels(), c, |i, j| img.pixel(i)[j]);
    let fit = fit_clusters_kmeans(&feats, k, seed)?;
    let models = order_and_pad(fit, img, k);
    density_encode(&models, &feats, d)
}

/// Weighted spectral clustering: eigenvectors `2..=d+1` scaled by `1/√λ`,
/// k-means into `2^d` clusters, Gaussians fitted in that space, density
/// encoding.
pub fn init_wsc_density(img: &Image, graph: &AffinityGraph, d: usize, seed: u64) -> Result<DenseMatrix> {
    let k = check_cluster_count(img.n_pixels(), d)?;
    if graph.n() != img.n_pixels() {
        return Err(PfeError::DimensionMismatch("graph and image differ in size".into()));
    }
    let feats = wsc_features(graph, d)?;
    let fit = fit_clusters_kmeans(&feats, k, seed)?;
    let models = order_and_pad(fit, img, k);
    density_encode(&models, &feats, d)
}

/// Eigenvector coordinates reweighted by `1/√λ`. Zero eigenvalues (extra
/// connected components) are floored at a tiny fraction of the largest.
pub fn wsc_features(graph: &AffinityGraph, d: usize) -> Result<DenseMatrix> {
    let (values, mut vecs) = laplacian_eigenmap(graph, d)?;
    let floor = values.iter().cloned().fold(0.0, f64::max).max(1e-300) * 1e-12;
    let scale: Vec<f64> = values.iter().map(|&l| 1.0 / l.max(floor).sqrt()).collect();
    for (j, s) in scale.iter().enumerate() {
        vecs.col_mut(j).iter_mut().for_each(|v| *v *= s);
    }
    Ok(vecs)
}
