//! K-means segmentation of embedding channels.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{PfeError, Result};
use crate::eval::GroundTruthSet;
use crate::graph::LabelMap;
use crate::pfe::EmbeddingResult;
use crate::sparsela::DenseMatrix;

pub const DEFAULT_MAX_ITERS: usize = 100;

/// Cluster counts tried by [`ClusterScheme::Dynamic`].
pub const DYNAMIC_KS: [usize; 11] = [5, 7, 9, 11, 13, 15, 17, 19, 21, 23, 25];

/// Below this many points assignment stays on the calling thread.
const PAR_THRESHOLD: usize = 4096;

#[derive(Clone, Debug, PartialEq)]
pub struct KMeansResult {
    pub labels: Vec<usize>,
    /// `k × dim`, one center per row.
    pub centers: DenseMatrix,
    pub inertia: f64,
    pub iterations: usize,
}

/// Lloyd's algorithm with k-means++ seeding. Rows of `features` are points.
pub fn kmeans(features: &DenseMatrix, k: usize, seed: u64, max_iters: usize) -> Result<KMeansResult> {
    let (n, dim) = features.shape();
    if k == 0 || k > n {
        return Err(PfeError::Shape(format!("k = {k} for {n} points")));
    }
    let pts = row_major(features);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = seed_plus_plus(&pts, n, dim, k, &mut rng);

    let mut labels = vec![usize::MAX; n];
    let mut dist = vec![0.0; n];
    let mut iterations = 0;
    loop {
        let changed = assign(&pts, dim, &centers, &mut labels, &mut dist);
        if iterations > 0 && !changed || iterations == max_iters {
            break;
        }
        iterations += 1;
        update_centers(&pts, dim, &labels, &mut dist, &mut centers);
    }
    let inertia = dist.iter().sum();
    let centers = DenseMatrix::from_fn(k, dim, |c, j| centers[c * dim + j]);
    Ok(KMeansResult {
        labels,
        centers,
        inertia,
        iterations,
    })
}

fn row_major(a: &DenseMatrix) -> Vec<f64> {
    let (n, dim) = a.shape();
    let mut out = vec![0.0; n * dim];
    for (j, col) in a.columns().enumerate() {
        for (i, &v) in col.iter().enumerate() {
            out[i * dim + j] = v;
        }
    }
    out
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn seed_plus_plus(pts: &[f64], n: usize, dim: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let point = |i: usize| &pts[i * dim..(i + 1) * dim];
    let mut chosen = vec![false; n];
    let mut centers = Vec::with_capacity(k * dim);
    let first = rng.random_range(0..n);
    chosen[first] = true;
    centers.extend_from_slice(point(first));
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(point(i), point(first))).collect();
    for _ in 1..k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if w > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            // rounding can leave the target past the last positive weight
            pick.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).unwrap())
        } else {
            chosen.iter().position(|&c| !c).unwrap()
        };
        chosen[next] = true;
        centers.extend_from_slice(point(next));
        for (i, v) in d2.iter_mut().enumerate() {
            *v = v.min(sq_dist(point(i), point(next)));
        }
    }
    centers
}

/// Nearest center per point, ties to the lowest index. Returns whether any
/// label changed.
fn assign(pts: &[f64], dim: usize, centers: &[f64], labels: &mut [usize], dist: &mut [f64]) -> bool {
    let nearest = |p: &[f64]| -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (c, center) in centers.chunks_exact(dim).enumerate() {
            let d = sq_dist(p, center);
            if d < best.1 {
                best = (c, d);
            }
        }
        best
    };
    let work = |(p, (l, d)): (&[f64], (&mut usize, &mut f64))| -> bool {
        let (c, dd) = nearest(p);
        *d = dd;
        let changed = *l != c;
        *l = c;
        changed
    };
    if labels.len() >= PAR_THRESHOLD && dim > 0 {
        pts.par_chunks_exact(dim)
            .zip(labels.par_iter_mut().zip(dist.par_iter_mut()))
            .map(work)
            .reduce(|| false, |a, b| a | b)
    } else if dim == 0 {
        labels.iter_mut().fold(false, |acc, l| {
            let changed = *l != 0;
            *l = 0;
            acc | changed
        })
    } else {
        pts.chunks_exact(dim)
            .zip(labels.iter_mut().zip(dist.iter_mut()))
            .map(work)
            .fold(false, |a, b| a | b)
    }
}

/// Means in point order. An empty cluster takes the point farthest from its
/// current center, which is then moved out of its old cluster.
fn update_centers(pts: &[f64], dim: usize, labels: &[usize], dist: &mut [f64], centers: &mut [f64]) {
    let k = centers.len() / dim.max(1);
    let mut sums = vec![0.0; k * dim];
    let mut counts = vec![0usize; k];
    for (i, &l) in labels.iter().enumerate() {
        counts[l] += 1;
        for j in 0..dim {
            sums[l * dim + j] += pts[i * dim + j];
        }
    }
    for c in 0..k {
        if counts[c] > 0 {
            for j in 0..dim {
                centers[c * dim + j] = sums[c * dim + j] / counts[c] as f64;
            }
        }
    }
    for c in 0..k {
        if counts[c] > 0 {
            continue;
        }
        let mut far = None;
        let mut far_d = -1.0;
        for (i, &d) in dist.iter().enumerate() {
            if counts[labels[i]] > 1 && d > far_d {
                far = Some(i);
                far_d = d;
            }
        }
        let Some(i) = far else { continue };
        counts[labels[i]] -= 1;
        counts[c] = 1;
        dist[i] = 0.0;
        centers[c * dim..(c + 1) * dim].copy_from_slice(&pts[i * dim..(i + 1) * dim]);
    }
}

/// A label map with labels compacted to `0..k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Segmentation {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<u32>,
    pub k: usize,
}

impl Segmentation {
    /// Relabels in order of increasing original label.
    pub fn from_labels(width: usize, height: usize, labels: &[usize]) -> Result<Self> {
        if labels.len() != width * height {
            return Err(PfeError::DimensionMismatch(format!(
                "{} labels for a {width}x{height} grid",
                labels.len()
            )));
        }
        let mut ids: Vec<usize> = labels.to_vec();
        ids.sort_unstable();
        ids.dedup();
        let labels = labels
            .iter()
            .map(|l| ids.binary_search(l).unwrap() as u32)
            .collect();
        Ok(Segmentation {
            width,
            height,
            labels,
            k: ids.len(),
        })
    }

    pub fn to_label_map(&self) -> LabelMap {
        LabelMap {
            width: self.width,
            height: self.height,
            labels: self.labels.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClusterScheme {
    Explicit(usize),
    /// One run per ground truth, with that ground truth's segment count.
    Fixed,
    /// One run per k in [`DYNAMIC_KS`].
    Dynamic,
}

/// Cluster counts a scheme asks for.
pub fn scheme_ks(scheme: ClusterScheme, gt: Option<&GroundTruthSet>) -> Result<Vec<usize>> {
    match scheme {
        ClusterScheme::Explicit(k) if k >= 1 => Ok(vec![k]),
        ClusterScheme::Explicit(_) => Err(PfeError::Config("k must be at least 1".into())),
        ClusterScheme::Fixed => {
            let gt = gt.ok_or_else(|| PfeError::Config("the fixed scheme needs ground truth".into()))?;
            Ok(gt.maps().iter().map(|m| m.n_segments().max(1)).collect())
        }
        ClusterScheme::Dynamic => {
            if gt.is_none() {
                return Err(PfeError::Config("the dynamic scheme needs ground truth".into()));
            }
            Ok(DYNAMIC_KS.to_vec())
        }
    }
}

/// Clusters the rows of `features` (an `n × d` channel matrix) once per k of
/// the scheme. k is capped at the pixel count.
pub fn segment_features(
    features: &DenseMatrix,
    width: usize,
    height: usize,
    scheme: ClusterScheme,
    gt: Option<&GroundTruthSet>,
    seed: u64,
) -> Result<Vec<Segmentation>> {
    if features.n_rows() != width * height {
        return Err(PfeError::DimensionMismatch(format!(
            "{} feature rows for a {width}x{height} grid",
            features.n_rows()
        )));
    }
    if let Some(gt) = gt {
        gt.check_dims(width, height)?;
    }
    scheme_ks(scheme, gt)?
        .into_iter()
        .map(|k| {
            let km = kmeans(features, k.min(features.n_rows()), seed, DEFAULT_MAX_ITERS)?;
            Segmentation::from_labels(width, height, &km.labels)
        })
        .collect()
}

/// [`segment_features`] on the raw or residual-weighted channels.
pub fn segment_clustering(
    result: &EmbeddingResult,
    width: usize,
    height: usize,
    scheme: ClusterScheme,
    use_weighted: bool,
    gt: Option<&GroundTruthSet>,
    seed: u64,
) -> Result<Vec<Segmentation>> {
    let features = if use_weighted { &result.y_weighted } else { &result.y };
    segment_features(features, width, height, scheme, gt, seed)
}
