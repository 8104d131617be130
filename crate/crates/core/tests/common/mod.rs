#![allow(dead_code)]

use nalgebra::DMatrix;
use pfe::graph::{affinity_color, grid_edges, AffinityGraph, Image, LabelMap, NeighborhoodSpec};
use pfe::sparsela::{DenseMatrix, SparseMatrix};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn to_na(a: &DenseMatrix) -> DMatrix<f64> {
    DMatrix::from_column_slice(a.n_rows(), a.n_cols(), a.as_slice())
}

pub fn sparse_to_na(a: &SparseMatrix) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(a.n_rows(), a.n_cols());
    for (i, j, v) in a.triplets() {
        m[(i, j)] += v;
    }
    m
}

pub fn from_na(a: &DMatrix<f64>) -> DenseMatrix {
    DenseMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

/// Gray two-region image: left half at 0.3, right half at `0.3 + step`, plus
/// a horizontal ramp of amplitude `ramp` across the whole image.
pub fn shaded_two_region(w: usize, h: usize, step: f64, ramp: f64) -> Image {
    Image::from_fn(w, h, 3, |x, _y, _c| {
        let base = if x < w / 2 { 0.3 } else { 0.3 + step };
        base + ramp * x as f64 / (w - 1) as f64
    })
    .unwrap()
}

/// The test image of the flatness and segmentation criteria.
pub fn acceptance_image() -> Image {
    shaded_two_region(32, 32, 0.1, 0.1)
}

pub fn half_split_gt(w: usize, h: usize) -> LabelMap {
    LabelMap::new(w, h, (0..w * h).map(|i| u32::from(i % w >= w / 2)).collect()).unwrap()
}

pub fn quadrants(w: usize, h: usize) -> Image {
    Image::from_fn(w, h, 3, |x, y, c| {
        let q = usize::from(x >= w / 2) + 2 * usize::from(y >= h / 2);
        [0.15, 0.4, 0.6, 0.85][q] + 0.03 * c as f64 + 0.05 * y as f64 / h as f64
    })
    .unwrap()
}

pub fn disk(w: usize, h: usize) -> Image {
    Image::from_fn(w, h, 3, |x, y, c| {
        let (dx, dy) = (x as f64 - w as f64 / 2.0, y as f64 - h as f64 / 2.0);
        let inside = (dx * dx + dy * dy).sqrt() < w as f64 / 4.0;
        let v = if inside { 0.7 } else { 0.35 };
        [v, v * 0.8, v * 0.6][c] + 0.05 * x as f64 / w as f64
    })
    .unwrap()
}

/// Color affinity with the default bandwidths for `radius`.
pub fn color_graph(img: &Image, radius: usize) -> AffinityGraph {
    let edges = grid_edges(img.width(), img.height(), NeighborhoodSpec::chessboard(radius));
    affinity_color(img, &edges, 0.1, 4.0 * radius as f64).unwrap()
}

/// Per channel, the fraction of graph edges whose difference is below
/// `1e-3` of the channel's largest edge difference.
pub fn near_zero_fractions(graph: &AffinityGraph, y: &DenseMatrix) -> Vec<f64> {
    y.columns()
        .map(|col| {
            let diffs: Vec<f64> = graph.edges().iter().map(|&(i, j, _)| (col[i] - col[j]).abs()).collect();
            let max = diffs.iter().copied().fold(0.0, f64::max);
            let small = diffs.iter().filter(|&&d| d < 1e-3 * max).count();
            small as f64 / diffs.len() as f64
        })
        .collect()
}

pub fn random_dense(rng: &mut ChaCha8Rng, n: usize, d: usize) -> DenseMatrix {
    DenseMatrix::from_fn(n, d, |_, _| rng.random_range(-1.0..1.0))
}

pub fn random_sparse(rng: &mut ChaCha8Rng, rows: usize, cols: usize, density: f64) -> SparseMatrix {
    let mut t = Vec::new();
    for i in 0..rows {
        for j in 0..cols {
            if rng.random_bool(density) {
                t.push((i, j, rng.random_range(-2.0..2.0)));
            }
        }
    }
    SparseMatrix::from_triplets(&t, rows, cols).unwrap()
}

/// `GᵀG + δI` with a sparse random `G`; not diagonally dominant in general.
pub fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> SparseMatrix {
    let g = random_sparse(rng, n + 3, n, 0.2);
    let mut t: Vec<_> = g.gram().triplets().collect();
    t.extend((0..n).map(|i| (i, i, 0.05)));
    SparseMatrix::from_triplets(&t, n, n).unwrap()
}

/// O(n²) pair-counting Rand index.
pub fn brute_rand(a: &[u32], b: &[u32]) -> f64 {
    let n = a.len();
    if n < 2 {
        return 1.0;
    }
    let mut agree = 0u64;
    let mut pairs = 0u64;
    for i in 0..n {
        for j in i + 1..n {
            pairs += 1;
            if (a[i] == a[j]) == (b[i] == b[j]) {
                agree += 1;
            }
        }
    }
    agree as f64 / pairs as f64
}

pub fn entropy(labels: &[u32]) -> f64 {
    let n = labels.len() as f64;
    let mut counts = std::collections::BTreeMap::new();
    labels.iter().for_each(|l| *counts.entry(*l).or_insert(0usize) += 1);
    -counts.values().map(|&c| c as f64 / n * (c as f64 / n).ln()).sum::<f64>()
}

pub fn brute_vi(a: &[u32], b: &[u32]) -> f64 {
    let joint: Vec<u32> = a.iter().zip(b).map(|(x, y)| x * 1000 + y).collect();
    // H(A) + H(B) − 2 I(A;B) = 2 H(A,B) − H(A) − H(B)
    2.0 * entropy(&joint) - entropy(a) - entropy(b)
}

pub fn brute_covering(seg: &[u32], gt: &[u32]) -> f64 {
    let regions = |l: &[u32]| {
        let mut ids: Vec<u32> = l.to_vec();
        ids.sort_unstable();
        ids.dedup();
        ids
    };
    let n = gt.len() as f64;
    let mut total = 0.0;
    for r in regions(gt) {
        let size = gt.iter().filter(|&&g| g == r).count() as f64;
        let best = regions(seg)
            .into_iter()
            .map(|s| {
                let inter = gt.iter().zip(seg).filter(|(&g, &x)| g == r && x == s).count() as f64;
                let union = gt.iter().zip(seg).filter(|(&g, &x)| g == r || x == s).count() as f64;
                inter / union
            })
            .fold(0.0, f64::max);
        total += size * best;
    }
    total / n
}
