//! Pixel-grid graphs: neighborhoods, affinities, the edge-difference matrices
//! and boundary sparsity statistics.

use crate::error::{PfeError, Result};
use crate::sparsela::SparseMatrix;

/// Smallest affinity an edge may carry. Keeps every degree positive and the
/// solver's system matrix definite.
pub const WEIGHT_FLOOR: f64 = 1e-6;

/// Image with values in `[0, 1]`, row-major and channel-interleaved.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(PfeError::Shape(format!("{channels} channels; expected 1 or 3")));
        }
        if data.len() != width * height * channels {
            return Err(PfeError::Shape(format!(
                "{} samples for a {width}x{height}x{channels} image",
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(PfeError::Shape(format!("sample {v} outside [0, 1]")));
        }
        Ok(Image {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(x, y, c));
                }
            }
        }
        Self::new(width, height, channels, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn n_pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Samples of pixel `i` (row-major index).
    #[inline]
    pub fn pixel(&self, i: usize) -> &[f64] {
        &self.data[i * self.channels..(i + 1) * self.channels]
    }

    /// Rec. 601 luma for color images, the sample itself for grayscale.
    pub fn luminance(&self, i: usize) -> f64 {
        let p = self.pixel(i);
        if self.channels == 3 {
            0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]
        } else {
            p[0]
        }
    }
}

/// Neighborhood shape on the pixel grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Connectivity {
    /// Square `(2r+1)×(2r+1)` window.
    Chessboard,
    /// Diamond `|dx| + |dy| ≤ r`; radius 1 is 4-connectivity.
    Manhattan,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NeighborhoodSpec {
    pub radius: usize,
    pub connectivity: Connectivity,
}

impl NeighborhoodSpec {
    pub fn chessboard(radius: usize) -> Self {
        NeighborhoodSpec {
            radius,
            connectivity: Connectivity::Chessboard,
        }
    }

    pub fn four_connected() -> Self {
        NeighborhoodSpec {
            radius: 1,
            connectivity: Connectivity::Manhattan,
        }
    }

    fn contains(&self, dx: usize, dy: usize) -> bool {
        match self.connectivity {
            Connectivity::Chessboard => dx.max(dy) <= self.radius,
            Connectivity::Manhattan => dx + dy <= self.radius,
        }
    }
}

/// Undirected weighted graph over the pixels; each pair stored once with
/// `i < j`.
#[derive(Clone, Debug)]
pub struct AffinityGraph {
    n: usize,
    width: usize,
    height: usize,
    edges: Vec<(usize, usize, f64)>,
    degrees: Vec<f64>,
}

impl AffinityGraph {
    /// Validates edges and computes degrees.
    pub fn new(width: usize, height: usize, edges: Vec<(usize, usize, f64)>) -> Result<Self> {
        let n = width * height;
        let mut degrees = vec![0.0; n];
        for &(i, j, w) in &edges {
            if i >= j || j >= n {
                return Err(PfeError::Shape(format!("invalid edge ({i}, {j}) for {n} pixels")));
            }
            if !(w >= 0.0) || !w.is_finite() {
                return Err(PfeError::Shape(format!("invalid weight {w} on edge ({i}, {j})")));
            }
            degrees[i] += w;
            degrees[j] += w;
        }
        Ok(AffinityGraph {
            n,
            width,
            height,
            edges,
            degrees,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    /// Graph Laplacian `D − W`, equal to `M′ᵀM′`.
    pub fn laplacian(&self) -> SparseMatrix {
        let mut t = Vec::with_capacity(2 * self.edges.len() + self.n);
        for &(i, j, w) in &self.edges {
            t.push((i, j, -w));
            t.push((j, i, -w));
        }
        t.extend(self.degrees.iter().enumerate().map(|(i, &d)| (i, i, d)));
        SparseMatrix::from_triplets(&t, self.n, self.n).expect("edges validated")
    }
}

/// Per-pixel integer labels, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelMap {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<u32>,
}

impl LabelMap {
    pub fn new(width: usize, height: usize, labels: Vec<u32>) -> Result<Self> {
        if labels.len() != width * height {
            return Err(PfeError::Shape(format!(
                "{} labels for a {width}x{height} map",
                labels.len()
            )));
        }
        Ok(LabelMap {
            width,
            height,
            labels,
        })
    }

    pub fn n_pixels(&self) -> usize {
        self.labels.len()
    }

    /// Number of distinct labels.
    pub fn n_segments(&self) -> usize {
        let mut l = self.labels.clone();
        l.sort_unstable();
        l.dedup();
        l.len()
    }
}

/// All unordered pixel pairs within the neighborhood, sorted by `(i, j)`.
pub fn grid_edges(width: usize, height: usize, spec: NeighborhoodSpec) -> Vec<(usize, usize)> {
    let r = spec.radius as isize;
    let mut edges = Vec::new();
    for y in 0..height as isize {
        for x in 0..width as isize {
            let i = (y * width as isize + x) as usize;
            // forward half-window keeps i < j in row-major order
            for dy in 0..=r {
                let dx_range = if dy == 0 { 1..=r } else { -r..=r };
                for dx in dx_range {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny >= height as isize || nx >= width as isize {
                        continue;
                    }
                    if !spec.contains(dx.unsigned_abs(), dy.unsigned_abs()) {
                        continue;
                    }
                    edges.push((i, (ny * width as isize + nx) as usize));
                }
            }
        }
    }
    edges
}

/// Normalized-cut style affinity
/// `W_ij = exp(−‖c_i − c_j‖² / σ_c²) · exp(−‖x_i − x_j‖² / σ_x²)`.
pub fn affinity_color(
    img: &Image,
    edges: &[(usize, usize)],
    sigma_c: f64,
    sigma_x: f64,
) -> Result<AffinityGraph> {
    if !(sigma_c > 0.0) || !(sigma_x > 0.0) {
        return Err(PfeError::Config("sigma_c and sigma_x must be positive".into()));
    }
    let w = img.width;
    let weighted = edges
        .iter()
        .map(|&(i, j)| {
            let dc: f64 = img
                .pixel(i)
                .iter()
                .zip(img.pixel(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            let (xi, yi) = ((i % w) as f64, (i / w) as f64);
            let (xj, yj) = ((j % w) as f64, (j / w) as f64);
            let dx = (xi - xj).powi(2) + (yi - yj).powi(2);
            let a = (-dc / (sigma_c * sigma_c)).exp() * (-dx / (sigma_x * sigma_x)).exp();
            (i, j, a.max(WEIGHT_FLOOR))
        })
        .collect();
    AffinityGraph::new(img.width, img.height, weighted)
}

/// Intervening-contour affinity `W_ij = exp(−max_q b(q) / ρ)` over the
/// Bresenham segment from `i` to `j`, endpoints included.
pub fn affinity_intervening_contour(
    boundary: &Image,
    edges: &[(usize, usize)],
    rho: f64,
) -> Result<AffinityGraph> {
    if !(rho > 0.0) {
        return Err(PfeError::Config("rho must be positive".into()));
    }
    if boundary.channels != 1 {
        return Err(PfeError::DimensionMismatch(
            "boundary map must have a single channel".into(),
        ));
    }
    let w = boundary.width;
    let n = boundary.n_pixels();
    let mut weighted = Vec::with_capacity(edges.len());
    for &(i, j) in edges {
        if i >= n || j >= n {
            return Err(PfeError::DimensionMismatch(format!(
                "edge ({i}, {j}) outside a {}x{} boundary map",
                boundary.width, boundary.height
            )));
        }
        let mut peak = 0.0f64;
        bresenham(
            (i % w) as isize,
            (i / w) as isize,
            (j % w) as isize,
            (j / w) as isize,
            |x, y| peak = peak.max(boundary.data[y * w + x]),
        );
        weighted.push((i, j, (-peak / rho).exp().max(WEIGHT_FLOOR)));
    }
    AffinityGraph::new(boundary.width, boundary.height, weighted)
}

/// Visits every pixel on the integer line from `(x0, y0)` to `(x1, y1)`.
pub(crate) fn bresenham(
    mut x0: isize,
    mut y0: isize,
    x1: isize,
    y1: isize,
    mut visit: impl FnMut(usize, usize),
) {
    let dx = (x1 - x0).abs();
    let dy = -(y1 - y0).abs();
    let sx = if x0 < x1 { 1 } else { -1 };
    let sy = if y0 < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    loop {
        visit(x0 as usize, y0 as usize);
        if x0 == x1 && y0 == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x0 += sx;
        }
        if e2 <= dx {
            err += dx;
            y0 += sy;
        }
    }
}

fn difference_matrix(g: &AffinityGraph, f: impl Fn(f64) -> f64) -> SparseMatrix {
    let mut offsets = Vec::with_capacity(g.edges.len() + 1);
    let mut cols = Vec::with_capacity(2 * g.edges.len());
    let mut vals = Vec::with_capacity(2 * g.edges.len());
    offsets.push(0);
    for &(i, j, w) in &g.edges {
        let v = f(w);
        if v != 0.0 {
            cols.extend_from_slice(&[i, j]);
            vals.extend_from_slice(&[v, -v]);
        }
        offsets.push(vals.len());
    }
    SparseMatrix::from_sorted_rows(g.edges.len(), g.n, offsets, cols, vals)
}

/// t×n edge-difference matrix: row `k` holds `+W_ij` at `i` and `−W_ij` at `j`.
pub fn build_m(g: &AffinityGraph) -> SparseMatrix {
    difference_matrix(g, |w| w)
}

/// Same as [`build_m`] with `√W_ij` entries, so that `M′ᵀM′ = D − W`.
pub fn build_m_prime(g: &AffinityGraph) -> SparseMatrix {
    difference_matrix(g, f64::sqrt)
}

/// Boundary sparsity statistics of a label map.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryStats {
    /// 4-connected label transitions (crack edges) per pixel.
    pub r_b: f64,
    /// Fraction of neighborhood edges joining different labels.
    pub r_e: f64,
    pub crossing_edges: usize,
    pub total_edges: usize,
}

pub fn boundary_edge_stats(gt: &LabelMap, spec: NeighborhoodSpec) -> BoundaryStats {
    let (w, h) = (gt.width, gt.height);
    let edges = grid_edges(w, h, spec);
    let crossing_edges = edges
        .iter()
        .filter(|&&(i, j)| gt.labels[i] != gt.labels[j])
        .count();
    let cracks = grid_edges(w, h, NeighborhoodSpec::four_connected())
        .iter()
        .filter(|&&(i, j)| gt.labels[i] != gt.labels[j])
        .count();
    let area = (w * h) as f64;
    BoundaryStats {
        r_b: if area > 0.0 { cracks as f64 / area } else { 0.0 },
        r_e: if edges.is_empty() {
            0.0
        } else {
            crossing_edges as f64 / edges.len() as f64
        },
        crossing_edges,
        total_edges: edges.len(),
    }
}
