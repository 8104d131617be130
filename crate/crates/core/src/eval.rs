//! Region-based segmentation metrics: Rand index, variation of information
//! and segmentation covering.
//!
//! Everything goes through the contingency table of the two label maps.
//! Floating-point sums are taken in an order that depends only on the table's
//! counts, so relabeling either map leaves every metric bitwise unchanged.

use std::collections::HashMap;

use crate::error::{PfeError, Result};
use crate::graph::LabelMap;

/// One or more reference segmentations of the same image.
#[derive(Clone, Debug)]
pub struct GroundTruthSet {
    maps: Vec<LabelMap>,
}

impl GroundTruthSet {
    pub fn new(maps: Vec<LabelMap>) -> Result<Self> {
        let first = maps
            .first()
            .ok_or_else(|| PfeError::Shape("empty ground-truth set".into()))?;
        let (w, h) = (first.width, first.height);
        if maps.iter().any(|m| m.width != w || m.height != h) {
            return Err(PfeError::DimensionMismatch(
                "ground truths differ in size".into(),
            ));
        }
        Ok(GroundTruthSet { maps })
    }

    pub fn maps(&self) -> &[LabelMap] {
        &self.maps
    }

    pub fn width(&self) -> usize {
        self.maps[0].width
    }

    pub fn height(&self) -> usize {
        self.maps[0].height
    }

    pub(crate) fn check_dims(&self, width: usize, height: usize) -> Result<()> {
        if self.width() != width || self.height() != height {
            return Err(PfeError::DimensionMismatch(format!(
                "ground truth is {}x{}, expected {width}x{height}",
                self.width(),
                self.height()
            )));
        }
        Ok(())
    }
}

/// Joint label histogram.
struct Contingency {
    n: u64,
    /// `(n_ij, a_i, b_j)` for every non-empty cell.
    cells: Vec<(u64, u64, u64)>,
    a: Vec<u64>,
    b: Vec<u64>,
}

fn compact(labels: &[u32]) -> (Vec<usize>, usize) {
    let mut ids: HashMap<u32, usize> = HashMap::new();
    let out = labels
        .iter()
        .map(|&l| {
            let next = ids.len();
            *ids.entry(l).or_insert(next)
        })
        .collect();
    (out, ids.len())
}

fn contingency(seg: &LabelMap, gt: &LabelMap) -> Result<Contingency> {
    if seg.width != gt.width || seg.height != gt.height || seg.labels.len() != gt.labels.len() {
        return Err(PfeError::DimensionMismatch(format!(
            "segmentation is {}x{}, ground truth {}x{}",
            seg.width, seg.height, gt.width, gt.height
        )));
    }
    let (sa, ka) = compact(&seg.labels);
    let (sb, kb) = compact(&gt.labels);
    let mut a = vec![0u64; ka];
    let mut b = vec![0u64; kb];
    let mut joint: HashMap<(usize, usize), u64> = HashMap::new();
    for (&i, &j) in sa.iter().zip(&sb) {
        a[i] += 1;
        b[j] += 1;
        *joint.entry((i, j)).or_insert(0) += 1;
    }
    let cells = joint.into_iter().map(|((i, j), c)| (c, a[i], b[j])).collect();
    Ok(Contingency {
        n: sa.len() as u64,
        cells,
        a,
        b,
    })
}

fn pairs(x: u64) -> u128 {
    let x = x as u128;
    x * x.saturating_sub(1) / 2
}

/// Fraction of pixel pairs on which the two maps agree about
/// same-region membership. Exact integer counting.
pub fn rand_index(seg: &LabelMap, gt: &LabelMap) -> Result<f64> {
    let t = contingency(seg, gt)?;
    let total = pairs(t.n);
    if total == 0 {
        return Ok(1.0);
    }
    let joint: u128 = t.cells.iter().map(|c| pairs(c.0)).sum();
    let sa: u128 = t.a.iter().map(|&x| pairs(x)).sum();
    let sb: u128 = t.b.iter().map(|&x| pairs(x)).sum();
    let agree = total + 2 * joint - sa - sb;
    Ok(agree as f64 / total as f64)
}

/// `H(S) + H(G) − 2 I(S;G)` in nats.
pub fn variation_of_information(seg: &LabelMap, gt: &LabelMap) -> Result<f64> {
    let t = contingency(seg, gt)?;
    let n = t.n as f64;
    let mut terms: Vec<(u64, u64, u64)> = t
        .cells
        .iter()
        .map(|&(c, a, b)| (c, a.min(b), a.max(b)))
        .collect();
    terms.sort_unstable();
    // VI = Σ p_ij [ln(p_i / p_ij) + ln(q_j / p_ij)]
    let vi = terms
        .iter()
        .map(|&(c, lo, hi)| {
            let c = c as f64;
            (c / n) * ((lo as f64 / c).ln() + (hi as f64 / c).ln())
        })
        .sum::<f64>();
    Ok(vi.max(0.0))
}

/// How well the regions of `gt` are covered by regions of `seg`:
/// `(1/n) Σ_{R ∈ gt} |R| · max_{R' ∈ seg} IoU(R, R')`.
pub fn covering(seg: &LabelMap, gt: &LabelMap) -> Result<f64> {
    let t = contingency(gt, seg)?;
    let (ga, _) = compact(&gt.labels);
    let (sb, _) = compact(&seg.labels);
    let mut joint: HashMap<(usize, usize), u64> = HashMap::new();
    for (&i, &j) in ga.iter().zip(&sb) {
        *joint.entry((i, j)).or_insert(0) += 1;
    }
    let mut max_iou = vec![0.0f64; t.a.len()];
    for (&(i, j), &c) in &joint {
        let iou = c as f64 / (t.a[i] + t.b[j] - c) as f64;
        max_iou[i] = max_iou[i].max(iou);
    }
    let mut terms: Vec<f64> = t
        .a
        .iter()
        .zip(&max_iou)
        .map(|(&size, &iou)| size as f64 * iou)
        .collect();
    terms.sort_unstable_by(f64::total_cmp);
    Ok(terms.iter().sum::<f64>() / t.n as f64)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Metrics {
    pub pri: f64,
    pub vi: f64,
    pub covering: f64,
}

/// Metrics against a ground-truth set: per-ground-truth values and their
/// means.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricReport {
    pub pri: f64,
    pub vi: f64,
    pub covering: f64,
    pub per_gt: Vec<Metrics>,
}

impl MetricReport {
    pub fn mean(&self) -> Metrics {
        Metrics {
            pri: self.pri,
            vi: self.vi,
            covering: self.covering,
        }
    }

    fn from_rows(per_gt: Vec<Metrics>) -> Self {
        let k = per_gt.len() as f64;
        MetricReport {
            pri: per_gt.iter().map(|m| m.pri).sum::<f64>() / k,
            vi: per_gt.iter().map(|m| m.vi).sum::<f64>() / k,
            covering: per_gt.iter().map(|m| m.covering).sum::<f64>() / k,
            per_gt,
        }
    }
}

/// Direction of the covering score.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CoveringDirection {
    /// The segmentation covers the ground truth.
    #[default]
    SegCoversGt,
    GtCoversSeg,
}

pub fn evaluate(seg: &LabelMap, gts: &GroundTruthSet) -> Result<MetricReport> {
    evaluate_with(seg, gts, CoveringDirection::default())
}

pub fn evaluate_with(
    seg: &LabelMap,
    gts: &GroundTruthSet,
    direction: CoveringDirection,
) -> Result<MetricReport> {
    let per_gt = gts
        .maps()
        .iter()
        .map(|gt| {
            Ok(Metrics {
                pri: rand_index(seg, gt)?,
                vi: variation_of_information(seg, gt)?,
                covering: match direction {
                    CoveringDirection::SegCoversGt => covering(seg, gt)?,
                    CoveringDirection::GtCoversSeg => covering(gt, seg)?,
                },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricReport::from_rows(per_gt))
}

/// Reports for several candidate segmentations and the best candidate under
/// each metric (first one on ties).
#[derive(Clone, Debug, PartialEq)]
pub struct CandidateReport {
    pub reports: Vec<MetricReport>,
    pub best_pri: usize,
    pub best_vi: usize,
    pub best_covering: usize,
}

impl CandidateReport {
    /// Mean over all candidates, used for the fixed scheme.
    pub fn average(&self) -> Metrics {
        let k = self.reports.len() as f64;
        Metrics {
            pri: self.reports.iter().map(|r| r.pri).sum::<f64>() / k,
            vi: self.reports.iter().map(|r| r.vi).sum::<f64>() / k,
            covering: self.reports.iter().map(|r| r.covering).sum::<f64>() / k,
        }
    }
}

pub fn evaluate_candidates(segs: &[LabelMap], gts: &GroundTruthSet) -> Result<CandidateReport> {
    evaluate_candidates_with(segs, gts, CoveringDirection::default())
}

pub fn evaluate_candidates_with(
    segs: &[LabelMap],
    gts: &GroundTruthSet,
    direction: CoveringDirection,
) -> Result<CandidateReport> {
    if segs.is_empty() {
        return Err(PfeError::Shape("no candidate segmentations".into()));
    }
    let reports = segs
        .iter()
        .map(|s| evaluate_with(s, gts, direction))
        .collect::<Result<Vec<_>>>()?;
    let argbest = |key: &dyn Fn(&MetricReport) -> f64| {
        let mut best = 0;
        for (i, r) in reports.iter().enumerate() {
            if key(r) > key(&reports[best]) {
                best = i;
            }
        }
        best
    };
    Ok(CandidateReport {
        best_pri: argbest(&|r| r.pri),
        best_vi: argbest(&|r| -r.vi),
        best_covering: argbest(&|r| r.covering),
        reports,
    })
}
