//! Plain CSV writers. Floats use Rust's shortest round-trip formatting.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{PfeError, Result};
use crate::eval::MetricReport;
use crate::sparsela::DenseMatrix;

pub const HIST_BINS: usize = 256;

fn save(path: &Path, text: String) -> Result<()> {
    fs::write(path, text).map_err(|e| PfeError::io(path, e))
}

/// `iteration,total,ch0,…` with one row per inner iteration.
pub fn write_trace_csv(path: impl AsRef<Path>, totals: &[f64], per_channel: &[Vec<f64>]) -> Result<()> {
    let d = per_channel.first().map_or(0, Vec::len);
    let mut s = String::from("iteration,total");
    for v in 0..d {
        write!(s, ",ch{v}").unwrap();
    }
    s.push('\n');
    for (it, (total, per)) in totals.iter().zip(per_channel).enumerate() {
        write!(s, "{it},{total}").unwrap();
        for v in per {
            write!(s, ",{v}").unwrap();
        }
        s.push('\n');
    }
    save(path.as_ref(), s)
}

/// Counts over [`HIST_BINS`] uniform bins spanning each channel's range.
/// A constant channel (see [`super::FLAT_RANGE`]) puts all its mass in the
/// middle bin.
pub fn channel_histograms(y: &DenseMatrix) -> Vec<Vec<u64>> {
    y.columns()
        .map(|col| {
            let mut h = vec![0u64; HIST_BINS];
            let range = super::value_range(col);
            for &v in col {
                let b = match range {
                    Some((lo, hi)) => (((v - lo) / (hi - lo)) * HIST_BINS as f64) as usize,
                    None => HIST_BINS / 2,
                };
                h[b.min(HIST_BINS - 1)] += 1;
            }
            h
        })
        .collect()
}

/// `bin,ch0,…` counts.
pub fn write_histogram_csv(path: impl AsRef<Path>, y: &DenseMatrix) -> Result<()> {
    let hists = channel_histograms(y);
    let mut s = String::from("bin");
    for v in 0..hists.len() {
        write!(s, ",ch{v}").unwrap();
    }
    s.push('\n');
    for b in 0..HIST_BINS {
        write!(s, "{b}").unwrap();
        for h in &hists {
            write!(s, ",{}", h[b]).unwrap();
        }
        s.push('\n');
    }
    save(path.as_ref(), s)
}

/// `segmentation,gt,pri,vi,covering` rows per ground truth plus a `mean` row
/// per segmentation.
pub fn write_metrics_csv(path: impl AsRef<Path>, rows: &[(String, MetricReport)]) -> Result<()> {
    save(path.as_ref(), metrics_csv(rows))
}

pub(crate) fn metrics_csv(rows: &[(String, MetricReport)]) -> String {
    let mut s = String::from("segmentation,gt,pri,vi,covering\n");
    for (name, r) in rows {
        for (i, m) in r.per_gt.iter().enumerate() {
            writeln!(s, "{name},{i},{},{},{}", m.pri, m.vi, m.covering).unwrap();
        }
        writeln!(s, "{name},mean,{},{},{}", r.pri, r.vi, r.covering).unwrap();
    }
    s
}
