//! File formats: Netpbm images and label maps, PFEB channel files, CSV.

mod csv;
mod netpbm;
mod pfeb;

pub(crate) use csv::metrics_csv;
pub use csv::{channel_histograms, write_histogram_csv, write_metrics_csv, write_trace_csv, HIST_BINS};
pub use netpbm::{
    decode_netpbm, encode_pgm16, encode_pgm8, encode_ppm8, read_image, read_label_map, write_image,
    write_label_map, write_pgm8, Netpbm,
};
pub use pfeb::{decode_pfeb, encode_pfeb, read_pfeb, write_pfeb, Channels};

/// Channels whose range is at most this fraction of their magnitude count as
/// constant in previews and histograms.
pub const FLAT_RANGE: f64 = 1e-12;

/// `(min, max)` of `values`, or `None` when the channel is constant up to
/// [`FLAT_RANGE`].
pub(crate) fn value_range(values: &[f64]) -> Option<(f64, f64)> {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    (hi - lo > FLAT_RANGE * lo.abs().max(hi.abs())).then_some((lo, hi))
}

/// Per-channel affine map of `[min, max]` onto `0..=255`; constant channels
/// map to 128.
pub fn normalize_to_u8(values: &[f64]) -> Vec<u8> {
    let Some((lo, hi)) = value_range(values) else {
        return vec![128; values.len()];
    };
    values
        .iter()
        .map(|&v| ((v - lo) / (hi - lo) * 255.0).round() as u8)
        .collect()
}
