use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pfe::graph::LabelMap;
use pfe::io::{encode_pgm16, encode_pgm8, encode_ppm8, read_label_map, read_pfeb, HIST_BINS};
use tempfile::TempDir;

fn pfe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pfe")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = pfe(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_ppm(path: &Path, w: usize, h: usize, f: impl Fn(usize, usize) -> [u8; 3]) {
    let rgb: Vec<u8> = (0..w * h).flat_map(|i| f(i % w, i / w)).collect();
    fs::write(path, encode_ppm8(w, h, &rgb)).unwrap();
}

fn write_labels(path: &Path, w: usize, h: usize, f: impl Fn(usize, usize) -> u16) {
    let px: Vec<u16> = (0..w * h).map(|i| f(i % w, i / w)).collect();
    fs::write(path, encode_pgm16(w, h, &px)).unwrap();
}

/// 16×16 image split at column `split`, plus its ground truth.
fn two_region(dir: &Path, split: usize) -> (PathBuf, PathBuf) {
    let img = dir.join("two.ppm");
    let gt = dir.join("two_gt.pgm");
    write_ppm(&img, 16, 16, |x, _| if x < split { [51; 3] } else { [204; 3] });
    write_labels(&gt, 16, 16, |x, _| u16::from(x >= split));
    (img, gt)
}

fn histograms(path: &Path) -> Vec<Vec<u64>> {
    let text = fs::read_to_string(path).unwrap();
    let rows: Vec<Vec<u64>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').skip(1).map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), HIST_BINS);
    (0..rows[0].len()).map(|c| rows.iter().map(|r| r[c]).collect()).collect()
}

fn dir_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    v.sort();
    v
}

fn mean_row(csv: &str) -> Vec<f64> {
    let row = csv.lines().find(|l| l.split(',').nth(1) == Some("mean")).unwrap();
    row.split(',').skip(2).map(|v| v.parse().unwrap()).collect()
}

#[test]
fn embed_constant_image_is_flat() {
    let t = TempDir::new().unwrap();
    let img = t.path().join("c.ppm");
    write_ppm(&img, 8, 8, |_, _| [100, 150, 200]);
    let out = t.path().join("o");
    // A single channel is the only one that can be constant under the
    // orthogonality constraint.
    ok(&["embed", s(&img), "--d", "1", "--lambda", "100", "--r2", "0.001", "--out", s(&out)]);
    let h = histograms(&out.join("c.hist.csv"));
    assert!(h.iter().all(|c| c.iter().filter(|&&n| n > 0).count() <= 2));
    let preview = fs::read(out.join("c.ch0.pgm")).unwrap();
    assert!(preview.ends_with(&[128; 64]));
    let y = read_pfeb(out.join("c.y.pfeb")).unwrap().y;
    assert_eq!((y.n_rows(), y.n_cols()), (64, 1));
}

#[test]
fn embed_two_region_histogram_has_two_modes() {
    let t = TempDir::new().unwrap();
    let (img, _) = two_region(t.path(), 8);
    let out = t.path().join("o");
    let line = ok(&["embed", s(&img), "--d", "2", "--out", s(&out)]);
    assert!(line.starts_with("two: energy"));
    // the most converged channel is the informative one
    let eta = pfe::io::read_pfeb(out.join("two.yw.pfeb")).unwrap();
    let y = read_pfeb(out.join("two.y.pfeb")).unwrap();
    let best = (0..2)
        .min_by(|&a, &b| {
            let ratio = |v: usize| y.y.col(v)[0] / eta.y.col(v)[0];
            ratio(a).abs().total_cmp(&ratio(b).abs())
        })
        .unwrap();
    let h = &histograms(&out.join("two.hist.csv"))[best];
    let modes: Vec<u64> = h.iter().copied().filter(|&n| n as f64 >= 0.1 * 256.0).collect();
    assert_eq!(modes.len(), 2);
    assert_eq!(modes.iter().sum::<u64>(), 256);
}

#[test]
fn embed_is_deterministic_across_runs_and_jobs() {
    let t = TempDir::new().unwrap();
    let (img, _) = two_region(t.path(), 6);
    let other = t.path().join("b.ppm");
    write_ppm(&other, 12, 10, |x, y| [(x * 20) as u8, (y * 25) as u8, 90]);
    let (a, b, c) = (t.path().join("a"), t.path().join("b"), t.path().join("c"));
    ok(&["embed", s(&img), s(&other), "--seed", "3", "--out", s(&a)]);
    ok(&["embed", s(&img), s(&other), "--seed", "3", "--out", s(&b)]);
    ok(&["embed", s(&img), s(&other), "--seed", "3", "--jobs", "2", "--out", s(&c)]);
    let files = dir_files(&a);
    assert_eq!(files.len(), 2 * (2 + 4 + 2));
    assert_eq!(files, dir_files(&b));
    assert_eq!(files, dir_files(&c));
}

#[test]
fn segment_with_ground_truth_is_exact() {
    let t = TempDir::new().unwrap();
    let (img, gt) = two_region(t.path(), 8);
    let out = t.path().join("o");
    let line = ok(&["segment", s(&img), "--gt", s(&gt), "--k", "2", "--out", s(&out)]);
    assert_eq!(line.trim(), "two: pri=1 vi=0 covering=1");
    let m = mean_row(&fs::read_to_string(out.join("two.metrics.csv")).unwrap());
    assert_eq!(m, vec![1.0, 0.0, 1.0]);
    let seg = read_label_map(out.join("two.seg.pgm")).unwrap();
    assert_eq!(seg.labels.iter().filter(|&&l| l == seg.labels[0]).count(), 128);
}

#[test]
fn single_segment_covers_largest_region() {
    let t = TempDir::new().unwrap();
    let (img, gt) = two_region(t.path(), 12);
    let out = t.path().join("o");
    let args = ["segment", s(&img), "--gt", s(&gt), "--k", "1", "--out", s(&out)];
    ok(&[&args[..], &["--covering", "gt_covers_seg"]].concat());
    let seg = read_label_map(out.join("two.seg.pgm")).unwrap();
    assert!(seg.labels.iter().all(|&l| l == 0));
    let m = mean_row(&fs::read_to_string(out.join("two.metrics.csv")).unwrap());
    assert_eq!(m[2], 0.75);
    // seg covering gt weighs each region by its own IoU: (12² + 4²) / 16²
    ok(&args);
    let m = mean_row(&fs::read_to_string(out.join("two.metrics.csv")).unwrap());
    assert_eq!(m[2], 0.625);
}

#[test]
fn segment_schemes_and_usage_errors() {
    let t = TempDir::new().unwrap();
    let (img, gt) = two_region(t.path(), 8);
    let out = t.path().join("o");
    let r = pfe(&["segment", s(&img), "--scheme", "fixed", "--out", s(&out)]);
    assert_eq!(r.status.code(), Some(2));
    assert_eq!(pfe(&["embed", s(&img), "--bogus"]).status.code(), Some(2));
    assert_eq!(pfe(&["embed", s(&img), "--p", "2"]).status.code(), Some(2));

    ok(&["segment", s(&img), "--gt", s(&gt), "--gt", s(&gt), "--scheme", "fixed", "--out", s(&out)]);
    assert!(out.join("two.seg.gt0.pgm").exists() && out.join("two.seg.gt1.pgm").exists());
    let line = ok(&["segment", s(&img), "--gt", s(&gt), "--scheme", "dynamic", "--out", s(&out)]);
    assert!(line.contains("best k="));
    let ks = fs::read_dir(&out)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with("two.seg.k"))
        .count();
    assert_eq!(ks, 11);

    let small = t.path().join("small_gt.pgm");
    write_labels(&small, 8, 8, |_, _| 0);
    let r = pfe(&["segment", s(&img), "--gt", s(&small), "--out", s(&out)]);
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stderr).contains("16"));
}

#[test]
fn channel_files_reproduce_the_pipeline() {
    let t = TempDir::new().unwrap();
    let img = t.path().join("a.ppm");
    write_ppm(&img, 14, 12, |x, y| {
        let v = if (x as i64 - 7).pow(2) + (y as i64 - 6).pow(2) < 16 { 200 } else { 40 };
        [v, (x * 10) as u8, 60]
    });
    let out = t.path().join("o");
    ok(&["embed", s(&img), "--out", s(&out)]);
    for weighted in [false, true] {
        let mut direct = vec!["segment", s(&img), "--k", "3", "--out", s(&out)];
        let file = if weighted { "a.yw.pfeb" } else { "a.y.pfeb" };
        let channels = out.join(file);
        let mut from_file = vec!["segment", s(&channels), "--k", "3", "--out", s(&out)];
        if weighted {
            direct.push("--weighted");
            from_file.push("--weighted");
        }
        ok(&direct);
        ok(&from_file);
        let stem = file.trim_end_matches(".pfeb");
        assert_eq!(
            fs::read(out.join("a.seg.pgm")).unwrap(),
            fs::read(out.join(format!("{stem}.seg.pgm"))).unwrap()
        );
    }
}

#[test]
fn config_file_and_flag_precedence() {
    let t = TempDir::new().unwrap();
    let (img, _) = two_region(t.path(), 8);
    let cfg = t.path().join("run.cfg");
    fs::write(&cfg, "# small run\nd = 1\nseed = 5\n").unwrap();
    let (a, b) = (t.path().join("a"), t.path().join("b"));
    ok(&["embed", s(&img), "--config", s(&cfg), "--out", s(&a)]);
    ok(&["embed", s(&img), "--config", s(&cfg), "--d", "3", "--out", s(&b)]);
    assert_eq!(read_pfeb(a.join("two.y.pfeb")).unwrap().y.n_cols(), 1);
    assert_eq!(read_pfeb(b.join("two.y.pfeb")).unwrap().y.n_cols(), 3);

    fs::write(&cfg, "lamda = 3\n").unwrap();
    assert_eq!(pfe(&["embed", s(&img), "--config", s(&cfg)]).status.code(), Some(2));
}

#[test]
fn eval_rows_and_errors() {
    let t = TempDir::new().unwrap();
    let (_, gt) = two_region(t.path(), 8);
    let other = t.path().join("other.pgm");
    write_labels(&other, 16, 16, |_, y| u16::from(y >= 8));
    let csv = ok(&["eval", s(&gt), s(&gt)]);
    assert_eq!(
        csv,
        "segmentation,gt,pri,vi,covering\ntwo_gt,0,1,0,1\ntwo_gt,mean,1,0,1\n"
    );
    let csv = ok(&["eval", s(&gt), s(&gt), s(&other)]);
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.lines().nth(2).unwrap().starts_with("two_gt,1,"));
    // vertical halves cover horizontal halves with IoU 1/3
    let m = mean_row(&csv);
    assert!((m[2] - 2.0 / 3.0).abs() < 1e-15);
    let csv = ok(&["eval", s(&gt), s(&other), "--covering", "gt_covers_seg"]);
    assert!((mean_row(&csv)[2] - 1.0 / 3.0).abs() < 1e-15);
    assert_eq!(pfe(&["eval", s(&gt), s(&gt), "--covering", "both"]).status.code(), Some(2));

    let bad = t.path().join("bad.pgm");
    fs::write(&bad, b"P5\n4 4\n255\n").unwrap();
    assert_eq!(pfe(&["eval", s(&bad), s(&gt)]).status.code(), Some(1));
    assert_eq!(pfe(&["eval", s(&gt), s(&t.path().join("none.pgm"))]).status.code(), Some(1));
    assert_eq!(pfe(&["eval", s(&gt)]).status.code(), Some(2));
}

#[test]
fn stats_lines() {
    let t = TempDir::new().unwrap();
    let uniform = t.path().join("u.pgm");
    write_labels(&uniform, 10, 10, |_, _| 3);
    assert_eq!(ok(&["stats", s(&uniform)]), "0, 0\n");

    let split = t.path().join("split.pgm");
    write_labels(&split, 8, 10, |x, _| u16::from(x >= 4));
    let line = ok(&["stats", s(&split), "--four-connected"]);
    let re: f64 = line.trim().split(", ").nth(1).unwrap().parse().unwrap();
    assert_eq!(re, 10.0 / 142.0);
    let map = LabelMap::new(8, 10, read_label_map(&split).unwrap().labels).unwrap();
    assert_eq!(map.labels.len(), 80);

    // vertical split of an 8-wide, 10-high map
    let tall = t.path().join("tall.pgm");
    write_labels(&tall, 8, 10, |_, y| u16::from(y >= 5));
    let line = ok(&["stats", s(&tall), "--four-connected"]);
    let re: f64 = line.trim().split(", ").nth(1).unwrap().parse().unwrap();
    assert_eq!(re, 8.0 / 142.0);
}

#[test]
fn stats_directory_grows_with_boundary_length() {
    let t = TempDir::new().unwrap();
    let dir = t.path().join("gts");
    fs::create_dir(&dir).unwrap();
    for n in 1..=6usize {
        write_labels(&dir.join(format!("g{n}.pgm")), 48, 48, |x, _| (x * n / 48) as u16);
    }
    let csv = ok(&["stats", s(&dir), "--radius", "3"]);
    let pts: Vec<(f64, f64)> = csv
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[1].parse().unwrap(), f[2].parse().unwrap())
        })
        .collect();
    assert_eq!(pts.len(), 6);
    let mut sorted = pts.clone();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    assert!(sorted.windows(2).all(|w| w[1].1 > w[0].1));
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let cov: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let var: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    assert!(cov / var > 0.0);
    let out = t.path().join("stats.csv");
    ok(&["stats", s(&dir), "--radius", "3", "--out", s(&out)]);
    assert_eq!(fs::read_to_string(out).unwrap(), csv);
}

#[test]
fn init_previews() {
    let t = TempDir::new().unwrap();
    let red = t.path().join("red.ppm");
    write_ppm(&red, 8, 8, |_, _| [255, 0, 0]);
    let out = t.path().join("o");
    ok(&["init-preview", s(&red), "--init", "color_combo", "--d", "2", "--out", s(&out)]);
    for v in 0..2 {
        assert!(fs::read(out.join(format!("red.init{v}.pgm"))).unwrap().ends_with(&[128; 64]));
    }

    let blobs = t.path().join("blobs.ppm");
    let colors = [[230, 30, 30], [30, 230, 30], [30, 30, 230], [230, 230, 30]];
    write_ppm(&blobs, 16, 16, |x, y| colors[usize::from(x >= 8) + 2 * usize::from(y >= 8)]);
    let (a, b) = (t.path().join("a"), t.path().join("b"));
    for dir in [&a, &b] {
        ok(&["init-preview", s(&blobs), "--init", "gmm_density", "--d", "2", "--out", s(dir)]);
    }
    assert_eq!(dir_files(&a), dir_files(&b));
    let px = |v: usize| {
        let bytes = fs::read(a.join(format!("blobs.init{v}.pgm"))).unwrap();
        bytes[bytes.len() - 256..].to_vec()
    };
    let (c0, c1) = (px(0), px(1));
    let patterns: std::collections::BTreeSet<(u8, u8)> = c0.iter().copied().zip(c1).collect();
    assert_eq!(patterns.len(), 4);
    assert!(!a.join("blobs.init2.pgm").exists());
}

#[test]
fn unreadable_image_exits_one() {
    let t = TempDir::new().unwrap();
    let bad = t.path().join("bad.pgm");
    fs::write(&bad, &encode_pgm8(2, 2, &[0, 1])[..12]).unwrap();
    let r = pfe(&["embed", s(&bad), "--out", s(&t.path().join("o"))]);
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stderr).contains("bad.pgm"));
}
