//! One PASS/FAIL line per acceptance criterion. Exits non-zero if any fails.

mod common;

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use common::*;
use pfe::eval::{covering, rand_index, variation_of_information};
use pfe::graph::{build_m, grid_edges, AffinityGraph, Image, LabelMap, NeighborhoodSpec};
use pfe::init::{initialize, InitKind, InitScheme};
use pfe::io::{encode_pgm16, encode_ppm8};
use pfe::pfe::*;
use pfe::segment::{kmeans, DEFAULT_MAX_ITERS};
use pfe::sparsela::{cholesky_factor, orthonormal_polar, DenseMatrix, SparseMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SOLVE_TOL: f64 = 1e-8;
const ORTHO_TOL: f64 = 1e-10;
const STAGE1_ORTHO_TOL: f64 = 1e-8;
const METRIC_TOL: f64 = 1e-12;
const ETA_TOL: f64 = 1e-12;
const RI_TARGET: f64 = 0.99;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(limit: Duration, start: Instant) -> (bool, String) {
    let t = start.elapsed();
    (t < limit, format!("{:.2}s of {}s", t.as_secs_f64(), limit.as_secs()))
}

fn wsc_init(img: &Image, g: &AffinityGraph, d: usize) -> DenseMatrix {
    initialize(InitScheme { kind: InitKind::WscDensity, seed: 0 }, img, g, d).unwrap()
}

fn test_images() -> [(&'static str, Image); 3] {
    [("shaded", acceptance_image()), ("quadrants", quadrants(32, 32)), ("disk", disk(32, 32))]
}

fn segment_ri(y: &DenseMatrix, w: usize, h: usize) -> f64 {
    let km = kmeans(y, 2, 0, DEFAULT_MAX_ITERS).unwrap();
    let seg = LabelMap::new(w, h, km.labels.iter().map(|&l| l as u32).collect()).unwrap();
    rand_index(&seg, &half_split_gt(w, h)).unwrap()
}

fn criterion1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_solve = 0.0f64;
    for _ in 0..20 {
        let n = rng.random_range(1..=50);
        let a = random_spd(&mut rng, n);
        let b = random_dense(&mut rng, n, 4);
        let x = cholesky_factor(&a).map_err(|e| e.to_string())?.solve(&b).unwrap();
        let oracle = to_na(&b);
        let dense = sparse_to_na(&a);
        let xo = dense.clone().cholesky().ok_or("oracle factorization failed")?.solve(&oracle);
        let res = (&dense * to_na(&x) - &oracle).amax() / oracle.amax();
        let agree = (to_na(&x) - xo).amax() / to_na(&x).amax().max(1.0);
        worst_solve = worst_solve.max(res).max(agree);
    }
    let mut worst_polar = 0.0f64;
    for _ in 0..20 {
        let d = rng.random_range(1..=8);
        let n = rng.random_range(d.max(8)..=200);
        let p = orthonormal_polar(&random_dense(&mut rng, n, d)).p;
        let ptp = p.transpose_matmul(&p).unwrap();
        worst_polar = worst_polar.max(ptp.max_abs_diff(&DenseMatrix::identity(d)));
    }
    let (fast, t) = within(Duration::from_secs(5), start);
    check(
        worst_solve < SOLVE_TOL && worst_polar < ORTHO_TOL && fast,
        format!("solve residual {worst_solve:.1e}, polar {worst_polar:.1e}, {t}"),
    )
}

fn criterion2() -> Outcome {
    let img = acceptance_image();
    let g = color_graph(&img, 3);
    let cfg = PfeConfig::default();
    let st = run_stage1(&build_m(&g), g.degrees(), &wsc_init(&img, &g, 4), &cfg).unwrap();
    let worst = st.orthogonality_trace.iter().copied().fold(0.0, f64::max);
    check(
        st.orthogonality_trace.len() == cfg.outer_iters_s1 && worst < STAGE1_ORTHO_TOL,
        format!("{} SOC steps, max |PᵀP − I| {worst:.1e}", st.orthogonality_trace.len()),
    )
}

fn criterion3() -> Outcome {
    let start = Instant::now();
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, img) in test_images() {
        let g = color_graph(&img, 3);
        let cfg = PfeConfig { p: 1.0, ..PfeConfig::default() };
        let r = run_pfe(&g, &cfg, &wsc_init(&img, &g, 4)).unwrap();
        let e1 = r.energy_trace[r.stage1_len - 1];
        let e2 = *r.energy_trace.last().unwrap();
        ok &= e2 < e1 && r.energy_trace.iter().all(|e| e.is_finite());
        parts.push(format!("{name} {e1:.4} -> {e2:.4}"));
    }
    let (fast, t) = within(Duration::from_secs(60), start);
    check(ok && fast, format!("{}, {t}", parts.join(", ")))
}

fn criterion4() -> Outcome {
    let img = acceptance_image();
    let g = color_graph(&img, 3);
    let cfg = PfeConfig { p: 1.0, ..PfeConfig::default() };
    let r = run_pfe(&g, &cfg, &wsc_init(&img, &g, 4)).unwrap();
    let (_, le) = laplacian_eigenmap(&g, 4).unwrap();
    let pf = near_zero_fractions(&g, &r.y);
    let lf = near_zero_fractions(&g, &le);
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" ");
    check(
        pf.iter().zip(&lf).all(|(a, b)| a > b),
        format!("near-zero edge fractions PFE [{}] vs LE [{}]", fmt(&pf), fmt(&lf)),
    )
}

fn criterion5() -> Outcome {
    let start = Instant::now();
    let img = acceptance_image();
    let g = color_graph(&img, 3);
    let r = run_pfe(&g, &PfeConfig::default(), &wsc_init(&img, &g, 4)).unwrap();
    let pfe_ri = segment_ri(&r.y_weighted, 32, 32);
    // baseline: LE channels clustered as they are
    let (vals, le) = laplacian_eigenmap(&g, 4).unwrap();
    let le_ri = segment_ri(&le, 32, 32);
    let (fast, t) = within(Duration::from_secs(30), start);

    // reported only: both weightings let the second eigenvector dominate
    let mut wsc = le.clone();
    for (v, l) in vals.iter().enumerate() {
        wsc.col_mut(v).iter_mut().for_each(|x| *x /= l.sqrt());
    }
    let resid = residual_weighting(&le, &build_m(&g), g.degrees()).unwrap().y_weighted;
    check(
        pfe_ri >= RI_TARGET && le_ri < pfe_ri && fast,
        format!(
            "RI PFE {pfe_ri:.4}, LE {le_ri:.4} (1/sqrt(eigenvalue) weighted {:.4}, residual weighted {:.4}), {t}",
            segment_ri(&wsc, 32, 32),
            segment_ri(&resid, 32, 32)
        ),
    )
}

fn criterion6() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, img) in test_images() {
        let g = color_graph(&img, 3);
        let m = build_m(&g);
        let d_sqrt: Vec<f64> = g.degrees().iter().map(|v| v.sqrt()).collect();
        let init = wsc_init(&img, &g, 4);

        let unit = PfeConfig { p: 1.0, ..PfeConfig::default() };
        let s1 = run_stage1(&m, g.degrees(), &init, &unit).unwrap();
        let (mut a, mut b) = (s1.clone(), s1);
        run_stage2_l1p(&mut a, &m, g.degrees(), &unit).unwrap();
        let budget = unit.outer_iters_s2_l1p * unit.inner_iters_s2_l1p;
        run_stage2_l11(&mut b, &m, &d_sqrt, unit.lambda, unit.r_stage2, budget).unwrap();
        let same = a.y.as_slice().iter().zip(b.y.as_slice()).all(|(x, y)| x.to_bits() == y.to_bits())
            && a.energy_trace == b.energy_trace;
        ok &= same;

        for alpha in [0.1, 50.0] {
            let cfg = PfeConfig { p: 0.8, alpha, ..PfeConfig::default() };
            let mut st = run_stage1(&m, g.degrees(), &init, &cfg).unwrap();
            let before = lp_energy(&m, &st.y, 0.8).unwrap();
            run_stage2_l1p(&mut st, &m, g.degrees(), &cfg).unwrap();
            let after = lp_energy(&m, &st.y, 0.8).unwrap();
            ok &= after <= before;
            parts.push(format!("{name} α={alpha} {before:.3}->{after:.3}"));
        }
        if !same {
            parts.push(format!("{name} p=1 differs from L1,1"));
        }
    }
    check(ok, parts.join(", "))
}

fn criterion7() -> Outcome {
    let edges = grid_edges(8, 10, NeighborhoodSpec::four_connected()).len();
    let gamma = 0.37;
    let grid_ok = (0..1000).all(|k| {
        let x = -5.0 + 10.0 * k as f64 / 999.0;
        let closed = x.signum() * (x.abs() - gamma).max(0.0);
        shrink_scalar(x, gamma) == closed
    });
    let c = PfeConfig::default();
    let b = PfeConfig::boundary_profile();
    let defaults = (c.lambda, c.r_stage1, c.r_stage2, c.alpha, c.epsilon_w) == (40000.0, 600.0, 10.0, 0.1, 1e-5)
        && CLUSTERING_RADIUS == 3
        && (b.lambda, b.alpha, b.epsilon_w) == (4000.0, 50.0, 1e-2)
        && BOUNDARY_RADIUS == 5
        && (c.outer_iters_s1, c.inner_iters_s1, c.stage2_iters) == (5, 8, 40)
        && (c.outer_iters_s2_l1p, c.inner_iters_s2_l1p) == (5, 20);
    check(
        edges == 142 && grid_ok && defaults,
        format!("{edges} edges, shrink grid exact: {grid_ok}, defaults: {defaults}"),
    )
}

fn criterion8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    let mut invariant = true;
    for _ in 0..200 {
        let (w, h) = (rng.random_range(1..=8), rng.random_range(1..=8));
        let (ka, kb) = (rng.random_range(1..6), rng.random_range(1..6));
        let a: Vec<u32> = (0..w * h).map(|_| rng.random_range(0..ka)).collect();
        let b: Vec<u32> = (0..w * h).map(|_| rng.random_range(0..kb)).collect();
        let (sa, sb) = (LabelMap::new(w, h, a.clone()).unwrap(), LabelMap::new(w, h, b.clone()).unwrap());
        let got = [
            rand_index(&sa, &sb).unwrap(),
            variation_of_information(&sa, &sb).unwrap(),
            covering(&sa, &sb).unwrap(),
        ];
        let want = [brute_rand(&a, &b), brute_vi(&a, &b), brute_covering(&a, &b)];
        for (g, o) in got.iter().zip(want) {
            worst = worst.max((g - o).abs());
        }
        let pa = LabelMap::new(w, h, a.iter().map(|l| 40 - l).collect()).unwrap();
        invariant &= rand_index(&pa, &sb).unwrap() == got[0]
            && variation_of_information(&pa, &sb).unwrap() == got[1]
            && covering(&pa, &sb).unwrap() == got[2]
            && rand_index(&sa, &sa).unwrap() == 1.0
            && variation_of_information(&sa, &sa).unwrap() == 0.0
            && covering(&sa, &sa).unwrap() == 1.0;
    }
    check(
        worst <= METRIC_TOL && invariant,
        format!("max deviation from brute force {worst:.1e}, invariants exact: {invariant}"),
    )
}

fn criterion9() -> Outcome {
    let m = SparseMatrix::from_triplets(&[(0, 0, 1.0), (0, 1, -1.0)], 1, 2).unwrap();
    let s = 0.5f64.sqrt();
    let y = DenseMatrix::from_rows(&[&[s], &[-s]]);
    let eta = residual_weighting(&y, &m, &[1.0, 1.0]).unwrap().eta[0];
    let eta_err = (eta - 2f64.powf(0.25)).abs();

    let img = disk(12, 12);
    let g = color_graph(&img, 2);
    let mg = build_m(&g);
    let y = pfe::init::init_random(g.n(), 4, 3);
    let order = |eta: &[f64]| {
        let mut idx: Vec<usize> = (0..eta.len()).collect();
        idx.sort_by(|&a, &b| eta[a].total_cmp(&eta[b]));
        idx
    };
    let base = order(&residual_weighting(&y, &mg, g.degrees()).unwrap().eta);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut stable = true;
    for _ in 0..20 {
        let mut scaled = y.clone();
        for v in 0..4 {
            let k = 10f64.powf(rng.random_range(-3.0..3.0));
            scaled.col_mut(v).iter_mut().for_each(|x| *x *= k);
        }
        stable &= order(&residual_weighting(&scaled, &mg, g.degrees()).unwrap().eta) == base;
    }
    check(
        eta_err < ETA_TOL && stable,
        format!("|eta − 2^(1/4)| = {eta_err:.1e}, importance order stable: {stable}"),
    )
}

fn pfe_cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_pfe")).args(args).output().map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(String::from_utf8_lossy(&out.stderr).into_owned())
    }
}

fn write_ppm(path: &Path, img: &Image) {
    let bytes: Vec<u8> = img.data().iter().map(|&v| (v * 255.0).round() as u8).collect();
    fs::write(path, encode_ppm8(img.width(), img.height(), &bytes)).unwrap();
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
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

fn criterion10() -> Outcome {
    let t = tempfile::tempdir().unwrap();
    let img = t.path().join("disk.ppm");
    write_ppm(&img, &disk(24, 20));
    let gt = t.path().join("gt.pgm");
    let labels: Vec<u16> = (0..24 * 20).map(|i| u16::from(i % 24 >= 12)).collect();
    fs::write(&gt, encode_pgm16(24, 20, &labels)).unwrap();
    let (a, b) = (t.path().join("a"), t.path().join("b"));
    for dir in [&a, &b] {
        let (i, d, g) = (img.to_str().unwrap(), dir.to_str().unwrap(), gt.to_str().unwrap());
        pfe_cli(&["embed", i, "--seed", "7", "--out", d])?;
        pfe_cli(&["segment", i, "--gt", g, "--k", "3", "--weighted", "--seed", "7", "--out", d])?;
    }
    let (sa, sb) = (snapshot(&a), snapshot(&b));
    let kinds = ["pfeb", "pgm", "csv"].map(|k| sa.iter().filter(|(n, _)| n.ends_with(k)).count());
    check(
        sa == sb && kinds.iter().all(|&n| n > 0),
        format!("{} files ({} pfeb, {} pgm, {} csv) identical: {}", sa.len(), kinds[0], kinds[1], kinds[2], sa == sb),
    )
}

/// 160×120 scene: shaded background, a disk, a bar and mild texture.
fn desk_image() -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let noise: Vec<f64> = (0..160 * 120).map(|_| rng.random_range(-0.02..0.02)).collect();
    Image::from_fn(160, 120, 3, |x, y, c| {
        let (fx, fy) = (x as f64, y as f64);
        let base = if ((fx - 60.0).powi(2) + (fy - 60.0).powi(2)).sqrt() < 30.0 {
            [0.8, 0.3, 0.2]
        } else if (110..140).contains(&x) && (20..100).contains(&y) {
            [0.2, 0.3, 0.8]
        } else {
            [0.4, 0.6, 0.4]
        };
        (base[c] + 0.1 * fy / 120.0 + noise[y * 160 + x]).clamp(0.0, 1.0)
    })
    .unwrap()
}

fn criterion11() -> Outcome {
    let t = tempfile::tempdir().unwrap();
    let img = t.path().join("desk.ppm");
    write_ppm(&img, &desk_image());
    let out = t.path().join("o");
    let start = Instant::now();
    pfe_cli(&["segment", img.to_str().unwrap(), "--d", "4", "--radius", "3", "--k", "3", "--jobs", "1", "--out", out.to_str().unwrap()])?;
    let (fast, t) = within(Duration::from_secs(60), start);
    check(fast && out.join("desk.seg.pgm").exists(), format!("embed + segment {t}"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("solver oracles", criterion1),
        ("stage I orthogonality", criterion2),
        ("two-stage descent", criterion3),
        ("flatness vs LE", criterion4),
        ("segmentation", criterion5),
        ("L1,p consistency and descent", criterion6),
        ("anchored facts", criterion7),
        ("metric oracles", criterion8),
        ("residual weighting", criterion9),
        ("determinism", criterion10),
        ("desk-scale performance", criterion11),
    ];
    // harness = false: honor a name filter so `cargo test <name>` skips us
    let args: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if args.iter().any(|f| !"acceptance".contains(f.as_str())) {
        return ExitCode::SUCCESS;
    }
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(d) => println!("criterion {}: PASS {name}: {d}", i + 1),
            Err(d) => {
                failed += 1;
                println!("criterion {}: FAIL {name}: {d}", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
