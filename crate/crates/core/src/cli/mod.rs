//! The `pfe` command-line front end.

mod config;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

pub use config::{parse_config_text, AffinityKind, CliConfig, SelectMetric, KEYS};

use crate::error::{PfeError, Result};
use crate::eval::{evaluate_candidates_with, evaluate_with, CoveringDirection, GroundTruthSet};
use crate::graph::{
    affinity_color, affinity_intervening_contour, boundary_edge_stats, grid_edges, AffinityGraph,
    Image, NeighborhoodSpec,
};
use crate::init::{initialize, InitKind};
use crate::io;
use crate::pfe::{run_pfe, EmbeddingResult};
use crate::segment::{segment_features, ClusterScheme, Segmentation};
use crate::sparsela::DenseMatrix;

#[derive(Parser, Debug)]
#[command(name = "pfe", version, about = "Piecewise flat embeddings, segmentation and metrics")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute embedding channels for one or more images.
    Embed {
        #[arg(required = true)]
        images: Vec<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Cluster an image (or a PFEB channel file) into segments.
    Segment {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Ground-truth label maps (16-bit PGM).
        #[arg(long)]
        gt: Vec<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Score a label map against ground truths.
    Eval {
        seg: PathBuf,
        #[arg(required = true)]
        gts: Vec<PathBuf>,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// seg_covers_gt or gt_covers_seg.
        #[arg(long, default_value = "seg_covers_gt")]
        covering: String,
    },
    /// Boundary sparsity statistics of a label map or a directory of them.
    Stats {
        path: PathBuf,
        #[arg(long, default_value_t = 5)]
        radius: usize,
        /// Use 4-connectivity instead of a square window.
        #[arg(long)]
        four_connected: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the initial channels as grayscale previews.
    InitPreview {
        #[arg(required = true)]
        images: Vec<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Args, Debug, Default)]
struct RunArgs {
    /// `key = value` config file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Parameter profile: clustering or boundary.
    #[arg(long)]
    profile: Option<String>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    r1: Option<f64>,
    #[arg(long)]
    r2: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    /// Reweighting rule for p < 1: residual or majorizer.
    #[arg(long)]
    reweight: Option<String>,
    #[arg(long)]
    radius: Option<usize>,
    /// chessboard or manhattan.
    #[arg(long)]
    connectivity: Option<String>,
    /// color or contour.
    #[arg(long)]
    affinity: Option<String>,
    /// Boundary probability map for the contour affinity.
    #[arg(long)]
    boundary: Option<PathBuf>,
    #[arg(long)]
    sigma_c: Option<f64>,
    #[arg(long)]
    sigma_x: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    /// random, color_combo, gmm_density or wsc_density.
    #[arg(long)]
    init: Option<String>,
    #[arg(long)]
    k: Option<usize>,
    /// explicit, fixed or dynamic.
    #[arg(long)]
    scheme: Option<String>,
    /// Metric choosing among dynamic candidates: covering, pri or vi.
    #[arg(long)]
    select: Option<String>,
    /// Covering direction: seg_covers_gt or gt_covers_seg.
    #[arg(long)]
    covering: Option<String>,
    /// Cluster the residual-weighted channels.
    #[arg(long)]
    weighted: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn resolve(&self) -> Result<CliConfig> {
        let mut o: Vec<(&str, String)> = Vec::new();
        macro_rules! push {
            ($($field:ident => $key:literal),*) => {
                $(if let Some(v) = &self.$field {
                    o.push(($key, v.to_string()));
                })*
            };
        }
        push!(profile => "profile", d => "d", p => "p", lambda => "lambda", r1 => "r1",
              r2 => "r2", alpha => "alpha", eps => "eps", reweight => "reweight",
              radius => "radius", connectivity => "connectivity", affinity => "affinity",
              sigma_c => "sigma_c", sigma_x => "sigma_x", rho => "rho", init => "init",
              k => "k", scheme => "scheme", select => "select", covering => "covering", seed => "seed", jobs => "jobs");
        if let Some(b) = &self.boundary {
            o.push(("boundary", b.display().to_string()));
        }
        if let Some(out) = &self.out {
            o.push(("out", out.display().to_string()));
        }
        if self.weighted {
            o.push(("weighted", "true".into()));
        }
        CliConfig::resolve(self.config.as_deref(), &o)
    }
}

/// Parses the process arguments, runs the command and maps errors to exit
/// codes: 1 for I/O and numerical failures, 2 for usage errors.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pfe: {e}");
            ExitCode::from(if e.is_usage() { 2 } else { 1 })
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Embed { images, run } => {
            let cfg = run.resolve()?;
            for_each_input(&images, &cfg, |path| cmd_embed(path, &cfg))
        }
        Command::Segment { inputs, gt, run } => {
            let cfg = run.resolve()?;
            if !gt.is_empty() && inputs.len() > 1 {
                return Err(PfeError::Config("--gt needs a single input".into()));
            }
            for_each_input(&inputs, &cfg, |path| cmd_segment(path, &cfg, &gt))
        }
        Command::Eval {
            seg,
            gts,
            out,
            covering,
        } => cmd_eval(&seg, &gts, out.as_deref(), config::parse_covering(&covering)?),
        Command::Stats {
            path,
            radius,
            four_connected,
            out,
        } => {
            let spec = if four_connected {
                NeighborhoodSpec::four_connected()
            } else {
                NeighborhoodSpec::chessboard(radius)
            };
            if radius == 0 {
                return Err(PfeError::Config("radius must be at least 1".into()));
            }
            cmd_stats(&path, spec, out.as_deref())
        }
        Command::InitPreview { images, run } => {
            let cfg = run.resolve()?;
            for_each_input(&images, &cfg, |path| cmd_init_preview(path, &cfg))
        }
    }
}

/// Runs `f` per input on a pool of `cfg.jobs` threads.
fn for_each_input(
    inputs: &[PathBuf],
    cfg: &CliConfig,
    f: impl Fn(&Path) -> Result<()> + Sync,
) -> Result<()> {
    fs::create_dir_all(&cfg.output_dir).map_err(|e| PfeError::io(&cfg.output_dir, e))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| PfeError::Config(format!("cannot start {} worker threads: {e}", cfg.jobs)))?;
    pool.install(|| inputs.par_iter().map(|p| f(p)).collect::<Result<Vec<_>>>())?;
    Ok(())
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| "out".to_string(), |s| s.to_string_lossy().into_owned())
}

/// Affinity graph described by `cfg`.
pub fn build_graph(img: &Image, cfg: &CliConfig) -> Result<AffinityGraph> {
    let edges = grid_edges(img.width(), img.height(), cfg.neighborhood);
    match cfg.affinity {
        AffinityKind::Color => affinity_color(img, &edges, cfg.sigma_c, cfg.sigma_x),
        AffinityKind::Contour => {
            let path = cfg.boundary.as_ref().expect("validated in config");
            let boundary = io::read_image(path)?;
            if boundary.width() != img.width() || boundary.height() != img.height() {
                return Err(PfeError::DimensionMismatch(format!(
                    "boundary map {} does not match the image size",
                    path.display()
                )));
            }
            affinity_intervening_contour(&boundary, &edges, cfg.rho)
        }
    }
}

/// Initial channels. The spectral initialization always uses the color
/// affinity.
pub fn initial_channels(img: &Image, graph: &AffinityGraph, cfg: &CliConfig) -> Result<DenseMatrix> {
    if cfg.init.kind == InitKind::WscDensity && cfg.affinity != AffinityKind::Color {
        let edges = grid_edges(img.width(), img.height(), cfg.neighborhood);
        let color = affinity_color(img, &edges, cfg.sigma_c, cfg.sigma_x)?;
        return initialize(cfg.init, img, &color, cfg.pfe.d);
    }
    initialize(cfg.init, img, graph, cfg.pfe.d)
}

/// Graph, initialization and solver for one image.
pub fn embed_image(img: &Image, cfg: &CliConfig) -> Result<EmbeddingResult> {
    let graph = build_graph(img, cfg)?;
    let init = initial_channels(img, &graph, cfg)?;
    run_pfe(&graph, &cfg.pfe, &init)
}

fn write_previews(dir: &Path, name: &str, tag: &str, w: usize, h: usize, y: &DenseMatrix) -> Result<()> {
    for (v, col) in y.columns().enumerate() {
        io::write_pgm8(dir.join(format!("{name}.{tag}{v}.pgm")), w, h, &io::normalize_to_u8(col))?;
    }
    Ok(())
}

fn cmd_embed(path: &Path, cfg: &CliConfig) -> Result<()> {
    let img = io::read_image(path)?;
    let r = embed_image(&img, cfg)?;
    let (w, h) = (img.width(), img.height());
    let dir = &cfg.output_dir;
    let name = stem(path);
    io::write_pfeb(dir.join(format!("{name}.y.pfeb")), w, h, &r.y)?;
    io::write_pfeb(dir.join(format!("{name}.yw.pfeb")), w, h, &r.y_weighted)?;
    write_previews(dir, &name, "ch", w, h, &r.y)?;
    io::write_trace_csv(dir.join(format!("{name}.trace.csv")), &r.energy_trace, &r.channel_energy_trace)?;
    io::write_histogram_csv(dir.join(format!("{name}.hist.csv")), &r.y)?;
    let mut line = format!("{name}: energy {}", r.energy_trace.last().copied().unwrap_or(0.0));
    for (v, e) in r.eta.iter().enumerate() {
        write!(line, " eta{v}={e}").unwrap();
    }
    if !r.flat_channels.is_empty() {
        write!(line, " flat={:?}", r.flat_channels).unwrap();
    }
    println!("{line}");
    Ok(())
}

fn load_gts(paths: &[PathBuf]) -> Result<Option<GroundTruthSet>> {
    if paths.is_empty() {
        return Ok(None);
    }
    let maps = paths.iter().map(io::read_label_map).collect::<Result<Vec<_>>>()?;
    GroundTruthSet::new(maps).map(Some)
}

fn cmd_segment(path: &Path, cfg: &CliConfig, gt_paths: &[PathBuf]) -> Result<()> {
    let gts = load_gts(gt_paths)?;
    if matches!(cfg.scheme, ClusterScheme::Fixed | ClusterScheme::Dynamic) && gts.is_none() {
        return Err(PfeError::Config("the fixed and dynamic schemes need --gt".into()));
    }
    let is_channels = path.extension().is_some_and(|e| e == "pfeb");
    let (w, h, features) = if is_channels {
        let c = io::read_pfeb(path)?;
        (c.width, c.height, c.y)
    } else {
        let img = io::read_image(path)?;
        let r = embed_image(&img, cfg)?;
        let y = if cfg.use_weighted { r.y_weighted } else { r.y };
        (img.width(), img.height(), y)
    };
    let segs = segment_features(&features, w, h, cfg.scheme, gts.as_ref(), cfg.seed)?;
    let name = stem(path);
    let dir = &cfg.output_dir;
    let tags: Vec<String> = match cfg.scheme {
        ClusterScheme::Explicit(_) => vec![String::new()],
        ClusterScheme::Fixed => (0..segs.len()).map(|i| format!(".gt{i}")).collect(),
        ClusterScheme::Dynamic => segs.iter().map(|s| format!(".k{}", s.k)).collect(),
    };
    for (s, tag) in segs.iter().zip(&tags) {
        io::write_label_map(dir.join(format!("{name}.seg{tag}.pgm")), &s.to_label_map())?;
    }
    let Some(gts) = gts else {
        println!("{name}: {} segments", segs[0].k);
        return Ok(());
    };
    let maps: Vec<_> = segs.iter().map(Segmentation::to_label_map).collect();
    let cand = evaluate_candidates_with(&maps, &gts, cfg.covering)?;
    let rows: Vec<(String, _)> = tags
        .iter()
        .zip(&cand.reports)
        .map(|(t, r)| (format!("{name}.seg{t}"), r.clone()))
        .collect();
    io::write_metrics_csv(dir.join(format!("{name}.metrics.csv")), &rows)?;
    match cfg.scheme {
        ClusterScheme::Dynamic => {
            let best = match cfg.select {
                SelectMetric::Covering => cand.best_covering,
                SelectMetric::Pri => cand.best_pri,
                SelectMetric::Vi => cand.best_vi,
            };
            io::write_label_map(dir.join(format!("{name}.seg.pgm")), &maps[best])?;
            let r = &cand.reports[best];
            println!(
                "{name}: best k={} pri={} vi={} covering={}",
                segs[best].k, r.pri, r.vi, r.covering
            );
        }
        _ => {
            let m = cand.average();
            println!("{name}: pri={} vi={} covering={}", m.pri, m.vi, m.covering);
        }
    }
    Ok(())
}

fn cmd_eval(
    seg: &Path,
    gt_paths: &[PathBuf],
    out: Option<&Path>,
    direction: CoveringDirection,
) -> Result<()> {
    let seg_map = io::read_label_map(seg)?;
    let gts = load_gts(gt_paths)?.expect("clap requires a ground truth");
    let report = evaluate_with(&seg_map, &gts, direction)?;
    let rows = [(stem(seg), report)];
    match out {
        Some(p) => io::write_metrics_csv(p, &rows),
        None => {
            print!("{}", io::metrics_csv(&rows));
            Ok(())
        }
    }
}

fn cmd_stats(path: &Path, spec: NeighborhoodSpec, out: Option<&Path>) -> Result<()> {
    let text = if path.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(path)
            .map_err(|e| PfeError::io(path, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "pgm"))
            .collect();
        files.sort();
        let mut s = String::from("name,r_b,r_e\n");
        for f in &files {
            let st = boundary_edge_stats(&io::read_label_map(f)?, spec);
            writeln!(s, "{},{},{}", stem(f), st.r_b, st.r_e).unwrap();
        }
        s
    } else {
        let st = boundary_edge_stats(&io::read_label_map(path)?, spec);
        format!("{}, {}\n", st.r_b, st.r_e)
    };
    match out {
        Some(p) => fs::write(p, text).map_err(|e| PfeError::io(p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_init_preview(path: &Path, cfg: &CliConfig) -> Result<()> {
    let img = io::read_image(path)?;
    let graph = build_graph(&img, cfg)?;
    let init = initial_channels(&img, &graph, cfg)?;
    write_previews(&cfg.output_dir, &stem(path), "init", img.width(), img.height(), &init)
}
