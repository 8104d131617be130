//! Run configuration assembled from a `key = value` file and command-line
//! overrides.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{PfeError, Result};
use crate::eval::CoveringDirection;
use crate::graph::{Connectivity, NeighborhoodSpec};
use crate::init::{InitKind, InitScheme};
use crate::pfe::{PfeConfig, ReweightRule, BOUNDARY_RADIUS, CLUSTERING_RADIUS};
use crate::segment::ClusterScheme;

/// Keys accepted in config files and as overrides.
pub const KEYS: &[&str] = &[
    "profile",
    "d",
    "p",
    "lambda",
    "r1",
    "r2",
    "alpha",
    "eps",
    "outer_s1",
    "inner_s1",
    "stage2_iters",
    "outer_l1p",
    "inner_l1p",
    "inner_tol",
    "reweight",
    "check_residuals",
    "radius",
    "connectivity",
    "affinity",
    "sigma_c",
    "sigma_x",
    "rho",
    "boundary",
    "init",
    "k",
    "scheme",
    "select",
    "covering",
    "weighted",
    "seed",
    "jobs",
    "out",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AffinityKind {
    Color,
    Contour,
}

/// Metric that picks the winner among dynamic-scheme candidates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SelectMetric {
    Covering,
    Pri,
    Vi,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CliConfig {
    pub pfe: PfeConfig,
    pub neighborhood: NeighborhoodSpec,
    pub affinity: AffinityKind,
    pub sigma_c: f64,
    pub sigma_x: f64,
    pub rho: f64,
    pub boundary: Option<PathBuf>,
    pub init: InitScheme,
    pub scheme: ClusterScheme,
    pub select: SelectMetric,
    pub covering: CoveringDirection,
    pub use_weighted: bool,
    pub seed: u64,
    pub jobs: usize,
    pub output_dir: PathBuf,
}

/// Parses `key = value` lines. `#` starts a comment; unknown keys and
/// repeated keys are errors.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| PfeError::Config(format!("line {}: expected `key = value`", no + 1)))?;
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(PfeError::Config(format!("line {}: unknown key {key:?}", no + 1)));
        }
        if out.insert(key.to_string(), value.trim().to_string()).is_some() {
            return Err(PfeError::Config(format!("line {}: {key} given twice", no + 1)));
        }
    }
    Ok(out)
}

pub fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = fs::read_to_string(path)
        .map_err(|e| PfeError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config_text(&text)
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| PfeError::Config(format!("{key}: cannot parse {v:?}")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(PfeError::Config(format!("{key}: expected true or false, got {v:?}"))),
    }
}

pub(crate) fn parse_covering(v: &str) -> Result<CoveringDirection> {
    match v {
        "seg_covers_gt" => Ok(CoveringDirection::SegCoversGt),
        "gt_covers_seg" => Ok(CoveringDirection::GtCoversSeg),
        other => Err(PfeError::Config(format!("unknown covering direction {other:?}"))),
    }
}

impl CliConfig {
    /// Builds a config from merged `key → value` settings. Unset keys take
    /// the defaults of the selected profile.
    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self> {
        if let Some(k) = map.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(PfeError::Config(format!("unknown key {k:?}")));
        }
        let get = |k: &str| map.get(k).map(String::as_str);
        let (mut pfe, default_radius) = match get("profile").unwrap_or("clustering") {
            "clustering" => (PfeConfig::clustering_profile(), CLUSTERING_RADIUS),
            "boundary" => (PfeConfig::boundary_profile(), BOUNDARY_RADIUS),
            other => return Err(PfeError::Config(format!("unknown profile {other:?}"))),
        };

        macro_rules! set {
            ($key:literal, $field:expr) => {
                if let Some(v) = get($key) {
                    $field = parse($key, v)?;
                }
            };
        }
        set!("d", pfe.d);
        set!("p", pfe.p);
        set!("lambda", pfe.lambda);
        set!("r1", pfe.r_stage1);
        set!("r2", pfe.r_stage2);
        set!("alpha", pfe.alpha);
        set!("eps", pfe.epsilon_w);
        set!("outer_s1", pfe.outer_iters_s1);
        set!("inner_s1", pfe.inner_iters_s1);
        set!("stage2_iters", pfe.stage2_iters);
        set!("outer_l1p", pfe.outer_iters_s2_l1p);
        set!("inner_l1p", pfe.inner_iters_s2_l1p);
        set!("inner_tol", pfe.inner_tol);
        set!("seed", pfe.seed);
        if let Some(v) = get("check_residuals") {
            pfe.check_residuals = parse_bool("check_residuals", v)?;
        }
        pfe.reweight = match get("reweight").unwrap_or("residual") {
            "residual" => ReweightRule::ResidualScaled,
            "majorizer" => ReweightRule::Majorizer,
            other => return Err(PfeError::Config(format!("unknown reweight rule {other:?}"))),
        };
        pfe.validate()?;

        let mut radius = default_radius;
        set!("radius", radius);
        if radius == 0 {
            return Err(PfeError::Config("radius must be at least 1".into()));
        }
        let neighborhood = match get("connectivity").unwrap_or("chessboard") {
            "chessboard" => NeighborhoodSpec::chessboard(radius),
            "manhattan" => NeighborhoodSpec {
                radius,
                connectivity: Connectivity::Manhattan,
            },
            other => return Err(PfeError::Config(format!("unknown connectivity {other:?}"))),
        };

        let affinity = match get("affinity").unwrap_or("color") {
            "color" => AffinityKind::Color,
            "contour" => AffinityKind::Contour,
            other => return Err(PfeError::Config(format!("unknown affinity {other:?}"))),
        };
        let mut sigma_c = 0.1;
        let mut sigma_x = 4.0 * radius as f64;
        let mut rho = 0.1;
        set!("sigma_c", sigma_c);
        set!("sigma_x", sigma_x);
        set!("rho", rho);
        for (name, v) in [("sigma_c", sigma_c), ("sigma_x", sigma_x), ("rho", rho)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(PfeError::Config(format!("{name} = {v} must be positive")));
            }
        }
        let boundary = get("boundary").map(PathBuf::from);
        if affinity == AffinityKind::Contour && boundary.is_none() {
            return Err(PfeError::Config("contour affinity needs a boundary map".into()));
        }

        let kind = match get("init") {
            Some(v) => InitKind::from_str(v)?,
            None => InitKind::WscDensity,
        };
        if matches!(kind, InitKind::GmmDensity | InitKind::WscDensity) && pfe.d > 16 {
            return Err(PfeError::Config(format!("density initialization with d = {} needs 2^d clusters", pfe.d)));
        }
        let mut k = 2usize;
        set!("k", k);
        let scheme = match get("scheme").unwrap_or("explicit") {
            "explicit" => ClusterScheme::Explicit(k),
            "fixed" => ClusterScheme::Fixed,
            "dynamic" => ClusterScheme::Dynamic,
            other => return Err(PfeError::Config(format!("unknown scheme {other:?}"))),
        };
        if k == 0 {
            return Err(PfeError::Config("k must be at least 1".into()));
        }
        let select = match get("select").unwrap_or("covering") {
            "covering" => SelectMetric::Covering,
            "pri" => SelectMetric::Pri,
            "vi" => SelectMetric::Vi,
            other => return Err(PfeError::Config(format!("unknown selection metric {other:?}"))),
        };
        let covering = parse_covering(get("covering").unwrap_or("seg_covers_gt"))?;
        let use_weighted = match get("weighted") {
            Some(v) => parse_bool("weighted", v)?,
            None => false,
        };
        let mut jobs = 1usize;
        set!("jobs", jobs);
        if jobs == 0 {
            return Err(PfeError::Config("jobs must be at least 1".into()));
        }
        let output_dir = PathBuf::from(get("out").unwrap_or("."));

        Ok(CliConfig {
            init: InitScheme {
                kind,
                seed: pfe.seed,
            },
            seed: pfe.seed,
            pfe,
            neighborhood,
            affinity,
            sigma_c,
            sigma_x,
            rho,
            boundary,
            scheme,
            select,
            covering,
            use_weighted,
            jobs,
            output_dir,
        })
    }

    /// File settings first, then `overrides` on top.
    pub fn resolve(file: Option<&Path>, overrides: &[(&str, String)]) -> Result<Self> {
        let mut map = match file {
            Some(p) => read_config_file(p)?,
            None => BTreeMap::new(),
        };
        for (k, v) in overrides {
            map.insert((*k).to_string(), v.clone());
        }
        Self::from_map(&map)
    }
}
