//! C interface to the `pfe` library.
//!
//! Handles are opaque and owned by the caller once returned; release them with
//! the matching `*_free` function. Every fallible call returns a
//! [`PfeStatus`]; the message of the last failure on the calling thread is
//! available from [`pfe_last_error_message`].

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use pfe::cli::{embed_image, CliConfig};
use pfe::eval::{evaluate, GroundTruthSet};
use pfe::graph::{Image, LabelMap, NeighborhoodSpec};
use pfe::init::InitKind;
use pfe::pfe::{EmbeddingResult, PfeConfig};
use pfe::segment::{kmeans, DEFAULT_MAX_ITERS};
use pfe::PfeError;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PfeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Shape = 3,
    Numerical = 4,
    Io = 5,
    Format = 6,
    Panic = 7,
}

/// Initialization codes for [`PfeParams::init`].
pub const PFE_INIT_RANDOM: u32 = 0;
pub const PFE_INIT_COLOR_COMBO: u32 = 1;
pub const PFE_INIT_GMM_DENSITY: u32 = 2;
pub const PFE_INIT_WSC_DENSITY: u32 = 3;

/// Solver and graph parameters. Fill with [`pfe_params_default`] or
/// [`pfe_params_boundary`] and adjust.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct PfeParams {
    pub d: u32,
    pub p: f64,
    pub lambda: f64,
    pub r1: f64,
    pub r2: f64,
    pub alpha: f64,
    pub eps: f64,
    pub radius: u32,
    pub sigma_c: f64,
    pub sigma_x: f64,
    /// One of the `PFE_INIT_*` codes.
    pub init: u32,
    pub seed: u64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct PfeMetrics {
    pub pri: f64,
    pub vi: f64,
    pub covering: f64,
}

/// Opaque image.
pub struct PfeImage(Image);

/// Opaque embedding result.
pub struct PfeEmbedding {
    width: usize,
    height: usize,
    result: EmbeddingResult,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &PfeError) -> PfeStatus {
    match e {
        PfeError::Config(_) => PfeStatus::InvalidArgument,
        PfeError::Shape(_) | PfeError::DimensionMismatch(_) | PfeError::IndexOutOfRange { .. } => {
            PfeStatus::Shape
        }
        PfeError::Io { .. } => PfeStatus::Io,
        PfeError::Format { .. } => PfeStatus::Format,
        _ => PfeStatus::Numerical,
    }
}

/// Runs `f`, recording any error or panic.
fn guard(f: impl FnOnce() -> Result<(), (PfeStatus, String)>) -> PfeStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PfeStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            PfeStatus::Panic
        }
    }
}

trait OrStatus<T> {
    fn or_status(self) -> Result<T, (PfeStatus, String)>;
}

impl<T> OrStatus<T> for pfe::Result<T> {
    fn or_status(self) -> Result<T, (PfeStatus, String)> {
        self.map_err(|e| (status_of(&e), e.to_string()))
    }
}

fn null(what: &str) -> (PfeStatus, String) {
    (PfeStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> (PfeStatus, String) {
    (PfeStatus::InvalidArgument, msg.into())
}

fn params_from(pfe: &PfeConfig, radius: usize, sigma_c: f64, sigma_x: f64) -> PfeParams {
    PfeParams {
        d: pfe.d as u32,
        p: pfe.p,
        lambda: pfe.lambda,
        r1: pfe.r_stage1,
        r2: pfe.r_stage2,
        alpha: pfe.alpha,
        eps: pfe.epsilon_w,
        radius: radius as u32,
        sigma_c,
        sigma_x,
        init: PFE_INIT_WSC_DENSITY,
        seed: pfe.seed,
    }
}

fn profile_params(profile: &str) -> PfeParams {
    let map = BTreeMap::from([("profile".to_string(), profile.to_string())]);
    let c = CliConfig::from_map(&map).expect("built-in profile");
    params_from(&c.pfe, c.neighborhood.radius, c.sigma_c, c.sigma_x)
}

fn to_config(p: &PfeParams) -> Result<CliConfig, (PfeStatus, String)> {
    let mut c = CliConfig::from_map(&BTreeMap::new()).or_status()?;
    c.pfe.d = p.d as usize;
    c.pfe.p = p.p;
    c.pfe.lambda = p.lambda;
    c.pfe.r_stage1 = p.r1;
    c.pfe.r_stage2 = p.r2;
    c.pfe.alpha = p.alpha;
    c.pfe.epsilon_w = p.eps;
    c.pfe.seed = p.seed;
    c.pfe.validate().or_status()?;
    if p.radius == 0 {
        return Err(invalid("radius must be at least 1"));
    }
    c.neighborhood = NeighborhoodSpec::chessboard(p.radius as usize);
    if !(p.sigma_c > 0.0 && p.sigma_x > 0.0) {
        return Err(invalid("sigma_c and sigma_x must be positive"));
    }
    c.sigma_c = p.sigma_c;
    c.sigma_x = p.sigma_x;
    c.init.kind = match p.init {
        PFE_INIT_RANDOM => InitKind::Random,
        PFE_INIT_COLOR_COMBO => InitKind::ColorCombo,
        PFE_INIT_GMM_DENSITY => InitKind::GmmDensity,
        PFE_INIT_WSC_DENSITY => InitKind::WscDensity,
        other => return Err(invalid(format!("unknown init code {other}"))),
    };
    if c.init.kind != InitKind::Random && c.pfe.d > 16 {
        return Err(invalid("structured initializations support d <= 16"));
    }
    c.init.seed = p.seed;
    c.seed = p.seed;
    Ok(c)
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn pfe_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `out` must be null or point to writable memory for one `PfeParams`.
#[no_mangle]
pub unsafe extern "C" fn pfe_params_default(out: *mut PfeParams) -> PfeStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = profile_params("clustering");
        Ok(())
    })
}

/// Parameters tuned for boundary detection.
///
/// # Safety
/// `out` must be null or point to writable memory for one `PfeParams`.
#[no_mangle]
pub unsafe extern "C" fn pfe_params_boundary(out: *mut PfeParams) -> PfeStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = profile_params("boundary");
        Ok(())
    })
}

/// Creates an image from interleaved samples in `[0, 1]`, row-major,
/// `width * height * channels` values.
///
/// # Safety
/// `data` must point to that many readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pfe_image_new(
    width: usize,
    height: usize,
    channels: usize,
    data: *const f64,
    out: *mut *mut PfeImage,
) -> PfeStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        if data.is_null() {
            return Err(null("data"));
        }
        let len = width
            .checked_mul(height)
            .and_then(|n| n.checked_mul(channels))
            .ok_or_else(|| invalid("image size overflows"))?;
        let samples = slice::from_raw_parts(data, len).to_vec();
        let img = Image::new(width, height, channels, samples).or_status()?;
        *out = Box::into_raw(Box::new(PfeImage(img)));
        Ok(())
    })
}

/// Reads a binary PGM or PPM file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pfe_image_read(path: *const c_char, out: *mut *mut PfeImage) -> PfeStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        if path.is_null() {
            return Err(null("path"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| invalid("path is not UTF-8"))?;
        let img = pfe::io::read_image(path).or_status()?;
        *out = Box::into_raw(Box::new(PfeImage(img)));
        Ok(())
    })
}

/// # Safety
/// `img` must be null or a handle from `pfe_image_new`/`pfe_image_read` not
/// yet freed.
#[no_mangle]
pub unsafe extern "C" fn pfe_image_free(img: *mut PfeImage) {
    if !img.is_null() {
        drop(Box::from_raw(img));
    }
}

/// Computes the embedding of `img`.
///
/// # Safety
/// `img` must be a live image handle, `params` readable, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pfe_embed(
    img: *const PfeImage,
    params: *const PfeParams,
    out: *mut *mut PfeEmbedding,
) -> PfeStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let img = &img.as_ref().ok_or_else(|| null("img"))?.0;
        let params = params.as_ref().ok_or_else(|| null("params"))?;
        let cfg = to_config(params)?;
        let result = embed_image(img, &cfg).or_status()?;
        *out = Box::into_raw(Box::new(PfeEmbedding {
            width: img.width(),
            height: img.height(),
            result,
        }));
        Ok(())
    })
}

/// # Safety
/// `emb` must be null or a live embedding handle.
#[no_mangle]
pub unsafe extern "C" fn pfe_embedding_free(emb: *mut PfeEmbedding) {
    if !emb.is_null() {
        drop(Box::from_raw(emb));
    }
}

/// Number of pixels, or 0 for a null handle.
///
/// # Safety
/// `emb` must be null or a live embedding handle.
#[no_mangle]
pub unsafe extern "C" fn pfe_embedding_n_pixels(emb: *const PfeEmbedding) -> usize {
    emb.as_ref().map_or(0, |e| e.width * e.height)
}

/// Number of channels, or 0 for a null handle.
///
/// # Safety
/// `emb` must be null or a live embedding handle.
#[no_mangle]
pub unsafe extern "C" fn pfe_embedding_dim(emb: *const PfeEmbedding) -> usize {
    emb.as_ref().map_or(0, |e| e.result.y.n_cols())
}

/// Length of the energy trace, or 0 for a null handle.
///
/// # Safety
/// `emb` must be null or a live embedding handle.
#[no_mangle]
pub unsafe extern "C" fn pfe_embedding_trace_len(emb: *const PfeEmbedding) -> usize {
    emb.as_ref().map_or(0, |e| e.result.energy_trace.len())
}

unsafe fn copy_out(src: &[f64], out: *mut f64, len: usize) -> Result<(), (PfeStatus, String)> {
    if out.is_null() {
        return Err(null("out"));
    }
    if len != src.len() {
        return Err((
            PfeStatus::Shape,
            format!("buffer holds {len} values, {} needed", src.len()),
        ));
    }
    slice::from_raw_parts_mut(out, len).copy_from_slice(src);
    Ok(())
}

/// Copies the channels column-major (`n_pixels * dim` values). With
/// `weighted`, the residual-weighted channels are copied instead.
///
/// # Safety
/// `emb` must be a live embedding handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn pfe_embedding_channels(
    emb: *const PfeEmbedding,
    weighted: bool,
    out: *mut f64,
    len: usize,
) -> PfeStatus {
    guard(|| {
        let e = emb.as_ref().ok_or_else(|| null("emb"))?;
        let y = if weighted { &e.result.y_weighted } else { &e.result.y };
        copy_out(y.as_slice(), out, len)
    })
}

/// Copies the per-channel weights `eta` (`dim` values).
///
/// # Safety
/// `emb` must be a live embedding handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn pfe_embedding_eta(emb: *const PfeEmbedding, out: *mut f64, len: usize) -> PfeStatus {
    guard(|| {
        let e = emb.as_ref().ok_or_else(|| null("emb"))?;
        copy_out(&e.result.eta, out, len)
    })
}

/// Copies the total energy after every inner iteration.
///
/// # Safety
/// `emb` must be a live embedding handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn pfe_embedding_energy_trace(
    emb: *const PfeEmbedding,
    out: *mut f64,
    len: usize,
) -> PfeStatus {
    guard(|| {
        let e = emb.as_ref().ok_or_else(|| null("emb"))?;
        copy_out(&e.result.energy_trace, out, len)
    })
}

/// k-means on the embedding channels; writes one label per pixel.
///
/// # Safety
/// `emb` must be a live embedding handle and `labels` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn pfe_segment(
    emb: *const PfeEmbedding,
    weighted: bool,
    k: usize,
    seed: u64,
    labels: *mut u32,
    len: usize,
) -> PfeStatus {
    guard(|| {
        let e = emb.as_ref().ok_or_else(|| null("emb"))?;
        if labels.is_null() {
            return Err(null("labels"));
        }
        let n = e.width * e.height;
        if len != n {
            return Err((PfeStatus::Shape, format!("buffer holds {len} labels, {n} needed")));
        }
        let y = if weighted { &e.result.y_weighted } else { &e.result.y };
        let r = kmeans(y, k, seed, DEFAULT_MAX_ITERS).or_status()?;
        let out = slice::from_raw_parts_mut(labels, len);
        for (o, &l) in out.iter_mut().zip(&r.labels) {
            *o = l as u32;
        }
        Ok(())
    })
}

/// Mean PRI, VI and covering of a segmentation against `n_gt` ground truths,
/// each `width * height` labels.
///
/// # Safety
/// `seg` and every `gts[i]` must hold `width * height` labels; `gts` must hold
/// `n_gt` pointers; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pfe_evaluate(
    width: usize,
    height: usize,
    seg: *const u32,
    gts: *const *const u32,
    n_gt: usize,
    out: *mut PfeMetrics,
) -> PfeStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        if seg.is_null() {
            return Err(null("seg"));
        }
        if gts.is_null() {
            return Err(null("gts"));
        }
        let n = width.checked_mul(height).ok_or_else(|| invalid("size overflows"))?;
        let map = |p: *const u32| LabelMap::new(width, height, slice::from_raw_parts(p, n).to_vec());
        let seg_map = map(seg).or_status()?;
        let mut maps = Vec::with_capacity(n_gt);
        for &g in slice::from_raw_parts(gts, n_gt) {
            if g.is_null() {
                return Err(null("ground truth"));
            }
            maps.push(map(g).or_status()?);
        }
        let set = GroundTruthSet::new(maps).or_status()?;
        let m = evaluate(&seg_map, &set).or_status()?.mean();
        *out = PfeMetrics {
            pri: m.pri,
            vi: m.vi,
            covering: m.covering,
        };
        Ok(())
    })
}
