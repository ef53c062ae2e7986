//! C interface to code-od.
//!
//! Every fallible function returns a [`CodeOdStatus`]. On failure a message is
//! available from [`code_od_last_error`] on the same thread. Objects are
//! opaque and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use code_od::estimator::{
    EstimationResult, Estimator, EstimatorError, ReweightEpsilon, VmtUpper, WeightMatrix,
};
use code_od::experiments::fixture;
use code_od::network::io::{parse_network, parse_path_table};
use code_od::network::{build_static_incidence, LinkId, MeasurementSystem, Network, PathTable};

/// Result of a call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CodeOdStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    InvalidUtf8 = 2,
    /// Network, path, or fixture input could not be read.
    Parse = 3,
    /// Inputs were read but are inconsistent (dimensions, negative counts, unknown links).
    Invalid = 4,
    Infeasible = 5,
    Unbounded = 6,
    IterationLimit = 7,
    /// A Rust panic was caught at the boundary.
    Panic = 8,
}

/// Estimation method for [`code_od_estimate`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CodeOdMethod {
    L1 = 0,
    L2 = 1,
    L1Noisy = 2,
    L2Noisy = 3,
    /// Iteratively reweighted l1 with four solves.
    Reweighted = 4,
}

/// A network, its path table, and a static measurement matrix.
pub struct CodeOdSystem {
    network: Network,
    paths: PathTable,
    ms: MeasurementSystem,
}

/// An estimated allocation.
pub struct CodeOdResult {
    inner: EstimationResult,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(CodeOdStatus, String);

type Outcome<T> = Result<T, Failure>;

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

/// Runs `f`, records any failure, and converts panics to [`CodeOdStatus::Panic`].
fn guard(f: impl FnOnce() -> Outcome<()>) -> CodeOdStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CodeOdStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal error: {msg}"));
            CodeOdStatus::Panic
        }
    }
}

fn null(name: &str) -> Failure {
    Failure(CodeOdStatus::NullArgument, format!("{name} is null"))
}

fn estimator_failure(e: EstimatorError) -> Failure {
    let status = match e {
        EstimatorError::Infeasible => CodeOdStatus::Infeasible,
        EstimatorError::Unbounded => CodeOdStatus::Unbounded,
        EstimatorError::IterationLimit(_) => CodeOdStatus::IterationLimit,
        _ => CodeOdStatus::Invalid,
    };
    Failure(status, e.to_string())
}

unsafe fn text<'a>(p: *const c_char, name: &str) -> Outcome<&'a str> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        Failure(
            CodeOdStatus::InvalidUtf8,
            format!("{name} is not valid UTF-8"),
        )
    })
}

unsafe fn doubles<'a>(p: *const f64, len: usize, name: &str) -> Outcome<&'a [f64]> {
    match (p.is_null(), len) {
        (_, 0) => Ok(&[]),
        (true, _) => Err(null(name)),
        (false, _) => Ok(slice::from_raw_parts(p, len)),
    }
}

/// Link ids from a C array; an empty array means every link of the network.
unsafe fn link_ids(
    net: &Network,
    links: *const *const c_char,
    n_links: usize,
) -> Outcome<Vec<LinkId>> {
    if n_links == 0 {
        return Ok(net.link_ids());
    }
    if links.is_null() {
        return Err(null("links"));
    }
    slice::from_raw_parts(links, n_links)
        .iter()
        .map(|&p| text(p, "link id").map(LinkId::new))
        .collect()
}

unsafe fn make_system(
    network: Network,
    paths: PathTable,
    links: *const *const c_char,
    n_links: usize,
    out: *mut *mut CodeOdSystem,
) -> Outcome<()> {
    let measured = link_ids(&network, links, n_links)?;
    let ms = build_static_incidence(&network, &paths, &measured)
        .map_err(|e| Failure(CodeOdStatus::Invalid, e.to_string()))?;
    *out = Box::into_raw(Box::new(CodeOdSystem { network, paths, ms }));
    Ok(())
}

/// Message for the last failed call on this thread, or null. Valid until the
/// next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn code_od_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Builds a system from a named fixture (`fig1`, `fig2`, `nguyen`).
///
/// `links` lists the measured link ids; pass `n_links = 0` to measure every link.
///
/// # Safety
/// `name` must be a nul-terminated string, `links` must point to `n_links`
/// nul-terminated strings, and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn code_od_system_from_fixture(
    name: *const c_char,
    links: *const *const c_char,
    n_links: usize,
    out: *mut *mut CodeOdSystem,
) -> CodeOdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let name = text(name, "name")?;
        let f = fixture(name)
            .ok_or_else(|| Failure(CodeOdStatus::Parse, format!("unknown fixture {name}")))?;
        make_system(f.network, f.paths, links, n_links, out)
    })
}

/// Builds a system from network and path-list JSON documents.
///
/// # Safety
/// As for [`code_od_system_from_fixture`].
#[no_mangle]
pub unsafe extern "C" fn code_od_system_from_json(
    network_json: *const c_char,
    paths_json: *const c_char,
    links: *const *const c_char,
    n_links: usize,
    out: *mut *mut CodeOdSystem,
) -> CodeOdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let parse =
            |e: code_od::network::io::FormatError| Failure(CodeOdStatus::Parse, e.to_string());
        let network = parse_network(text(network_json, "network_json")?).map_err(parse)?;
        let paths = parse_path_table(&network, text(paths_json, "paths_json")?).map_err(parse)?;
        make_system(network, paths, links, n_links, out)
    })
}

/// # Safety
/// `sys` must come from a `code_od_system_*` constructor and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn code_od_system_free(sys: *mut CodeOdSystem) {
    if !sys.is_null() {
        drop(Box::from_raw(sys));
    }
}

/// Number of measured links (rows). Zero for a null system.
///
/// # Safety
/// `sys` must be null or a live system.
#[no_mangle]
pub unsafe extern "C" fn code_od_system_rows(sys: *const CodeOdSystem) -> usize {
    sys.as_ref().map_or(0, |s| s.ms.nrows())
}

/// Number of paths (columns). Zero for a null system.
///
/// # Safety
/// `sys` must be null or a live system.
#[no_mangle]
pub unsafe extern "C" fn code_od_system_cols(sys: *const CodeOdSystem) -> usize {
    sys.as_ref().map_or(0, |s| s.ms.ncols())
}

/// Copies the 0/1 measurement matrix in row-major order into `buf`, which
/// must hold `rows * cols` entries.
///
/// # Safety
/// `sys` must be live and `buf` must be writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn code_od_system_matrix(
    sys: *const CodeOdSystem,
    buf: *mut f64,
    len: usize,
) -> CodeOdStatus {
    guard(|| {
        let s = sys.as_ref().ok_or_else(|| null("sys"))?;
        let (m, n) = (s.ms.nrows(), s.ms.ncols());
        if len != m * n {
            return Err(Failure(
                CodeOdStatus::Invalid,
                format!("buffer holds {len} entries, matrix has {}", m * n),
            ));
        }
        if len == 0 {
            return Ok(());
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        let out = slice::from_raw_parts_mut(buf, len);
        for i in 0..m {
            for j in 0..n {
                out[i * n + j] = s.ms.matrix[(i, j)];
            }
        }
        Ok(())
    })
}

/// Counts `A x` for an allocation `x` of length `cols`, written to `y` of length `rows`.
///
/// # Safety
/// `x` must be readable for `nx` doubles and `y` writable for `ny` doubles.
#[no_mangle]
pub unsafe extern "C" fn code_od_system_apply(
    sys: *const CodeOdSystem,
    x: *const f64,
    nx: usize,
    y: *mut f64,
    ny: usize,
) -> CodeOdStatus {
    guard(|| {
        let s = sys.as_ref().ok_or_else(|| null("sys"))?;
        let x = doubles(x, nx, "x")?;
        if nx != s.ms.ncols() || ny != s.ms.nrows() {
            return Err(Failure(
                CodeOdStatus::Invalid,
                format!("expected x[{}] and y[{}]", s.ms.ncols(), s.ms.nrows()),
            ));
        }
        if ny > 0 && y.is_null() {
            return Err(null("y"));
        }
        let v = s.ms.apply(x);
        if ny > 0 {
            slice::from_raw_parts_mut(y, ny).copy_from_slice(&v);
        }
        Ok(())
    })
}

unsafe fn finish(
    r: Result<EstimationResult, EstimatorError>,
    out: *mut *mut CodeOdResult,
) -> Outcome<()> {
    let inner = r.map_err(estimator_failure)?;
    *out = Box::into_raw(Box::new(CodeOdResult { inner }));
    Ok(())
}

/// Estimates path flows from counts `y` (length `rows`).
///
/// `delta` is the noise radius for the noisy methods and is ignored otherwise.
///
/// # Safety
/// `sys` must be live, `y` readable for `ny` doubles, and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn code_od_estimate(
    sys: *const CodeOdSystem,
    method: CodeOdMethod,
    y: *const f64,
    ny: usize,
    delta: f64,
    out: *mut *mut CodeOdResult,
) -> CodeOdStatus {
    guard(|| {
        let s = sys.as_ref().ok_or_else(|| null("sys"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let y = doubles(y, ny, "y")?;
        let est = Estimator::default();
        let r = match method {
            CodeOdMethod::L1 => est.l1(&s.ms, &s.paths, y),
            CodeOdMethod::L2 => est.l2(&s.ms, &s.paths, y),
            CodeOdMethod::L1Noisy => est.l1_noisy(&s.ms, &s.paths, y, delta),
            CodeOdMethod::L2Noisy => est.l2_noisy(&s.ms, &s.paths, y, delta),
            CodeOdMethod::Reweighted => {
                est.reweighted_l1(&s.ms, &s.paths, y, 4, ReweightEpsilon::default())
            }
        };
        finish(r, out)
    })
}

/// Weighted l1 estimate with one positive weight per path.
///
/// # Safety
/// As for [`code_od_estimate`]; `weights` must be readable for `nw` doubles.
#[no_mangle]
pub unsafe extern "C" fn code_od_estimate_weighted(
    sys: *const CodeOdSystem,
    y: *const f64,
    ny: usize,
    weights: *const f64,
    nw: usize,
    out: *mut *mut CodeOdResult,
) -> CodeOdStatus {
    guard(|| {
        let s = sys.as_ref().ok_or_else(|| null("sys"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let y = doubles(y, ny, "y")?;
        let w = WeightMatrix::new(doubles(weights, nw, "weights")?.to_vec())
            .map_err(estimator_failure)?;
        finish(
            Estimator::default().weighted_l1(&s.ms, &s.paths, y, &w),
            out,
        )
    })
}

/// # Safety
/// `res` must come from an estimate call and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn code_od_result_free(res: *mut CodeOdResult) {
    if !res.is_null() {
        drop(Box::from_raw(res));
    }
}

/// Length of the allocation vector. Zero for a null result.
///
/// # Safety
/// `res` must be null or live.
#[no_mangle]
pub unsafe extern "C" fn code_od_result_len(res: *const CodeOdResult) -> usize {
    res.as_ref().map_or(0, |r| r.inner.x.len())
}

/// Copies the allocation into `buf` of length `len` (must equal the result length).
///
/// # Safety
/// `res` must be live and `buf` writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn code_od_result_x(
    res: *const CodeOdResult,
    buf: *mut f64,
    len: usize,
) -> CodeOdStatus {
    guard(|| {
        let r = res.as_ref().ok_or_else(|| null("res"))?;
        if len != r.inner.x.len() {
            return Err(Failure(
                CodeOdStatus::Invalid,
                format!("buffer holds {len} entries, result has {}", r.inner.x.len()),
            ));
        }
        if len > 0 {
            if buf.is_null() {
                return Err(null("buf"));
            }
            slice::from_raw_parts_mut(buf, len).copy_from_slice(&r.inner.x);
        }
        Ok(())
    })
}

/// Objective value of the final solve. NaN for a null result.
///
/// # Safety
/// `res` must be null or live.
#[no_mangle]
pub unsafe extern "C" fn code_od_result_objective(res: *const CodeOdResult) -> f64 {
    res.as_ref().map_or(f64::NAN, |r| r.inner.objective)
}

/// Number of nonzero path flows.
///
/// # Safety
/// `res` must be null or live.
#[no_mangle]
pub unsafe extern "C" fn code_od_result_sparsity(res: *const CodeOdResult) -> usize {
    res.as_ref().map_or(0, |r| r.inner.sparsity)
}

/// The full result as JSON, including OD flows and splits. Free with
/// [`code_od_string_free`]. Null on failure.
///
/// # Safety
/// `res` must be null or live.
#[no_mangle]
pub unsafe extern "C" fn code_od_result_json(res: *const CodeOdResult) -> *mut c_char {
    let mut s = ptr::null_mut();
    guard(|| {
        let r = res.as_ref().ok_or_else(|| null("res"))?;
        let json = serde_json::to_string(&r.inner)
            .map_err(|e| Failure(CodeOdStatus::Invalid, e.to_string()))?;
        s = CString::new(json).expect("JSON has no nul").into_raw();
        Ok(())
    });
    s
}

/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn code_od_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Bounds on total path length `v^T x` over all allocations consistent with `y`.
///
/// `lengths` has one entry per path; pass `nl = 0` for unit lengths (vehicle
/// counts). When the maximum is unbounded, `*upper` is set to infinity and
/// [`CodeOdStatus::Unbounded`] is returned; `*lower` is still valid.
///
/// # Safety
/// `sys` must be live, `y` and `lengths` readable, `lower` and `upper` writable.
#[no_mangle]
pub unsafe extern "C" fn code_od_vmt_bounds(
    sys: *const CodeOdSystem,
    y: *const f64,
    ny: usize,
    lengths: *const f64,
    nl: usize,
    lower: *mut f64,
    upper: *mut f64,
) -> CodeOdStatus {
    guard(|| {
        let s = sys.as_ref().ok_or_else(|| null("sys"))?;
        if lower.is_null() || upper.is_null() {
            return Err(null("lower/upper"));
        }
        let y = doubles(y, ny, "y")?;
        let v = match nl {
            0 => vec![1.0; s.ms.ncols()],
            _ => doubles(lengths, nl, "lengths")?.to_vec(),
        };
        let b = Estimator::default()
            .vmt_bounds(&s.ms, &s.paths, y, &v)
            .map_err(estimator_failure)?;
        *lower = b.lower;
        match b.upper {
            VmtUpper::Bounded { value, .. } => {
                *upper = value;
                Ok(())
            }
            VmtUpper::Unbounded { paths } => {
                *upper = f64::INFINITY;
                let labels: Vec<String> = paths
                    .iter()
                    .map(|&n| s.paths.paths()[n].to_string())
                    .collect();
                Err(Failure(
                    CodeOdStatus::Unbounded,
                    format!("unbounded through paths {}", labels.join(", ")),
                ))
            }
        }
    })
}

/// Number of links in the network behind `sys`.
///
/// # Safety
/// `sys` must be null or live.
#[no_mangle]
pub unsafe extern "C" fn code_od_system_links(sys: *const CodeOdSystem) -> usize {
    sys.as_ref().map_or(0, |s| s.network.links().len())
}
