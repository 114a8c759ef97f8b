//! C ABI for `xmo-core`.
//!
//! Every fallible call returns an [`XmoStatus`]; on failure the message is
//! available from [`xmo_last_error_message`] on the same thread. Objects are
//! exposed as opaque handles that must be released with their `_free`
//! function.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use xmo_core::approximation::{run_pipeline, DyadicApproximation, PipelineConfig, PipelineReport};
use xmo_core::funcspace::{catalog, cube_average, Cube, FunctionSpec, RealFn};
use xmo_core::kernels::BilinearKernel;
use xmo_core::operators::{commutator, Slot, Supported};
use xmo_core::oscillation::mean_oscillation;
use xmo_core::weights::{default_ap_cubes, vector_ap_constant, VectorWeight};
use xmo_core::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XmoStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Malformed expression or unknown identifier.
    Parse = 3,
    /// A documented precondition was violated.
    Precondition = 4,
    /// A function was evaluated outside its domain.
    Domain = 5,
    /// A scanned condition was not met (threshold selection).
    ConditionNotMet = 6,
    Io = 7,
    /// A Rust panic was caught at the boundary.
    Panic = 8,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs were replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> XmoStatus {
    match e {
        Error::Syntax { .. } | Error::UnknownIdentifier { .. } | Error::Arity { .. } => {
            XmoStatus::Parse
        }
        Error::Domain(_) => XmoStatus::Domain,
        Error::Precondition(_) => XmoStatus::Precondition,
        Error::ConditionNotMet { .. } => XmoStatus::ConditionNotMet,
        Error::Io(_) | Error::Json(_) => XmoStatus::Io,
    }
}

/// Failure inside the boundary layer itself.
struct Fail(XmoStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(body: impl FnOnce() -> Result<(), Fail>) -> XmoStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => XmoStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            XmoStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(XmoStatus::NullPointer, format!("`{what}` is null"))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(XmoStatus::InvalidUtf8, format!("`{what}` is not valid UTF-8")))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn cube(center: *const f64, dim: usize, half_side: f64, what: &str) -> Result<Cube, Fail> {
    Ok(Cube::new(slice(center, dim, what)?.to_vec(), half_side)?)
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn xmo_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn xmo_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must be NULL or a pointer returned by a `*_json` function that has
/// not been freed.
#[no_mangle]
pub unsafe extern "C" fn xmo_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// A real function of `x1..xn`.
pub struct XmoFunction {
    spec: FunctionSpec,
}

/// Parses a catalog name (`smoothed_log`, `log_abs`, `sin_product`, `bump`)
/// or an expression in `x1..xn`.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn xmo_function_parse(
    text: *const c_char,
    dim: usize,
    out: *mut *mut XmoFunction,
) -> XmoStatus {
    guard(|| {
        let spec = catalog::resolve(self::text(text, "text")?, dim)?;
        let h = Box::into_raw(Box::new(XmoFunction { spec }));
        write(out, h, "out")
    })
}

/// # Safety
/// `f` must be NULL or a handle from [`xmo_function_parse`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn xmo_function_free(f: *mut XmoFunction) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// Number of coordinates the function reads.
///
/// # Safety
/// `f` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn xmo_function_dim(f: *const XmoFunction) -> usize {
    f.as_ref().map_or(0, |f| f.spec.dim())
}

/// # Safety
/// `f` must be a live handle, `x` must hold `len` doubles and `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn xmo_function_eval(
    f: *const XmoFunction,
    x: *const f64,
    len: usize,
    out: *mut f64,
) -> XmoStatus {
    guard(|| {
        let f = handle(f, "f")?;
        let v = f.spec.eval(slice(x, len, "x")?).map_err(Error::from)?;
        write(out, v, "out")
    })
}

/// Average of `f` over the cube of the given centre and half-side.
///
/// # Safety
/// `f` must be a live handle, `center` must hold `dim` doubles and `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn xmo_cube_average(
    f: *const XmoFunction,
    center: *const f64,
    dim: usize,
    half_side: f64,
    resolution: usize,
    out: *mut f64,
) -> XmoStatus {
    guard(|| {
        let f = handle(f, "f")?;
        let q = cube(center, dim, half_side, "center")?;
        write(out, cube_average(&f.spec, &q, resolution)?, "out")
    })
}

/// Mean oscillation of `f` over the cube of the given centre and half-side.
///
/// # Safety
/// As for [`xmo_cube_average`].
#[no_mangle]
pub unsafe extern "C" fn xmo_mean_oscillation(
    f: *const XmoFunction,
    center: *const f64,
    dim: usize,
    half_side: f64,
    resolution: usize,
    out: *mut f64,
) -> XmoStatus {
    guard(|| {
        let f = handle(f, "f")?;
        let q = cube(center, dim, half_side, "center")?;
        write(out, mean_oscillation(&f.spec, &q, resolution)?, "out")
    })
}

/// A bilinear kernel, possibly truncated.
pub struct XmoKernel {
    kernel: BilinearKernel,
}

fn new_kernel(k: BilinearKernel) -> *mut XmoKernel {
    Box::into_raw(Box::new(XmoKernel { kernel: k }))
}

/// The smooth reference kernel in dimension `dim` (1 to 3).
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn xmo_kernel_reference(dim: usize, out: *mut *mut XmoKernel) -> XmoStatus {
    guard(|| write(out, new_kernel(BilinearKernel::reference(dim)?), "out"))
}

/// The singular odd kernel in dimension `dim` (1 to 3).
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn xmo_kernel_riesz(dim: usize, out: *mut *mut XmoKernel) -> XmoStatus {
    guard(|| write(out, new_kernel(BilinearKernel::riesz(dim)?), "out"))
}

/// A new handle for the truncation of `k` at `eta`; `k` is left unchanged.
///
/// # Safety
/// `k` must be a live handle and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn xmo_kernel_truncate(
    k: *const XmoKernel,
    eta: f64,
    out: *mut *mut XmoKernel,
) -> XmoStatus {
    guard(|| {
        let k = handle(k, "k")?;
        write(out, new_kernel(k.kernel.truncate(eta)?), "out")
    })
}

/// `K(x, y, z)`; each point holds `dim` doubles.
///
/// # Safety
/// `k` must be a live handle, `x`, `y`, `z` must each hold `dim` doubles
/// and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn xmo_kernel_eval(
    k: *const XmoKernel,
    x: *const f64,
    y: *const f64,
    z: *const f64,
    dim: usize,
    out: *mut f64,
) -> XmoStatus {
    guard(|| {
        let k = handle(k, "k")?;
        if dim != k.kernel.dim {
            return Err(Fail(
                XmoStatus::Precondition,
                format!("points have {dim} coordinates, kernel has {}", k.kernel.dim),
            ));
        }
        let v = k.kernel.eval(slice(x, dim, "x")?, slice(y, dim, "y")?, slice(z, dim, "z")?);
        write(out, v, "out")
    })
}

/// # Safety
/// `k` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn xmo_kernel_free(k: *mut XmoKernel) {
    if !k.is_null() {
        drop(Box::from_raw(k));
    }
}

/// Evaluates `[b, T]_slot(f, g)` at `npoints` points stored row-major in
/// `xs` (`npoints * dim` doubles) and writes `npoints` values to `out`.
/// Supports are cubes given by centre and half-side.
///
/// # Safety
/// All handles must be live; `f_center` and `g_center` must hold `dim`
/// doubles; `xs` must hold `npoints * dim` doubles; `out` must hold
/// `npoints` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn xmo_commutator(
    slot: c_int,
    b: *const XmoFunction,
    k: *const XmoKernel,
    f: *const XmoFunction,
    f_center: *const f64,
    f_half_side: f64,
    g: *const XmoFunction,
    g_center: *const f64,
    g_half_side: f64,
    xs: *const f64,
    npoints: usize,
    dim: usize,
    resolution: usize,
    out: *mut f64,
) -> XmoStatus {
    guard(|| {
        let slot = Slot::from_index(usize::try_from(slot).unwrap_or(0))?;
        let (b, k) = (handle(b, "b")?, handle(k, "k")?);
        let (f, g) = (handle(f, "f")?, handle(g, "g")?);
        let fs = cube(f_center, dim, f_half_side, "f_center")?;
        let gs = cube(g_center, dim, g_half_side, "g_center")?;
        let flat = slice(xs, npoints * dim, "xs")?;
        let points: Vec<Vec<f64>> = flat.chunks(dim.max(1)).map(<[f64]>::to_vec).collect();
        if npoints > 0 && out.is_null() {
            return Err(null("out"));
        }
        let r = commutator(
            slot,
            &b.spec as &dyn RealFn,
            &b.spec.to_string(),
            &k.kernel,
            Supported::new(&f.spec, &fs, &f.spec.to_string()),
            Supported::new(&g.spec, &gs, &g.spec.to_string()),
            &points,
            resolution,
        )?;
        for (i, v) in r.integrand.values.iter().enumerate() {
            out.add(i).write(*v);
        }
        Ok(())
    })
}

/// Vector `A_p` constant of `(w1, w2)` with exponents `p1, p2`, scanned
/// over cubes inside `[-extent, extent]^n`.
///
/// # Safety
/// `w1` and `w2` must be live handles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn xmo_vector_ap_constant(
    w1: *const XmoFunction,
    w2: *const XmoFunction,
    p1: f64,
    p2: f64,
    extent: f64,
    resolution: usize,
    out: *mut f64,
) -> XmoStatus {
    guard(|| {
        let (w1, w2) = (handle(w1, "w1")?, handle(w2, "w2")?);
        let vw = VectorWeight::new(w1.spec.clone(), w2.spec.clone(), p1, p2)?;
        let cubes = default_ap_cubes(vw.dim(), extent)?;
        write(out, vector_ap_constant(&vw, &cubes, resolution)?.constant, "out")
    })
}

/// Result of the end-to-end dyadic approximation pipeline.
pub struct XmoApproximation {
    approx: DyadicApproximation,
    report: PipelineReport,
}

/// Runs the approximation pipeline for `f` with default settings.
///
/// # Safety
/// `f` must be a live handle and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn xmo_approx_run(
    f: *const XmoFunction,
    epsilon: f64,
    k_max: usize,
    out: *mut *mut XmoApproximation,
) -> XmoStatus {
    guard(|| {
        let f = handle(f, "f")?;
        let cfg = PipelineConfig::default_for(f.spec.dim().max(1), epsilon, k_max);
        let (approx, report) = run_pipeline(&f.spec, &cfg)?;
        write(out, Box::into_raw(Box::new(XmoApproximation { approx, report })), "out")
    })
}

/// Measured BMO distance between `f` and its piecewise-constant approximant.
///
/// # Safety
/// `a` must be a live handle and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn xmo_approx_error(a: *const XmoApproximation, out: *mut f64) -> XmoStatus {
    guard(|| write(out, handle(a, "a")?.report.approximation_error.value, "out"))
}

/// Value of the piecewise-constant approximant at `x`.
///
/// # Safety
/// `a` must be a live handle, `x` must hold `dim` doubles and `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn xmo_approx_eval(
    a: *const XmoApproximation,
    x: *const f64,
    dim: usize,
    out: *mut f64,
) -> XmoStatus {
    guard(|| {
        let a = handle(a, "a")?;
        let v = a.approx.g(slice(x, dim, "x")?).map_err(Error::from)?;
        write(out, v, "out")
    })
}

/// Full pipeline report as JSON; free with [`xmo_string_free`].
///
/// # Safety
/// `a` must be a live handle and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn xmo_approx_report_json(
    a: *const XmoApproximation,
    out: *mut *mut c_char,
) -> XmoStatus {
    guard(|| {
        let a = handle(a, "a")?;
        let s = serde_json::to_string(&a.report).map_err(Error::from)?;
        let c = CString::new(s).map_err(|e| Fail(XmoStatus::Io, e.to_string()))?;
        write(out, c.into_raw(), "out")
    })
}

/// # Safety
/// `a` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn xmo_approx_free(a: *mut XmoApproximation) {
    if !a.is_null() {
        drop(Box::from_raw(a));
    }
}

/// Runs the `xmo` command line in-process and returns its exit status.
///
/// # Safety
/// `argv` must hold `argc` NUL-terminated strings, the first being the
/// program name.
#[no_mangle]
pub unsafe extern "C" fn xmo_cli_run(argc: c_int, argv: *const *const c_char) -> c_int {
    let n = usize::try_from(argc).unwrap_or(0);
    if n > 0 && argv.is_null() {
        set_last_error("`argv` is null");
        return xmo_core::cli::EXIT_USAGE;
    }
    let mut args = Vec::with_capacity(n);
    for i in 0..n {
        match text(*argv.add(i), "argv") {
            Ok(s) => args.push(s.to_string()),
            Err(Fail(_, msg)) => {
                set_last_error(&msg);
                return xmo_core::cli::EXIT_USAGE;
            }
        }
    }
    catch_unwind(|| xmo_core::cli::run(args)).unwrap_or_else(|_| {
        set_last_error("internal panic");
        xmo_core::cli::EXIT_USAGE
    })
}
