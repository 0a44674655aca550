//! C ABI over `diffeo_energy`.
//!
//! Paths and diffeomorphisms live behind opaque handles that the caller
//! frees with the matching `*_free`. Every fallible call returns a
//! [`DeStatus`]; on failure the message is kept per thread and can be read
//! with [`de_last_error`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};

use diffeo_energy::functionals::{central_defect, energy_diff, energy_virasoro, length_diff, VirasoroPath};
use diffeo_energy::grid::{Diffeo1D, DiffPath, GridSpec, ScalarField2D, SeminormOrder, DEFAULT_TAIL_TOL};
use diffeo_energy::group::{bott_cocycle, compose, invert};
use diffeo_energy::paths::{gaussian_bump, random_path};
use diffeo_energy::perturb::perturb;
use diffeo_energy::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeStatus {
    Ok = 0,
    NullPointer = 1,
    /// Bad sizes, non-finite input, mismatched grids or a bad configuration.
    InvalidArgument = 2,
    Stencil = 3,
    Tail = 4,
    NotDiffeo = 5,
    WarpTooLarge = 6,
    NoSite = 7,
    OrderConstraint = 8,
    BadBumpChoice = 9,
    NoRoot = 10,
    ZeroLength = 11,
    NoConvergence = 12,
    Io = 13,
    /// A bug inside the library; the message says where.
    Panic = 14,
}

/// A path `φ(t,x) = x + u(t,x)` on a grid.
pub struct DePath(DiffPath);

/// One diffeomorphism `x ↦ x + u(x)`.
pub struct DeDiffeo(Diffeo1D);

/// Measurements of one time warp.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DePerturbResult {
    pub delta_e: f64,
    pub closeness: f64,
    pub predicted: f64,
    pub ratio: f64,
    pub endpoint_residual_0: f64,
    pub endpoint_residual_t: f64,
    pub theta: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> DeStatus {
    match e {
        Error::Stencil(_) => DeStatus::Stencil,
        Error::Domain(_) | Error::Shape(_) | Error::Config(_) => DeStatus::InvalidArgument,
        Error::Tail(_) => DeStatus::Tail,
        Error::NotDiffeo(_) => DeStatus::NotDiffeo,
        Error::WarpTooLarge(_) => DeStatus::WarpTooLarge,
        Error::NoSite(_) => DeStatus::NoSite,
        Error::OrderConstraint(_) => DeStatus::OrderConstraint,
        Error::BadBumpChoice(_) => DeStatus::BadBumpChoice,
        Error::NoRoot(_) => DeStatus::NoRoot,
        Error::ZeroLength => DeStatus::ZeroLength,
        Error::NoConvergence(_) => DeStatus::NoConvergence,
        Error::Io(_) => DeStatus::Io,
    }
}

enum Fail {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

/// Runs `f`, translating errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> DeStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            DeStatus::Ok
        }
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            DeStatus::NullPointer
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            DeStatus::Panic
        }
    }
}

unsafe fn get<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &'static str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn put<T>(out: *mut T, v: T, what: &'static str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Null(what));
    }
    out.write(v);
    Ok(())
}

const STATUS_TEXT: [&CStr; 15] = [
    c"ok",
    c"null pointer",
    c"invalid argument",
    c"stencil error",
    c"tail tolerance violated",
    c"not a diffeomorphism",
    c"warp too large",
    c"no admissible perturbation site",
    c"order constraint violated",
    c"bad bump choice",
    c"no root",
    c"zero length path",
    c"no convergence",
    c"io error",
    c"internal panic",
];

/// Static description of a status code; never null, never freed. Codes
/// outside [`DeStatus`] give "unknown status".
#[no_mangle]
pub extern "C" fn de_status_string(code: i32) -> *const c_char {
    usize::try_from(code).ok().and_then(|k| STATUS_TEXT.get(k)).copied().unwrap_or(c"unknown status").as_ptr()
}

/// Copies the calling thread's last error message, NUL-terminated and
/// truncated to `cap` bytes, into `buf`. Returns the full message length
/// without the terminator; pass `buf = NULL` to query it.
///
/// # Safety
/// `buf` must be null or valid for `cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn de_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && cap > 0 {
            let n = msg.len().min(cap - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

fn grid(n_t: usize, n_x: usize, t_max: f64, x_max: f64) -> Result<GridSpec, Fail> {
    Ok(GridSpec::new(n_t, n_x, t_max, x_max)?)
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

/// Path from `n_t·n_x` displacement samples, time-major.
///
/// # Safety
/// `u` must be valid for `n_t·n_x` reads; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn de_path_from_values(
    n_t: usize,
    n_x: usize,
    t_max: f64,
    x_max: f64,
    u: *const f64,
    out: *mut *mut DePath,
) -> DeStatus {
    guard(|| {
        let g = grid(n_t, n_x, t_max, x_max)?;
        let v = slice(u, g.len(), "u")?.to_vec();
        let p = DiffPath::new(ScalarField2D::new(g, v)?, DEFAULT_TAIL_TOL)?;
        put(out, boxed(DePath(p)), "out")
    })
}

/// `u = A sin(πt/T) e^{-x²}`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn de_path_gaussian_bump(
    n_t: usize,
    n_x: usize,
    t_max: f64,
    x_max: f64,
    amplitude: f64,
    out: *mut *mut DePath,
) -> DeStatus {
    guard(|| {
        let p = gaussian_bump(grid(n_t, n_x, t_max, x_max)?, amplitude)?;
        put(out, boxed(DePath(p)), "out")
    })
}

/// Seeded random path of three drifting Gaussians.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn de_path_random(
    n_t: usize,
    n_x: usize,
    t_max: f64,
    x_max: f64,
    seed: u64,
    out: *mut *mut DePath,
) -> DeStatus {
    guard(|| {
        let p = random_path(grid(n_t, n_x, t_max, x_max)?, seed)?;
        put(out, boxed(DePath(p)), "out")
    })
}

/// Frees a path; null is ignored.
///
/// # Safety
/// `path` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn de_path_free(path: *mut DePath) {
    if !path.is_null() {
        drop(Box::from_raw(path));
    }
}

/// Grid sizes of a path.
///
/// # Safety
/// `path` must be a live handle; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn de_path_shape(path: *const DePath, n_t: *mut usize, n_x: *mut usize) -> DeStatus {
    guard(|| {
        let g = *get(path, "path")?.0.grid();
        put(n_t, g.n_t, "n_t")?;
        put(n_x, g.n_x, "n_x")
    })
}

unsafe fn scalar(path: *const DePath, out: *mut f64, f: fn(&DiffPath) -> diffeo_energy::Result<f64>) -> DeStatus {
    guard(|| {
        let v = f(&get(path, "path")?.0)?;
        put(out, v, "out")
    })
}

/// `E(φ) = ∬ φ_t² φ_x dx dt`.
///
/// # Safety
/// `path` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn de_energy(path: *const DePath, out: *mut f64) -> DeStatus {
    scalar(path, out, energy_diff)
}

/// `L(φ) = ∫ |φ_t|_φ dt`.
///
/// # Safety
/// `path` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn de_length(path: *const DePath, out: *mut f64) -> DeStatus {
    scalar(path, out, length_diff)
}

/// `C(φ) = ∬ φ_tx φ_xx / φ_x² dx dt`.
///
/// # Safety
/// `path` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn de_central_defect(path: *const DePath, out: *mut f64) -> DeStatus {
    scalar(path, out, central_defect)
}

/// Energy of `(φ, α)` with `α` sampled at the `n_t` time nodes.
///
/// # Safety
/// `path` must be a live handle, `alpha` valid for `len` reads, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn de_energy_virasoro(path: *const DePath, alpha: *const f64, len: usize, out: *mut f64) -> DeStatus {
    guard(|| {
        let p = get(path, "path")?.0.clone();
        let vp = VirasoroPath::new(p, slice(alpha, len, "alpha")?.to_vec())?;
        put(out, energy_virasoro(&vp)?, "out")
    })
}

/// Time warp of scale `ε` with orders `(k, m, n)` and exponent `a`.
///
/// # Safety
/// `path` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn de_perturb(
    path: *const DePath,
    k: u32,
    m: usize,
    n: usize,
    eps: f64,
    a: u32,
    out: *mut DePerturbResult,
) -> DeStatus {
    guard(|| {
        let p = &get(path, "path")?.0;
        let r = perturb(p, SeminormOrder::new(k, m, n)?, eps, a)?;
        let res = DePerturbResult {
            delta_e: r.delta_e,
            closeness: r.closeness,
            predicted: r.predicted,
            ratio: r.ratio,
            endpoint_residual_0: r.endpoint_residual_0,
            endpoint_residual_t: r.endpoint_residual_t,
            theta: r.theta,
        };
        put(out, res, "out")
    })
}

/// Diffeomorphism from `n` displacement samples on `[-x_max, x_max]`.
///
/// # Safety
/// `u` must be valid for `n` reads; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn de_diffeo_from_values(x_max: f64, u: *const f64, n: usize, out: *mut *mut DeDiffeo) -> DeStatus {
    guard(|| {
        let d = Diffeo1D::new(x_max, slice(u, n, "u")?.to_vec(), DEFAULT_TAIL_TOL)?;
        put(out, boxed(DeDiffeo(d)), "out")
    })
}

/// Frees a diffeomorphism; null is ignored.
///
/// # Safety
/// `d` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn de_diffeo_free(d: *mut DeDiffeo) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// Copies the displacement samples into `buf`, which must hold exactly the
/// number of samples the diffeomorphism was built with.
///
/// # Safety
/// `d` must be a live handle and `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn de_diffeo_values(d: *const DeDiffeo, buf: *mut f64, len: usize) -> DeStatus {
    guard(|| {
        let u = get(d, "diffeo")?.0.displacement();
        if len != u.len() {
            return Err(Error::Shape(format!("buffer holds {len}, diffeo has {}", u.len())).into());
        }
        if buf.is_null() {
            return Err(Fail::Null("buf"));
        }
        std::ptr::copy_nonoverlapping(u.as_ptr(), buf, len);
        Ok(())
    })
}

/// `φ∘ψ`.
///
/// # Safety
/// Inputs must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn de_diffeo_compose(phi: *const DeDiffeo, psi: *const DeDiffeo, out: *mut *mut DeDiffeo) -> DeStatus {
    guard(|| {
        let c = compose(&get(phi, "phi")?.0, &get(psi, "psi")?.0)?;
        put(out, boxed(DeDiffeo(c)), "out")
    })
}

/// `φ⁻¹`.
///
/// # Safety
/// `phi` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn de_diffeo_invert(phi: *const DeDiffeo, out: *mut *mut DeDiffeo) -> DeStatus {
    guard(|| {
        let c = invert(&get(phi, "phi")?.0)?;
        put(out, boxed(DeDiffeo(c)), "out")
    })
}

/// Bott cocycle `c(φ, ψ)`.
///
/// # Safety
/// Inputs must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn de_bott_cocycle(phi: *const DeDiffeo, psi: *const DeDiffeo, out: *mut f64) -> DeStatus {
    guard(|| {
        let c = bott_cocycle(&get(phi, "phi")?.0, &get(psi, "psi")?.0)?;
        put(out, c, "out")
    })
}
