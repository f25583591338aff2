//! C ABI over `spectral-wick`.
//!
//! Objects are opaque heap handles created by `sw_*_new` functions and
//! released with the matching `sw_*_free`. Every fallible call returns an
//! [`SwStatus`]; on failure [`sw_last_error`] describes the problem for the
//! calling thread. Results are written through out-pointers.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use spectral_wick::kernel::{Kernel, KernelConfig};
use spectral_wick::sampling::{sample, Method};
use spectral_wick::spectral::{make_builtin, DensitySpec};
use spectral_wick::wick::hermite_param;
use spectral_wick::{Error, Probe, TestFunction};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// Density or parameter validation failed.
    Validation = 3,
    /// Quadrature, factorization or derivative failure.
    Numerical = 4,
    Unsupported = 5,
    /// A Rust panic was caught at the boundary.
    Panic = 6,
}

/// Sampling method for [`sw_sample`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwMethod {
    Cholesky = 0,
    Spectral = 1,
}

/// A spectral density with its covariance kernel.
pub struct SwKernel {
    inner: Kernel,
}

/// A Gaussian bump probe bound to a kernel.
pub struct SwProbe {
    inner: Probe,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> SwStatus {
    match e {
        Error::ParameterOutOfRange(_) | Error::Config { .. } | Error::MissingColumn(_) => {
            SwStatus::InvalidArgument
        }
        Error::Validation(_)
        | Error::DomainViolation(_)
        | Error::DirectionMismatch(_)
        | Error::Integrability(_) => SwStatus::Validation,
        Error::Unsupported(_) | Error::HermiteOverflow(_) => SwStatus::Unsupported,
        _ => SwStatus::Numerical,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (SwStatus, String)>) -> SwStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            SwStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside spectral-wick".into());
            SwStatus::Panic
        }
    }
}

fn lib<T>(r: spectral_wick::Result<T>) -> Result<T, (SwStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (SwStatus, String) {
    (SwStatus::NullPointer, format!("{what} is null"))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, (SwStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, (SwStatus, String)> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn slice<'a>(
    p: *const f64,
    len: usize,
    what: &str,
) -> Result<&'a [f64], (SwStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// Message for the most recent failure on this thread, or null. The pointer
/// stays valid until the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn sw_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sw_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a kernel from a density shorthand such as `"white"`,
/// `"band-limited:delta=1"` or `"fractional:H=0.7"`, with default
/// quadrature settings.
///
/// # Safety
/// `density` must be a valid NUL-terminated string and `out_kernel` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sw_kernel_new(
    density: *const c_char,
    out_kernel: *mut *mut SwKernel,
) -> SwStatus {
    guard(|| {
        let slot = out(out_kernel, "out_kernel")?;
        *slot = ptr::null_mut();
        if density.is_null() {
            return Err(null("density"));
        }
        let text = CStr::from_ptr(density).to_str().map_err(|_| {
            (
                SwStatus::InvalidArgument,
                "density is not UTF-8".to_string(),
            )
        })?;
        let spec: DensitySpec = lib(DensitySpec::parse_shorthand(text))?;
        let m = lib(make_builtin(spec))?;
        let inner = lib(Kernel::new(m, KernelConfig::default()))?;
        *slot = Box::into_raw(Box::new(SwKernel { inner }));
        Ok(())
    })
}

/// Releases a kernel. Null is ignored.
///
/// # Safety
/// `kernel` must come from [`sw_kernel_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sw_kernel_free(kernel: *mut SwKernel) {
    if !kernel.is_null() {
        drop(Box::from_raw(kernel));
    }
}

/// `r(t) = ||T_m 1_t||^2`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sw_kernel_variance(
    kernel: *const SwKernel,
    t: f64,
    out_value: *mut f64,
) -> SwStatus {
    guard(|| {
        let k = deref(kernel, "kernel")?;
        *out(out_value, "out_value")? = lib(k.inner.r(t))?;
        Ok(())
    })
}

/// `K(t, s) = E[B(t) B(s)]`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sw_kernel_covariance(
    kernel: *const SwKernel,
    t: f64,
    s: f64,
    out_value: *mut f64,
) -> SwStatus {
    guard(|| {
        let k = deref(kernel, "kernel")?;
        *out(out_value, "out_value")? = lib(k.inner.covariance(t, s))?;
        Ok(())
    })
}

/// Gram matrix at `n` distinct times, written row-major into `out_matrix`
/// (`n * n` values). `out_jitter` receives the diagonal shift the Cholesky
/// factorization needed and may be null.
///
/// # Safety
/// `times` must hold `n` values and `out_matrix` room for `n * n`.
#[no_mangle]
pub unsafe extern "C" fn sw_kernel_gram(
    kernel: *const SwKernel,
    times: *const f64,
    n: usize,
    out_matrix: *mut f64,
    out_jitter: *mut f64,
) -> SwStatus {
    guard(|| {
        let k = deref(kernel, "kernel")?;
        let ts = slice(times, n, "times")?;
        if out_matrix.is_null() && n > 0 {
            return Err(null("out_matrix"));
        }
        let g = lib(k.inner.gram(ts))?;
        for i in 0..n {
            for j in 0..n {
                *out_matrix.add(i * n + j) = g.values[(i, j)];
            }
        }
        if let Some(j) = out_jitter.as_mut() {
            *j = g.jitter_used;
        }
        Ok(())
    })
}

/// `n_draws` paths at `n_times` times, written row-major (one row per draw)
/// into `out_draws`. Identical arguments give identical output.
///
/// # Safety
/// `times` must hold `n_times` values and `out_draws` room for
/// `n_draws * n_times`.
#[no_mangle]
pub unsafe extern "C" fn sw_sample(
    kernel: *const SwKernel,
    times: *const f64,
    n_times: usize,
    n_draws: usize,
    seed: u64,
    method: SwMethod,
    out_draws: *mut f64,
) -> SwStatus {
    guard(|| {
        let k = deref(kernel, "kernel")?;
        let ts = slice(times, n_times, "times")?;
        if out_draws.is_null() && n_times * n_draws > 0 {
            return Err(null("out_draws"));
        }
        let method = match method {
            SwMethod::Cholesky => Method::Cholesky,
            SwMethod::Spectral => Method::Spectral,
        };
        let e = lib(sample(&k.inner, ts, &[], n_draws, seed, method))?;
        for i in 0..n_draws {
            for j in 0..n_times {
                *out_draws.add(i * n_times + j) = e.draws[(i, j)];
            }
        }
        Ok(())
    })
}

/// Gaussian bump probe `exp(-(u - center)^2 / (2 width^2))`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sw_probe_new(
    kernel: *const SwKernel,
    center: f64,
    width: f64,
    out_probe: *mut *mut SwProbe,
) -> SwStatus {
    guard(|| {
        let slot = out(out_probe, "out_probe")?;
        *slot = ptr::null_mut();
        let k = deref(kernel, "kernel")?;
        let inner = lib(Probe::bump(&k.inner, center, width))?;
        *slot = Box::into_raw(Box::new(SwProbe { inner }));
        Ok(())
    })
}

/// Releases a probe. Null is ignored.
///
/// # Safety
/// `probe` must come from [`sw_probe_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sw_probe_free(probe: *mut SwProbe) {
    if !probe.is_null() {
        drop(Box::from_raw(probe));
    }
}

/// `(T_m s, T_m 1_t)` for the probe `s`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sw_probe_mean(
    probe: *const SwProbe,
    t: f64,
    out_value: *mut f64,
) -> SwStatus {
    guard(|| {
        let p = deref(probe, "probe")?;
        *out(out_value, "out_value")? = p.inner.b_s(t);
        Ok(())
    })
}

/// `||T_m s||^2` for the probe `s`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sw_probe_norm_sq(probe: *const SwProbe, out_value: *mut f64) -> SwStatus {
    guard(|| {
        let p = deref(probe, "probe")?;
        *out(out_value, "out_value")? = p.inner.norm_sq();
        Ok(())
    })
}

/// S-transform of `h~_n(<omega, 1_[a,b]>)` at the probe, which equals
/// `(T_m s, T_m 1_[a,b])^n`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sw_s_wick_power(
    probe: *const SwProbe,
    a: f64,
    b: f64,
    n: u32,
    out_value: *mut f64,
) -> SwStatus {
    guard(|| {
        let p = deref(probe, "probe")?;
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err((
                SwStatus::InvalidArgument,
                format!("interval [{a}, {b}] is empty or not finite"),
            ));
        }
        let q = p.inner.pair(&TestFunction::indicator(a, b));
        *out(out_value, "out_value")? = q.powi(n as i32);
        Ok(())
    })
}

/// Parameterized Hermite polynomial `h_n^{[t]}(x)`, `n <= 64`.
///
/// # Safety
/// `out_value` must be valid.
#[no_mangle]
pub unsafe extern "C" fn sw_hermite(n: u32, t: f64, x: f64, out_value: *mut f64) -> SwStatus {
    guard(|| {
        let slot = out(out_value, "out_value")?;
        *slot = lib(hermite_param(n as usize, t, x))?;
        Ok(())
    })
}
