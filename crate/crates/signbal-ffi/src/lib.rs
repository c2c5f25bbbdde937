//! C interface to `signbal`. Every function returns an [`SbStatus`]; on
//! failure the message is kept per thread and read back with
//! [`sb_last_error_message`]. Handles are opaque and freed by their
//! `*_free` function.

use std::cell::RefCell;
use std::ffi::c_char;
use std::panic::{catch_unwind, UnwindSafe};
use std::ptr;

use signbal::barriers::{hex_defect, rkhs_norm, sphere_sign_barrier, BarrierFunction};
use signbal::defect::{make_cap, volume_bias_sample};
use signbal::kernels::{kernel_band, KernelSpec};
use signbal::sampler::{evaluate, sample_band_stream, FieldSample};
use signbal::specfun::{gaussian_cdf, tau};
use signbal::Error;

/// Status codes of the C interface.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SbStatus {
    Ok = 0,
    NullPointer = 1,
    Domain = 2,
    Config = 3,
    Numerical = 4,
    Regime = 5,
    Panic = 6,
}

/// A sampled random wave.
pub struct SbSample(FieldSample);

/// A barrier function.
pub struct SbBarrier(BarrierFunction);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> SbStatus {
    match e {
        Error::Domain(_) => SbStatus::Domain,
        Error::Config(_) | Error::Io { .. } | Error::Serde(_) => SbStatus::Config,
        Error::Numerical(_) | Error::Overflow(_) => SbStatus::Numerical,
        Error::Regime(_) => SbStatus::Regime,
    }
}

fn guard<F: FnOnce() -> Result<(), SbStatus> + UnwindSafe>(f: F) -> SbStatus {
    match catch_unwind(f) {
        Ok(Ok(())) => SbStatus::Ok,
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            SbStatus::Panic
        }
    }
}

trait IntoStatus<T> {
    fn status(self) -> Result<T, SbStatus>;
}

impl<T> IntoStatus<T> for signbal::Result<T> {
    fn status(self) -> Result<T, SbStatus> {
        self.map_err(|e| {
            set_error(e.to_string());
            status_of(&e)
        })
    }
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), SbStatus> {
    if p.is_null() {
        set_error(format!("null pointer: {what}"));
        return Err(SbStatus::NullPointer);
    }
    Ok(())
}

/// # Safety
/// `p` must be null or point to `n` readable doubles.
unsafe fn slice<'a>(p: *const f64, n: usize, what: &str) -> Result<&'a [f64], SbStatus> {
    non_null(p, what)?;
    Ok(std::slice::from_raw_parts(p, n))
}

/// Copies the calling thread's last error message, NUL-terminated and
/// truncated to `len` bytes, into `buf`. Returns the full message length
/// excluding the terminator; `buf` may be null to query it.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes of writes.
#[no_mangle]
pub unsafe extern "C" fn sb_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// NUL-terminated crate version.
#[no_mangle]
pub extern "C" fn sb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Band kernel K_{ℓ,η}(θ) on S^d.
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn sb_kernel_band(
    d: usize,
    ell: usize,
    eta: usize,
    theta: f64,
    out: *mut f64,
) -> SbStatus {
    guard(|| {
        non_null(out, "out")?;
        let spec = KernelSpec::new(d, ell, eta).status()?;
        if !(0.0..=std::f64::consts::PI).contains(&theta) {
            set_error(format!("angle {theta} outside [0, π]"));
            return Err(SbStatus::Domain);
        }
        *out = kernel_band(spec, theta);
        Ok(())
    })
}

/// Φ(u) and τ(u) = 1 − 2Φ(u).
///
/// # Safety
/// `cdf` and `tau_out` must be valid for one write each.
#[no_mangle]
pub unsafe extern "C" fn sb_gaussian_levels(u: f64, cdf: *mut f64, tau_out: *mut f64) -> SbStatus {
    guard(|| {
        non_null(cdf, "cdf")?;
        non_null(tau_out, "tau_out")?;
        *cdf = gaussian_cdf(u);
        *tau_out = tau(u);
        Ok(())
    })
}

/// Hexagonal defect D(t).
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn sb_hex_defect(t: f64, refinement: usize, out: *mut f64) -> SbStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = hex_defect(t, refinement).status()?;
        Ok(())
    })
}

/// Draws a band-limited wave on S² from replicate stream `stream`.
///
/// # Safety
/// `out` must be valid for one pointer write. The handle is released with
/// [`sb_sample_free`].
#[no_mangle]
pub unsafe extern "C" fn sb_sample_band(
    ell: usize,
    eta: usize,
    seed: u64,
    stream: u64,
    out: *mut *mut SbSample,
) -> SbStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = ptr::null_mut();
        let spec = KernelSpec::new(2, ell, eta).status()?;
        let s = sample_band_stream(spec, seed, stream).status()?;
        *out = Box::into_raw(Box::new(SbSample(s)));
        Ok(())
    })
}

/// Value of a sample at the unit vector `x` (3 doubles).
///
/// # Safety
/// `sample` must come from [`sb_sample_band`]; `x` must hold 3 doubles and
/// `out` be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn sb_sample_evaluate(
    sample: *const SbSample,
    x: *const f64,
    out: *mut f64,
) -> SbStatus {
    guard(|| {
        non_null(sample, "sample")?;
        non_null(out, "out")?;
        let x = slice(x, 3, "x")?;
        *out = evaluate(&(*sample).0, x).status()?;
        Ok(())
    })
}

/// Uncentred and centred volume bias of a sample on the cap B(x, r).
///
/// # Safety
/// `sample` must come from [`sb_sample_band`]; `x` must hold 3 doubles;
/// the outputs must be valid for one write each.
#[no_mangle]
pub unsafe extern "C" fn sb_sample_volume_bias(
    sample: *const SbSample,
    x: *const f64,
    r: f64,
    u: f64,
    refinement: usize,
    d_tilde: *mut f64,
    d_centred: *mut f64,
) -> SbStatus {
    guard(|| {
        non_null(sample, "sample")?;
        non_null(d_tilde, "d_tilde")?;
        non_null(d_centred, "d_centred")?;
        let x = slice(x, 3, "x")?;
        let cap = make_cap(x, r, refinement).status()?;
        let rep = volume_bias_sample(&(*sample).0, &cap, u).status()?;
        *d_tilde = rep.d_tilde;
        *d_centred = rep.d_centred;
        Ok(())
    })
}

/// # Safety
/// `sample` must be null or a handle from [`sb_sample_band`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sb_sample_free(sample: *mut SbSample) {
    if !sample.is_null() {
        drop(Box::from_raw(sample));
    }
}

/// Three-kernel sign-barrier around the unit vector `x` on S^d; `x` holds
/// `dim` = d + 1 doubles.
///
/// # Safety
/// `x` must hold `dim` doubles and `out` be valid for one pointer write.
/// The handle is released with [`sb_barrier_free`].
#[no_mangle]
pub unsafe extern "C" fn sb_sign_barrier(
    x: *const f64,
    dim: usize,
    r: f64,
    ell: usize,
    eta: usize,
    c: f64,
    out: *mut *mut SbBarrier,
) -> SbStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = ptr::null_mut();
        let x = slice(x, dim, "x")?;
        let b = sphere_sign_barrier(x, r, ell, eta, c).status()?;
        *out = Box::into_raw(Box::new(SbBarrier(b)));
        Ok(())
    })
}

/// h(y) for a barrier, `y` holding d + 1 doubles.
///
/// # Safety
/// `barrier` must come from [`sb_sign_barrier`]; `y` must hold d + 1
/// doubles and `out` be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn sb_barrier_eval(
    barrier: *const SbBarrier,
    y: *const f64,
    out: *mut f64,
) -> SbStatus {
    guard(|| {
        non_null(barrier, "barrier")?;
        non_null(out, "out")?;
        let b = &(*barrier).0;
        let y = slice(y, b.d + 1, "y")?;
        *out = b.eval(y);
        Ok(())
    })
}

/// RKHS norm of a barrier.
///
/// # Safety
/// `barrier` must come from [`sb_sign_barrier`]; `out` must be valid for
/// one write.
#[no_mangle]
pub unsafe extern "C" fn sb_barrier_rkhs_norm(
    barrier: *const SbBarrier,
    out: *mut f64,
) -> SbStatus {
    guard(|| {
        non_null(barrier, "barrier")?;
        non_null(out, "out")?;
        *out = rkhs_norm(&(*barrier).0).status()?;
        Ok(())
    })
}

/// Uncentred bias of a barrier at `level` on the cap of radius `r` around
/// its base point.
///
/// # Safety
/// `barrier` must come from [`sb_sign_barrier`]; `out` must be valid for
/// one write.
#[no_mangle]
pub unsafe extern "C" fn sb_barrier_bias(
    barrier: *const SbBarrier,
    r: f64,
    level: f64,
    refinement: usize,
    out: *mut f64,
) -> SbStatus {
    guard(|| {
        non_null(barrier, "barrier")?;
        non_null(out, "out")?;
        *out = (*barrier).0.bias(r, level, refinement).status()?.d_tilde;
        Ok(())
    })
}

/// # Safety
/// `barrier` must be null or a handle from [`sb_sign_barrier`] not yet
/// freed.
#[no_mangle]
pub unsafe extern "C" fn sb_barrier_free(barrier: *mut SbBarrier) {
    if !barrier.is_null() {
        drop(Box::from_raw(barrier));
    }
}
