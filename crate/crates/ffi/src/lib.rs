//! C ABI for the nonlocal-forms library.
//!
//! Conventions: opaque handles created by `*_new` functions and released by
//! the matching `*_free`; every fallible call returns an [`NlfStatus`] and
//! writes results through out pointers; the last error message of the
//! current thread is available from [`nlf_last_error_message`]. All
//! functions catch panics at the boundary.
//!
//! The generated header lives at `include/nonlocal_forms.h`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use nonlocal_forms::config::{ExperimentConfig, KernelSpec, MollifierSpec};
use nonlocal_forms::experiment::run_to_dir;
use nonlocal_forms::forms::diffusion_matrix;
use nonlocal_forms::kernels::{KernelFamily, Mollifier};
use nonlocal_forms::Error;

/// Status codes of fallible calls.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NlfStatus {
    Ok = 0,
    InvalidArgument = 1,
    DomainError = 2,
    NumericalError = 3,
    Panicked = 4,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: &str) {
    let sanitized = msg.replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(sanitized).unwrap());
}

fn status_of(err: &Error) -> NlfStatus {
    match err {
        Error::InvalidParameter(_) | Error::Config(_) => NlfStatus::InvalidArgument,
        Error::Domain(_) => NlfStatus::DomainError,
        _ => NlfStatus::NumericalError,
    }
}

fn guard(f: impl FnOnce() -> NlfStatus) -> NlfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("panic across the FFI boundary");
            NlfStatus::Panicked
        }
    }
}

unsafe fn cstr<'a>(ptr: *const c_char) -> Option<&'a str> {
    if ptr.is_null() {
        return None;
    }
    CStr::from_ptr(ptr).to_str().ok()
}

/// Opaque mollifier-family handle.
pub struct NlfMollifier(Mollifier);

/// Opaque kernel-family handle.
pub struct NlfKernel(KernelFamily);

/// Version string of the library (static storage).
#[no_mangle]
pub extern "C" fn nlf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message of the last error on this thread (valid until the next failing
/// call on the same thread).
#[no_mangle]
pub extern "C" fn nlf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Create a mollifier family by catalog id (`power_law`, `bounded_poly`,
/// `log_annulus`, `shifted_power`, `shifted_critical`, `shifted_ratio`,
/// `profile`). Pass NaN for `beta`/`eps0` to use the defaults.
///
/// # Safety
/// `family_id` must be a valid NUL-terminated string and `out` a valid
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn nlf_mollifier_new(
    family_id: *const c_char,
    d: usize,
    beta: f64,
    eps0: f64,
    out: *mut *mut NlfMollifier,
) -> NlfStatus {
    guard(|| {
        let Some(id) = cstr(family_id) else {
            set_error("family_id is null or not UTF-8");
            return NlfStatus::InvalidArgument;
        };
        if out.is_null() {
            set_error("out pointer is null");
            return NlfStatus::InvalidArgument;
        }
        let spec = MollifierSpec {
            family: id.to_string(),
            d,
            beta: (!beta.is_nan()).then_some(beta),
            eps0: (!eps0.is_nan()).then_some(eps0),
            profile: None,
        };
        match spec.build() {
            Ok(m) => {
                *out = Box::into_raw(Box::new(NlfMollifier(m)));
                NlfStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Evaluate `rho_eps(h)`; `h` points to `d` coordinates.
///
/// # Safety
/// `m`, `h` (length `d`) and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn nlf_mollifier_eval(
    m: *const NlfMollifier,
    eps: f64,
    h: *const f64,
    d: usize,
    out: *mut f64,
) -> NlfStatus {
    guard(|| {
        let (Some(m), false, false) = (m.as_ref(), h.is_null(), out.is_null()) else {
            set_error("null pointer argument");
            return NlfStatus::InvalidArgument;
        };
        let hs = std::slice::from_raw_parts(h, d);
        match m.0.eval(eps, hs) {
            Ok(v) => {
                *out = v;
                NlfStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Release a mollifier handle (accepts null).
///
/// # Safety
/// `m` must come from `nlf_mollifier_new` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn nlf_mollifier_free(m: *mut NlfMollifier) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Create a kernel family by kind id (`j1`, `j2`, `j3`, `j4`, `nu`,
/// `perturbed`, `violator`); the base mollifier defaults to the power-law
/// family. Pass NaN for unused numeric parameters.
///
/// # Safety
/// `kind` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nlf_kernel_new(
    kind: *const c_char,
    d: usize,
    beta: f64,
    lambda: f64,
    seed: u64,
    out: *mut *mut NlfKernel,
) -> NlfStatus {
    guard(|| {
        let Some(kind) = cstr(kind) else {
            set_error("kind is null or not UTF-8");
            return NlfStatus::InvalidArgument;
        };
        if out.is_null() {
            set_error("out pointer is null");
            return NlfStatus::InvalidArgument;
        }
        let spec = KernelSpec {
            kind: kind.to_string(),
            d,
            base: None,
            beta: (!beta.is_nan()).then_some(beta),
            lambda: (!lambda.is_nan()).then_some(lambda),
        };
        match spec.build(seed) {
            Ok(k) => {
                *out = Box::into_raw(Box::new(NlfKernel(k)));
                NlfStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Evaluate `J_alpha(x, y)`; `x` and `y` point to `d` coordinates each.
///
/// # Safety
/// `k`, `x`, `y` (length `d`) and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn nlf_kernel_eval(
    k: *const NlfKernel,
    alpha: f64,
    x: *const f64,
    y: *const f64,
    d: usize,
    out: *mut f64,
) -> NlfStatus {
    guard(|| {
        let (Some(k), false, false, false) =
            (k.as_ref(), x.is_null(), y.is_null(), out.is_null())
        else {
            set_error("null pointer argument");
            return NlfStatus::InvalidArgument;
        };
        let xs = std::slice::from_raw_parts(x, d);
        let ys = std::slice::from_raw_parts(y, d);
        let result = k.0.at(alpha).and_then(|ka| ka.eval(xs, ys));
        match result {
            Ok(v) => {
                *out = v;
                NlfStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Stored two-sided comparison constant of the kernel family.
///
/// # Safety
/// `k` must be a valid kernel handle.
#[no_mangle]
pub unsafe extern "C" fn nlf_kernel_lambda(k: *const NlfKernel) -> f64 {
    match k.as_ref() {
        Some(k) => k.0.lambda(),
        None => f64::NAN,
    }
}

/// Release a kernel handle (accepts null).
///
/// # Safety
/// `k` must come from `nlf_kernel_new` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn nlf_kernel_free(k: *mut NlfKernel) {
    if !k.is_null() {
        drop(Box::from_raw(k));
    }
}

/// Second-moment matrix sweep: writes the final `d x d` matrix row-major
/// into `out_entries` (length 4, padded with zeros for d = 1) and the
/// Cauchy-convergence flag into `out_converged`.
///
/// # Safety
/// `k`, `x` (length `d` of the kernel), `alphas` (length `n_alphas`),
/// `out_entries` (length 4) and `out_converged` must be valid.
#[no_mangle]
pub unsafe extern "C" fn nlf_diffusion_matrix(
    k: *const NlfKernel,
    x: *const f64,
    delta: f64,
    alphas: *const f64,
    n_alphas: usize,
    matrix_tol: f64,
    out_entries: *mut f64,
    out_converged: *mut bool,
) -> NlfStatus {
    guard(|| {
        let (Some(k), false, false, false, false) = (
            k.as_ref(),
            x.is_null(),
            alphas.is_null(),
            out_entries.is_null(),
            out_converged.is_null(),
        ) else {
            set_error("null pointer argument");
            return NlfStatus::InvalidArgument;
        };
        let d = k.0.dimension();
        let xs = std::slice::from_raw_parts(x, d);
        let sweep = std::slice::from_raw_parts(alphas, n_alphas);
        match diffusion_matrix(&k.0, xs, delta, sweep, matrix_tol) {
            Ok(m) => {
                let entries = std::slice::from_raw_parts_mut(out_entries, 4);
                entries[0] = m.entries[0][0];
                entries[1] = m.entries[0][1];
                entries[2] = m.entries[1][0];
                entries[3] = m.entries[1][1];
                *out_converged = m.converged;
                NlfStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Run an experiment config (TOML file) writing artifacts into `out_dir`.
/// Returns the runner exit status: 0 pass, 1 assertion failure, 2 config
/// error, 3 numerical failure, 4 panic.
///
/// # Safety
/// `config_path` and `out_dir` must be valid NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn nlf_run_experiment(
    config_path: *const c_char,
    out_dir: *const c_char,
) -> i32 {
    let status = guard(|| {
        let (Some(path), Some(out)) = (cstr(config_path), cstr(out_dir)) else {
            set_error("null or invalid path argument");
            return NlfStatus::InvalidArgument;
        };
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => {
                set_error(&format!("cannot read {path}: {e}"));
                return NlfStatus::InvalidArgument;
            }
        };
        let config = match ExperimentConfig::from_toml(&text) {
            Ok(c) => c,
            Err(e) => {
                set_error(&e.to_string());
                return NlfStatus::InvalidArgument;
            }
        };
        match run_to_dir(&config, std::path::Path::new(out)) {
            Ok(outcome) if outcome.passed() => NlfStatus::Ok,
            Ok(_) => {
                set_error("assertion failure (see the summary artifact)");
                // distinguished below
                NlfStatus::DomainError
            }
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    });
    match status {
        NlfStatus::Ok => 0,
        NlfStatus::DomainError => 1,
        NlfStatus::InvalidArgument => 2,
        NlfStatus::NumericalError => 3,
        NlfStatus::Panicked => 4,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mollifier_roundtrip_through_the_c_abi() {
        unsafe {
            let mut handle: *mut NlfMollifier = std::ptr::null_mut();
            let id = CString::new("power_law").unwrap();
            let status =
                nlf_mollifier_new(id.as_ptr(), 1, f64::NAN, f64::NAN, &mut handle);
            assert_eq!(status, NlfStatus::Ok);
            let mut value = 0.0;
            let h = [0.5f64];
            assert_eq!(
                nlf_mollifier_eval(handle, 0.5, h.as_ptr(), 1, &mut value),
                NlfStatus::Ok
            );
            assert!((value - 0.25 * 0.5f64.powf(-0.5)).abs() < 1e-14);
            // domain error: the origin
            let zero = [0.0f64];
            assert_eq!(
                nlf_mollifier_eval(handle, 0.5, zero.as_ptr(), 1, &mut value),
                NlfStatus::DomainError
            );
            let msg = CStr::from_ptr(nlf_last_error_message());
            assert!(!msg.to_bytes().is_empty());
            nlf_mollifier_free(handle);
        }
    }

    #[test]
    fn kernel_and_matrix_through_the_c_abi() {
        unsafe {
            let mut k: *mut NlfKernel = std::ptr::null_mut();
            let id = CString::new("j4").unwrap();
            assert_eq!(
                nlf_kernel_new(id.as_ptr(), 2, f64::NAN, f64::NAN, 0, &mut k),
                NlfStatus::Ok
            );
            assert!((nlf_kernel_lambda(k) - 2.0).abs() < 1e-12);
            let x = [0.0f64, 0.0];
            let y = [0.05f64, 0.0];
            let mut v = 0.0;
            assert_eq!(
                nlf_kernel_eval(k, 1.9, x.as_ptr(), y.as_ptr(), 2, &mut v),
                NlfStatus::Ok
            );
            assert!(v > 0.0);
            let alphas = [1.5f64, 1.9, 1.99, 1.999];
            let mut entries = [0.0f64; 4];
            let mut converged = false;
            assert_eq!(
                nlf_diffusion_matrix(
                    k,
                    x.as_ptr(),
                    0.5,
                    alphas.as_ptr(),
                    alphas.len(),
                    1e-3,
                    entries.as_mut_ptr(),
                    &mut converged,
                ),
                NlfStatus::Ok
            );
            assert!(converged);
            assert!((entries[0] - 1.0).abs() < 1e-3);
            assert!((entries[3] - 1.0).abs() < 1e-3);
            nlf_kernel_free(k);
        }
    }

    #[test]
    fn invalid_inputs_are_reported() {
        unsafe {
            let mut k: *mut NlfKernel = std::ptr::null_mut();
            let id = CString::new("j9").unwrap();
            assert_eq!(
                nlf_kernel_new(id.as_ptr(), 2, f64::NAN, f64::NAN, 0, &mut k),
                NlfStatus::InvalidArgument
            );
            assert_eq!(
                nlf_kernel_new(std::ptr::null(), 2, f64::NAN, f64::NAN, 0, &mut k),
                NlfStatus::InvalidArgument
            );
        }
    }

    #[test]
    fn experiment_runner_exit_codes() {
        let dir = std::env::temp_dir().join("nlf-ffi-test");
        std::fs::create_dir_all(&dir).unwrap();
        let cfg_path = dir.join("bbm.toml");
        std::fs::write(
            &cfg_path,
            r#"
spec_version = 1
kind = "bbm_limit"
name = "ffi_bbm"
[domain]
n = 8
r_trunc = 2.0
[domain.geometry]
shape = "interval"
a = 0.0
b = 1.0
[kernel]
kind = "nu"
d = 1
"#,
        )
        .unwrap();
        let cfg_c = CString::new(cfg_path.to_str().unwrap()).unwrap();
        let out_c = CString::new(dir.join("out").to_str().unwrap()).unwrap();
        unsafe {
            assert_eq!(nlf_run_experiment(cfg_c.as_ptr(), out_c.as_ptr()), 0);
            let missing = CString::new("/nonexistent.toml").unwrap();
            assert_eq!(nlf_run_experiment(missing.as_ptr(), out_c.as_ptr()), 2);
        }
    }
}
