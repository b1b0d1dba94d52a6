//! C interface to `hardy-lab`.
//!
//! Every function returns an [`HlStatus`]; results are written through out
//! pointers. Solver objects are opaque handles released with their `_free`
//! function. The message of the last failure on the calling thread is
//! available from [`hl_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use hardy_lab::angular::AngularMesh;
use hardy_lab::bvp::{ratio_trace, solve_weak, WeakSingularityRun};
use hardy_lab::capacity::{classify_removability, Regime};
use hardy_lab::fieldops::AxiGrid;
use hardy_lab::hemisphere::{solve_omega, HemisphereSolution};
use hardy_lab::suite::{run_suite, RunConfig};
use hardy_lab::{exponent_pack, Error, HardyParams};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HlStatus {
    Ok = 0,
    NullPointer = 1,
    Domain = 2,
    Supercritical = 3,
    Convergence = 4,
    Fit = 5,
    Input = 6,
    Singular = 7,
    Pole = 8,
    Config = 9,
    Io = 10,
    BufferTooSmall = 11,
    Panic = 12,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HlRegime {
    Subcritical = 0,
    SupercriticalGeneric = 1,
    SupercriticalEpsilonCase = 2,
}

/// Closed-form exponents. Fields undefined at or above `q_crit` are NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct HlConstants {
    pub alpha: f64,
    pub q_crit: f64,
    pub ell: f64,
    pub kappa: f64,
    pub gamma1: f64,
    pub alpha0: f64,
    pub mu0: f64,
    pub gamma2: f64,
    pub sing_exp: f64,
    pub subcritical: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct HlVerdict {
    pub regime: HlRegime,
    pub s: f64,
    pub p: f64,
    pub point_removable: bool,
    pub inconclusive: bool,
    /// Upper end of the ε-window, NaN outside the `q = α + 1` case.
    pub epsilon_upper: f64,
}

/// Dimension and Hardy coefficient.
pub struct HlParams(HardyParams);

/// Hemisphere profile `ω`.
pub struct HlOmega(HemisphereSolution);

/// Weak singularity `u_{0,k}` on the model half-ball.
pub struct HlWeakRun(WeakSingularityRun);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> HlStatus {
    match e {
        Error::Domain { .. } => HlStatus::Domain,
        Error::Supercritical { .. } => HlStatus::Supercritical,
        Error::Convergence { .. } => HlStatus::Convergence,
        Error::Fit(_) => HlStatus::Fit,
        Error::Input(_) => HlStatus::Input,
        Error::Singular(_) => HlStatus::Singular,
        Error::Pole => HlStatus::Pole,
        Error::Config(_) => HlStatus::Config,
        Error::Stage { source, .. } => status_of(source),
        Error::Io(_) | Error::Csv(_) | Error::Json(_) => HlStatus::Io,
    }
}

fn guard(f: impl FnOnce() -> Result<(), HlStatus>) -> HlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HlStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("panic inside hardy-lab".into());
            HlStatus::Panic
        }
    }
}

fn fail(e: Error) -> HlStatus {
    let s = status_of(&e);
    set_error(e.to_string());
    s
}

fn null() -> HlStatus {
    set_error("null pointer argument".into());
    HlStatus::NullPointer
}

unsafe fn params<'a>(p: *const HlParams) -> Result<&'a HardyParams, HlStatus> {
    p.as_ref().map(|h| &h.0).ok_or_else(null)
}

unsafe fn write<T>(out: *mut T, value: T) -> Result<(), HlStatus> {
    if out.is_null() {
        return Err(null());
    }
    out.write(value);
    Ok(())
}

/// Copies the last error message of this thread, NUL-terminated, into
/// `buf` and returns its length in bytes without the terminator. With a
/// null `buf` or a too small `len` nothing is written.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn hl_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let n = msg.len();
        if !buf.is_null() && len > n {
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        n
    })
}

/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn hl_params_new(n: usize, mu: f64, out: *mut *mut HlParams) -> HlStatus {
    guard(|| {
        let hp = HardyParams::new(n, mu).map_err(fail)?;
        write(out, Box::into_raw(Box::new(HlParams(hp))))
    })
}

/// # Safety
/// `p` must be null or a handle from [`hl_params_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hl_params_free(p: *mut HlParams) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// # Safety
/// `p` must be a live params handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hl_constants(p: *const HlParams, q: f64, out: *mut HlConstants) -> HlStatus {
    guard(|| {
        let hp = params(p)?;
        let pack = exponent_pack(hp, q).map_err(fail)?;
        let c = HlConstants {
            alpha: pack.alpha,
            q_crit: pack.q_crit,
            ell: pack.ell,
            kappa: pack.kappa,
            gamma1: pack.gamma1.unwrap_or(f64::NAN),
            alpha0: pack.alpha0.unwrap_or(f64::NAN),
            mu0: pack.mu0.unwrap_or(f64::NAN),
            gamma2: pack.gamma2.unwrap_or(f64::NAN),
            sing_exp: pack.sing_exp,
            subcritical: pack.is_subcritical(),
        };
        write(out, c)
    })
}

/// Solves for `ω` on a Chebyshev mesh of `m` nodes.
///
/// # Safety
/// `p` must be a live params handle and `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn hl_omega_solve(p: *const HlParams, q: f64, m: usize, out: *mut *mut HlOmega) -> HlStatus {
    guard(|| {
        let hp = params(p)?;
        let mesh = AngularMesh::chebyshev(m).map_err(fail)?;
        let sol = solve_omega(hp, q, &mesh).map_err(fail)?;
        write(out, Box::into_raw(Box::new(HlOmega(sol))))
    })
}

/// # Safety
/// `h` must be null or a handle from [`hl_omega_solve`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hl_omega_free(h: *mut HlOmega) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Number of mesh nodes, 0 for a null handle.
///
/// # Safety
/// `h` must be null or a live omega handle.
#[no_mangle]
pub unsafe extern "C" fn hl_omega_len(h: *const HlOmega) -> usize {
    h.as_ref().map_or(0, |s| s.0.omega.len())
}

/// # Safety
/// `h` must be a live omega handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hl_omega_residual(h: *const HlOmega, out: *mut f64) -> HlStatus {
    guard(|| {
        let s = h.as_ref().ok_or_else(null)?;
        write(out, s.0.residual_sup)
    })
}

/// Copies the angles and profile values into two arrays of `len` entries.
/// Either array may be null.
///
/// # Safety
/// `h` must be a live omega handle; non-null `phi` and `omega` must point
/// to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn hl_omega_values(h: *const HlOmega, phi: *mut f64, omega: *mut f64, len: usize) -> HlStatus {
    guard(|| {
        let s = &h.as_ref().ok_or_else(null)?.0;
        let m = s.omega.len();
        if len < m {
            set_error(format!("buffer of {len} entries for {m} nodes"));
            return Err(HlStatus::BufferTooSmall);
        }
        if !phi.is_null() {
            ptr::copy_nonoverlapping(s.phi().as_ptr(), phi, m);
        }
        if !omega.is_null() {
            ptr::copy_nonoverlapping(s.omega.as_ptr(), omega, m);
        }
        Ok(())
    })
}

/// Solves for the weak singularity of mass `k` on the log-uniform grid with
/// `radial × angular` nodes down to `r_min`.
///
/// # Safety
/// `p` must be a live params handle and `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn hl_weak_solve(
    p: *const HlParams,
    q: f64,
    k: f64,
    r_min: f64,
    radial: usize,
    angular: usize,
    out: *mut *mut HlWeakRun,
) -> HlStatus {
    guard(|| {
        let hp = params(p)?;
        let mesh = AngularMesh::chebyshev(angular).map_err(fail)?;
        let grid = AxiGrid::new(r_min, radial, mesh).map_err(fail)?;
        let run = solve_weak(k, hp, q, &grid).map_err(fail)?;
        write(out, Box::into_raw(Box::new(HlWeakRun(run))))
    })
}

/// # Safety
/// `h` must be null or a handle from [`hl_weak_solve`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hl_weak_free(h: *mut HlWeakRun) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Extrapolated axis ratio `u/(kK)` at the origin.
///
/// # Safety
/// `h` must be a live weak-run handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hl_weak_ratio_limit(h: *const HlWeakRun, out: *mut f64) -> HlStatus {
    guard(|| {
        let run = &h.as_ref().ok_or_else(null)?.0;
        write(out, ratio_trace(run).limit)
    })
}

/// # Safety
/// `h` must be a live weak-run handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hl_weak_residual(h: *const HlWeakRun, out: *mut f64) -> HlStatus {
    guard(|| {
        let run = &h.as_ref().ok_or_else(null)?.0;
        write(out, run.residual_sup)
    })
}

/// # Safety
/// `p` must be a live params handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hl_classify(p: *const HlParams, q: f64, out: *mut HlVerdict) -> HlStatus {
    guard(|| {
        let hp = params(p)?;
        let v = classify_removability(hp, q).map_err(fail)?;
        let regime = match v.regime {
            Regime::Subcritical => HlRegime::Subcritical,
            Regime::SupercriticalGeneric => HlRegime::SupercriticalGeneric,
            Regime::SupercriticalEpsilonCase => HlRegime::SupercriticalEpsilonCase,
        };
        let verdict = HlVerdict {
            regime,
            s: v.s,
            p: v.p,
            point_removable: v.point_removable,
            inconclusive: v.inconclusive,
            epsilon_upper: v.epsilon_window.map_or(f64::NAN, |w| w.upper),
        };
        write(out, verdict)
    })
}

/// Runs the acceptance suite for a TOML configuration (null for the
/// defaults) and reports whether every check passed.
///
/// # Safety
/// `config` must be null or a NUL-terminated string; `passed` writable.
#[no_mangle]
pub unsafe extern "C" fn hl_run_suite(config: *const c_char, passed: *mut bool) -> HlStatus {
    guard(|| {
        let cfg = if config.is_null() {
            RunConfig::default()
        } else {
            let text = CStr::from_ptr(config).to_str().map_err(|_| {
                set_error("configuration is not valid UTF-8".into());
                HlStatus::Config
            })?;
            RunConfig::from_toml_str(text).map_err(fail)?
        };
        let report = run_suite(&cfg).map_err(fail)?;
        write(passed, report.passed)
    })
}
