//! C ABI over `kuramoto-core`.
//!
//! Fallible functions return a [`KuramotoStatus`]. On failure a message is
//! kept per thread and can be read with [`kuramoto_last_error`]. Handles are
//! opaque; release each one with its `*_free` function. Array arguments are
//! `(pointer, length)` pairs of `double`, and output arrays must hold `n`
//! elements where `n` is the size of the handle they are read from.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use kuramoto_core::meanfield::{wasserstein2_auto, EmpiricalMeasure, W2Method, W2Options};
use kuramoto_core::observables::{energies, global_order};
use kuramoto_core::{
    model, simulate, Capacity, Error, IntegratorConfig, ModelParams, OscillatorEnsemble, Scheme, Trajectory,
};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KuramotoStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    NonFinite = 4,
    Diverged = 5,
    Unsupported = 6,
    Panic = 7,
}

/// Values accepted by the `scheme` argument of [`kuramoto_simulate`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KuramotoScheme {
    Rk4 = 0,
    SemiImplicitEuler = 1,
}

/// Model parameters: masses, frictions, natural frequencies, coupling and network.
pub struct KuramotoParams {
    inner: ModelParams,
}

/// Phases and frequencies of an ensemble.
pub struct KuramotoState {
    inner: OscillatorEnsemble,
}

/// Sampled states of a simulation.
pub struct KuramotoTrajectory {
    inner: Trajectory,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure {
    status: KuramotoStatus,
    message: String,
}

impl Failure {
    fn new(status: KuramotoStatus, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::DimensionMismatch { .. } => KuramotoStatus::DimensionMismatch,
            Error::NonFinite { .. } => KuramotoStatus::NonFinite,
            Error::Diverged { .. } => KuramotoStatus::Diverged,
            Error::WrongVariant { .. } | Error::ExactW2Unavailable { .. } => KuramotoStatus::Unsupported,
            _ => KuramotoStatus::InvalidArgument,
        };
        Failure::new(status, e.to_string())
    }
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn guard<F>(f: F) -> KuramotoStatus
where
    F: FnOnce() -> Result<(), Failure>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => KuramotoStatus::Ok,
        Ok(Err(fail)) => {
            set_last_error(&fail.message);
            fail.status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(&format!("internal panic: {msg}"));
            KuramotoStatus::Panic
        }
    }
}

unsafe fn input<'a>(p: *const f64, n: usize, what: &str) -> Result<&'a [f64], Failure> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::new(KuramotoStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn output<'a>(p: *mut f64, n: usize, what: &str) -> Result<&'a mut [f64], Failure> {
    if n == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Failure::new(KuramotoStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts_mut(p, n))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure::new(KuramotoStatus::NullPointer, format!("{what} is null")))
}

fn out_ptr<T>(p: *mut T, what: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(Failure::new(KuramotoStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

/// Message of the last failed call on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn kuramoto_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

#[no_mangle]
pub extern "C" fn kuramoto_clear_error() {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn kuramoto_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// General parameters. `natural_freqs` may be NULL (all zero). `capacity` is
/// a row-major `n*n` symmetric matrix, or NULL for all-to-all weights `1/n`.
///
/// # Safety
/// Non-null array pointers must reference `n` (or `n*n`) readable doubles and
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn kuramoto_params_new(
    n: usize,
    masses: *const f64,
    frictions: *const f64,
    natural_freqs: *const f64,
    kappa: f64,
    capacity: *const f64,
    out: *mut *mut KuramotoParams,
) -> KuramotoStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let masses = input(masses, n, "masses")?.to_vec();
        let frictions = input(frictions, n, "frictions")?.to_vec();
        let nu = if natural_freqs.is_null() {
            vec![0.0; n]
        } else {
            input(natural_freqs, n, "natural_freqs")?.to_vec()
        };
        let cap = if capacity.is_null() {
            Capacity::all_to_all(n)
        } else {
            let len = n
                .checked_mul(n)
                .ok_or_else(|| Failure::new(KuramotoStatus::InvalidArgument, "n*n overflows"))?;
            Capacity::from_row_major(n, input(capacity, len, "capacity")?.to_vec())?
        };
        let inner = ModelParams::new(masses, frictions, nu, kappa, cap)?;
        *out = Box::into_raw(Box::new(KuramotoParams { inner }));
        Ok(())
    })
}

/// Identical masses and frictions, zero natural frequencies, weights `1/n`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn kuramoto_params_all_to_all(
    n: usize,
    mass: f64,
    friction: f64,
    kappa: f64,
    out: *mut *mut KuramotoParams,
) -> KuramotoStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let inner = ModelParams::all_to_all(n, mass, friction, kappa)?;
        *out = Box::into_raw(Box::new(KuramotoParams { inner }));
        Ok(())
    })
}

/// Number of oscillators, or 0 for NULL.
///
/// # Safety
/// `params` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn kuramoto_params_n(params: *const KuramotoParams) -> usize {
    params.as_ref().map_or(0, |p| p.inner.n())
}

/// # Safety
/// `params` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn kuramoto_params_free(params: *mut KuramotoParams) {
    if !params.is_null() {
        drop(Box::from_raw(params));
    }
}

/// New state from phases and frequencies. `omega` may be NULL (at rest).
///
/// # Safety
/// Non-null array pointers must reference `n` readable doubles and `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn kuramoto_state_new(
    n: usize,
    theta: *const f64,
    omega: *const f64,
    out: *mut *mut KuramotoState,
) -> KuramotoStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let theta = input(theta, n, "theta")?.to_vec();
        let omega = if omega.is_null() {
            vec![0.0; n]
        } else {
            input(omega, n, "omega")?.to_vec()
        };
        let inner = OscillatorEnsemble::new(theta, omega)?;
        *out = Box::into_raw(Box::new(KuramotoState { inner }));
        Ok(())
    })
}

/// # Safety
/// `state` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn kuramoto_state_n(state: *const KuramotoState) -> usize {
    state.as_ref().map_or(0, |s| s.inner.n())
}

/// Copy phases and frequencies out. Either output may be NULL to skip it.
///
/// # Safety
/// `state` must be a live handle; non-null outputs must hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn kuramoto_state_read(
    state: *const KuramotoState,
    theta_out: *mut f64,
    omega_out: *mut f64,
) -> KuramotoStatus {
    guard(|| {
        let s = &handle(state, "state")?.inner;
        copy_state(s, theta_out, omega_out)
    })
}

unsafe fn copy_state(s: &OscillatorEnsemble, theta_out: *mut f64, omega_out: *mut f64) -> Result<(), Failure> {
    if !theta_out.is_null() {
        output(theta_out, s.n(), "theta_out")?.copy_from_slice(s.theta());
    }
    if !omega_out.is_null() {
        output(omega_out, s.n(), "omega_out")?.copy_from_slice(s.omega());
    }
    Ok(())
}

/// # Safety
/// `state` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn kuramoto_state_free(state: *mut KuramotoState) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

/// Right-hand side of the first-order system: `dθ/dt` and `dω/dt`.
///
/// # Safety
/// Handles must be live; outputs must hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn kuramoto_rhs(
    params: *const KuramotoParams,
    state: *const KuramotoState,
    dtheta_out: *mut f64,
    domega_out: *mut f64,
) -> KuramotoStatus {
    guard(|| {
        let p = &handle(params, "params")?.inner;
        let s = &handle(state, "state")?.inner;
        let d = model::rhs(s, p)?;
        output(dtheta_out, d.dtheta.len(), "dtheta_out")?.copy_from_slice(&d.dtheta);
        output(domega_out, d.domega.len(), "domega_out")?.copy_from_slice(&d.domega);
        Ok(())
    })
}

/// Integrate from `state` to `t_final` with step `dt`, keeping every
/// `sample_every`-th state and the final one. `scheme` is a [`KuramotoScheme`].
///
/// # Safety
/// Handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn kuramoto_simulate(
    params: *const KuramotoParams,
    state: *const KuramotoState,
    dt: f64,
    t_final: f64,
    sample_every: usize,
    scheme: u32,
    out: *mut *mut KuramotoTrajectory,
) -> KuramotoStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let p = &handle(params, "params")?.inner;
        let s = &handle(state, "state")?.inner;
        let scheme = match scheme {
            0 => Scheme::Rk4,
            1 => Scheme::SemiImplicitEuler,
            other => {
                return Err(Failure::new(
                    KuramotoStatus::InvalidArgument,
                    format!("unknown scheme {other}"),
                ))
            }
        };
        let config = IntegratorConfig::new(dt, t_final, sample_every, scheme)?;
        let inner = simulate(s, p, &config)?;
        *out = Box::into_raw(Box::new(KuramotoTrajectory { inner }));
        Ok(())
    })
}

/// Number of stored samples, or 0 for NULL.
///
/// # Safety
/// `traj` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn kuramoto_trajectory_len(traj: *const KuramotoTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.inner.len())
}

/// Time and state of sample `index`. Any output may be NULL to skip it.
///
/// # Safety
/// `traj` must be a live handle; non-null array outputs must hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn kuramoto_trajectory_sample(
    traj: *const KuramotoTrajectory,
    index: usize,
    time_out: *mut f64,
    theta_out: *mut f64,
    omega_out: *mut f64,
) -> KuramotoStatus {
    guard(|| {
        let t = &handle(traj, "trajectory")?.inner;
        if index >= t.len() {
            return Err(Failure::new(
                KuramotoStatus::InvalidArgument,
                format!("sample {index} out of range (len {})", t.len()),
            ));
        }
        if !time_out.is_null() {
            *time_out = t.times()[index];
        }
        copy_state(&t.states()[index], theta_out, omega_out)
    })
}

/// # Safety
/// `traj` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn kuramoto_trajectory_free(traj: *mut KuramotoTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// Global order parameter `R e^{iφ}` of `n` phases.
///
/// # Safety
/// `theta` must reference `n` doubles; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn kuramoto_order_parameter(
    n: usize,
    theta: *const f64,
    r_out: *mut f64,
    phi_out: *mut f64,
) -> KuramotoStatus {
    guard(|| {
        out_ptr(r_out, "r_out")?;
        out_ptr(phi_out, "phi_out")?;
        let g = global_order(input(theta, n, "theta")?)?;
        *r_out = g.r_p;
        *phi_out = g.phi_p;
        Ok(())
    })
}

/// Kinetic energy `½Σmω²` and interaction energy `(κ/2)Σa(1−cos)`.
///
/// # Safety
/// Handles must be live; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn kuramoto_energies(
    params: *const KuramotoParams,
    state: *const KuramotoState,
    kinetic_out: *mut f64,
    potential_out: *mut f64,
) -> KuramotoStatus {
    guard(|| {
        out_ptr(kinetic_out, "kinetic_out")?;
        out_ptr(potential_out, "potential_out")?;
        let e = energies(&handle(state, "state")?.inner, &handle(params, "params")?.inner)?;
        *kinetic_out = e.e_k;
        *potential_out = e.e_p;
        Ok(())
    })
}

/// Wasserstein-2 distance between the empirical measures of two states.
///
/// Exact when both have the same size up to the exact-solver cap, otherwise
/// the sliced estimate with `seed`. `exact_out` (may be NULL) receives 1 for
/// exact and 0 for sliced; `mc_error_out` (may be NULL) the Monte Carlo error.
///
/// # Safety
/// Handles must be live; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn kuramoto_w2(
    a: *const KuramotoState,
    b: *const KuramotoState,
    seed: u64,
    value_out: *mut f64,
    exact_out: *mut i32,
    mc_error_out: *mut f64,
) -> KuramotoStatus {
    guard(|| {
        out_ptr(value_out, "value_out")?;
        let mu = EmpiricalMeasure::from_state(&handle(a, "a")?.inner)?;
        let nu = EmpiricalMeasure::from_state(&handle(b, "b")?.inner)?;
        let opts = W2Options {
            seed,
            ..W2Options::default()
        };
        let est = wasserstein2_auto(&mu, &nu, &opts)?;
        *value_out = est.value;
        if !exact_out.is_null() {
            *exact_out = i32::from(est.method == W2Method::Exact);
        }
        if !mc_error_out.is_null() {
            *mc_error_out = est.mc_error;
        }
        Ok(())
    })
}
