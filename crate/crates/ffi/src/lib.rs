//! C ABI for `purity_sieve`.
//!
//! Every fallible function returns a [`PsStatus`]; on failure a message is
//! available from [`ps_last_error_message`] on the same thread. Handles are
//! opaque and must be released with their `_free` function. Qubit states are
//! passed as four doubles `[re0, im0, re1, im1]`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use purity_sieve::dynamics::{CentralSpin, Evolver, FactorizedModel};
use purity_sieve::oscillator::{self, GaussianState, QbmParams, QbmSieveConfig};
use purity_sieve::qcore::{ComplexVector, DensityMatrix, Ket, C64};
use purity_sieve::sieve::{self, MIN_STEPS};
use purity_sieve::Error;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidState = 3,
    DimensionMismatch = 4,
    UnsupportedModel = 5,
    NumericalFailure = 6,
    Panic = 7,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> PsStatus {
    match e {
        Error::DimensionMismatch { .. } | Error::NotSquare { .. } => PsStatus::DimensionMismatch,
        Error::InvalidArgument { .. } | Error::InvalidLayout(_) | Error::SlotOutOfRange { .. } => {
            PsStatus::InvalidArgument
        }
        Error::NotHermitian { .. } | Error::InvalidState(_) => PsStatus::InvalidState,
        Error::UnsupportedModel(_) => PsStatus::UnsupportedModel,
        Error::QuadratureNotConverged { .. } => PsStatus::NumericalFailure,
    }
}

enum Failure {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            PsStatus::Ok
        }
        Ok(Err(Failure::Null(name))) => {
            set_error(format!("null pointer passed for `{name}`"));
            PsStatus::NullPointer
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            PsStatus::Panic
        }
    }
}

unsafe fn non_null<'a, T>(p: *const T, name: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(name))
}

unsafe fn out<'a, T>(p: *mut T, name: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(name))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, name: &'static str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, name: &'static str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn qubit(p: *const f64) -> Result<Ket, Failure> {
    let a = slice(p, 4, "psi")?;
    let amps = ComplexVector::from_column_slice(&[C64::new(a[0], a[1]), C64::new(a[2], a[3])]);
    Ok(Ket::normalized(amps)?)
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length without the NUL,
/// or 0 when there is no error.
///
/// # Safety
/// `buf` must be valid for `len` bytes or null.
#[no_mangle]
pub unsafe extern "C" fn ps_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else {
            if !buf.is_null() && len > 0 {
                *buf = 0;
            }
            return 0;
        };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ps_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Central-spin model with a maximally mixed bath.
pub struct PsCentralSpin {
    model: FactorizedModel,
    rho_e: DensityMatrix,
}

/// Builds the model `(ω/2)σz + Σ(ω/2)σz^i + ε σx Σσx^i`.
///
/// # Safety
/// `out_handle` must be a valid pointer; on success it receives a handle to be
/// released with [`ps_central_spin_free`].
#[no_mangle]
pub unsafe extern "C" fn ps_central_spin_new(
    bath_spins: usize,
    omega: f64,
    epsilon: f64,
    out_handle: *mut *mut PsCentralSpin,
) -> PsStatus {
    guard(|| {
        let slot = out(out_handle, "out_handle")?;
        if bath_spins > 12 {
            return Err(Error::InvalidArgument {
                name: "bath_spins",
                reason: "at most 12 bath spins are supported".into(),
            }
            .into());
        }
        let model = CentralSpin::new(bath_spins, omega, epsilon).build()?;
        let rho_e = DensityMatrix::maximally_mixed(model.environment_dim())?;
        *slot = Box::into_raw(Box::new(PsCentralSpin { model, rho_e }));
        Ok(())
    })
}

/// # Safety
/// `handle` must come from [`ps_central_spin_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ps_central_spin_free(handle: *mut PsCentralSpin) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Reduced-state purity and largest Schmidt probability at each time.
/// `times` must start at 0 and be ascending.
///
/// # Safety
/// `psi` points to 4 doubles; `times`, `out_purity` and `out_pmax` to
/// `n_times` doubles each.
#[no_mangle]
pub unsafe extern "C" fn ps_central_spin_purity_series(
    handle: *const PsCentralSpin,
    psi: *const f64,
    times: *const f64,
    n_times: usize,
    out_purity: *mut f64,
    out_pmax: *mut f64,
) -> PsStatus {
    guard(|| {
        let h = non_null(handle, "handle")?;
        let psi = qubit(psi)?;
        let times = slice(times, n_times, "times")?;
        let series = purity_sieve::dynamics::purity_series(&h.model, &psi, &h.rho_e, times)?;
        slice_mut(out_purity, n_times, "out_purity")?.copy_from_slice(&series.values);
        slice_mut(out_pmax, n_times, "out_pmax")?.copy_from_slice(&series.pmax);
        Ok(())
    })
}

/// Reduced-state purity at a single time, including negative times.
///
/// # Safety
/// `psi` points to 4 doubles and `out_purity` is valid.
#[no_mangle]
pub unsafe extern "C" fn ps_central_spin_purity_at(
    handle: *const PsCentralSpin,
    psi: *const f64,
    t: f64,
    out_purity: *mut f64,
) -> PsStatus {
    guard(|| {
        let h = non_null(handle, "handle")?;
        let psi = qubit(psi)?;
        let slot = out(out_purity, "out_purity")?;
        let evolver = Evolver::new(&h.model)?;
        *slot = purity_sieve::qcore::purity(&evolver.trajectory(&psi, &h.rho_e)?.reduced_system(t));
        Ok(())
    })
}

/// `c = 4 δE² δS²`, the curvature of purity at `t = 0` is `−c`.
///
/// # Safety
/// `psi` points to 4 doubles and `out_c` is valid.
#[no_mangle]
pub unsafe extern "C" fn ps_short_time_coefficient(
    handle: *const PsCentralSpin,
    psi: *const f64,
    out_c: *mut f64,
) -> PsStatus {
    guard(|| {
        let h = non_null(handle, "handle")?;
        let psi = qubit(psi)?;
        *out(out_c, "out_c")? = sieve::short_time_coefficient(&h.model, &psi, &h.rho_e)?;
        Ok(())
    })
}

/// Time integral of the interaction dispersion under the mean-field
/// Hamiltonian over `[0, t_final]`.
///
/// # Safety
/// `psi` points to 4 doubles and `out_value` is valid.
#[no_mangle]
pub unsafe extern "C" fn ps_dispersion_integral(
    handle: *const PsCentralSpin,
    psi: *const f64,
    t_final: f64,
    out_value: *mut f64,
) -> PsStatus {
    guard(|| {
        let h = non_null(handle, "handle")?;
        let psi = qubit(psi)?;
        *out(out_value, "out_value")? = sieve::dispersion_integral(&h.model, &psi, &h.rho_e, t_final, MIN_STEPS)?;
        Ok(())
    })
}

/// Particle–bath parameters for the oscillator functions.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PsQbmParams {
    pub mass: f64,
    pub bath_mass: f64,
    pub bath_size: usize,
    pub trap_frequency: f64,
    pub bath_frequency: f64,
}

/// Gaussian moments.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct PsGaussian {
    pub x_mean: f64,
    pub p_mean: f64,
    pub dx2: f64,
    pub dp2: f64,
    pub sxp: f64,
}

impl From<GaussianState> for PsGaussian {
    fn from(g: GaussianState) -> Self {
        Self { x_mean: g.x_mean, p_mean: g.p_mean, dx2: g.dx2, dp2: g.dp2, sxp: g.sxp }
    }
}

/// Period integrals of `δp²`, `δx²` and the x–p covariance.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct PsPeriodIntegrals {
    pub ip: f64,
    pub ix: f64,
    pub ixp: f64,
}

/// # Safety
/// `params` and `out_omega` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ps_omega_tilde(params: *const PsQbmParams, out_omega: *mut f64) -> PsStatus {
    guard(|| {
        let p = non_null(params, "params")?;
        let q = QbmParams::new(p.mass, p.bath_mass, p.bath_size, p.trap_frequency, p.bath_frequency)?;
        *out(out_omega, "out_omega")? = oscillator::omega_tilde(&q);
        Ok(())
    })
}

/// Minimum-uncertainty state with `dx2 = 1/(2 M Ω̃)`.
///
/// # Safety
/// `out_state` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ps_qbm_pointer_state(mass: f64, omega_tilde: f64, out_state: *mut PsGaussian) -> PsStatus {
    guard(|| {
        let slot = out(out_state, "out_state")?;
        *slot = oscillator::qbm_pointer_state(mass, omega_tilde)?.into();
        Ok(())
    })
}

/// # Safety
/// `state` and `out_integrals` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ps_period_integrals(
    state: *const PsGaussian,
    mass: f64,
    omega_tilde: f64,
    out_integrals: *mut PsPeriodIntegrals,
) -> PsStatus {
    guard(|| {
        let s = non_null(state, "state")?;
        let g = GaussianState::new(s.x_mean, s.p_mean, s.dx2, s.dp2, s.sxp)?;
        if !(mass > 0.0 && omega_tilde > 0.0 && mass.is_finite() && omega_tilde.is_finite()) {
            return Err(Error::InvalidArgument {
                name: "mass/omega_tilde",
                reason: "must be positive and finite".into(),
            }
            .into());
        }
        let i = oscillator::period_integrals(&g, mass, omega_tilde);
        *out(out_integrals, "out_integrals")? = PsPeriodIntegrals { ip: i.ip, ix: i.ix, ixp: i.ixp };
        Ok(())
    })
}

/// Minimizes `a·Ip + b·Ix` over Gaussian states.
///
/// # Safety
/// `out_state` and `out_objective` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ps_qbm_sieve(
    mass: f64,
    omega_tilde: f64,
    weight_p: f64,
    weight_x: f64,
    restarts: usize,
    seed: u64,
    out_state: *mut PsGaussian,
    out_objective: *mut f64,
) -> PsStatus {
    guard(|| {
        let cfg = QbmSieveConfig { restarts, seed, ..QbmSieveConfig::default() };
        let r = oscillator::qbm_sieve(mass, omega_tilde, (weight_p, weight_x), &cfg)?;
        *out(out_state, "out_state")? = r.state.into();
        *out(out_objective, "out_objective")? = r.objective;
        Ok(())
    })
}
