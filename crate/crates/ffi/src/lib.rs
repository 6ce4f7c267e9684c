//! C interface to `rodflow`.
//!
//! Every fallible function returns a [`RodflowStatus`]. On failure the message
//! can be fetched with [`rodflow_last_error`] from the same thread. Handles are
//! opaque and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use rodflow::integrator::{simulate, IntegratorOptions, RodTrajectory};
use rodflow::model;
use rodflow::reduction::{self, CanonicalState, CasimirTriple};
use rodflow::{FieldState, HierarchyLevel, RodError, RodParams};

/// Result of a call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RodflowStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    BufferTooSmall = 3,
    Numerical = 4,
    Panic = 5,
}

/// Stiffness parameters of a rod.
pub struct RodflowModel {
    params: RodParams,
}

/// An integrated trajectory with its dense output.
pub struct RodflowTrajectory {
    inner: RodTrajectory,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn fail(status: RodflowStatus, msg: impl Into<String>) -> RodflowStatus {
    set_error(msg);
    status
}

fn from_rod(e: RodError) -> RodflowStatus {
    let status = if e.is_numerical() {
        RodflowStatus::Numerical
    } else {
        RodflowStatus::InvalidArgument
    };
    fail(status, e.to_string())
}

fn guard<F: FnOnce() -> RodflowStatus>(f: F) -> RodflowStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(RodflowStatus::Panic, "internal panic"),
    }
}

macro_rules! check_ptr {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            return fail(RodflowStatus::NullPointer, concat!("`", stringify!($p), "` is null"));
        })+
    };
}

fn level_of(level: u32) -> Result<HierarchyLevel, RodflowStatus> {
    HierarchyLevel::from_index(level as usize)
        .ok_or_else(|| fail(RodflowStatus::InvalidArgument, format!("level {level} outside 0..=3")))
}

unsafe fn read_state(level: u32, state: *const f64, len: usize) -> Result<FieldState, RodflowStatus> {
    let level = level_of(level)?;
    if state.is_null() {
        return Err(fail(RodflowStatus::NullPointer, "`state` is null"));
    }
    let data = slice::from_raw_parts(state, len);
    let s = FieldState::from_slice(level, data).map_err(from_rod)?;
    if !s.is_finite() {
        return Err(fail(RodflowStatus::InvalidArgument, "non-finite state component"));
    }
    Ok(s)
}

unsafe fn write_out(values: &[f64], out: *mut f64, out_len: usize) -> RodflowStatus {
    if out_len < values.len() {
        return fail(
            RodflowStatus::BufferTooSmall,
            format!("output needs {} slots, got {out_len}", values.len()),
        );
    }
    ptr::copy_nonoverlapping(values.as_ptr(), out, values.len());
    RodflowStatus::Ok
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next call into the library from this thread.
#[no_mangle]
pub extern "C" fn rodflow_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Number of state components at `level` (3, 6, 9 or 12), or 0 for an unknown level.
#[no_mangle]
pub extern "C" fn rodflow_state_dim(level: u32) -> usize {
    HierarchyLevel::from_index(level as usize).map_or(0, |l| l.dim())
}

/// Creates a model with stiffnesses `k1`, `k2`, `k3`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn rodflow_model_new(k1: f64, k2: f64, k3: f64, out: *mut *mut RodflowModel) -> RodflowStatus {
    guard(|| {
        check_ptr!(out);
        match RodParams::new(k1, k2, k3) {
            Ok(params) => {
                *out = Box::into_raw(Box::new(RodflowModel { params }));
                RodflowStatus::Ok
            }
            Err(e) => from_rod(e),
        }
    })
}

/// # Safety
/// `model` must come from [`rodflow_model_new`] and not be freed twice. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn rodflow_model_free(model: *mut RodflowModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Right-hand side of the hierarchy equations at `state`.
///
/// # Safety
/// `state` must point to `len` doubles and `out` to `out_len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn rodflow_rhs(
    model: *const RodflowModel,
    level: u32,
    state: *const f64,
    len: usize,
    out: *mut f64,
    out_len: usize,
) -> RodflowStatus {
    guard(|| {
        check_ptr!(model, out);
        let s = match read_state(level, state, len) {
            Ok(s) => s,
            Err(st) => return st,
        };
        write_out(&model::rhs(&s, &(*model).params).as_vec(), out, out_len)
    })
}

/// Hamiltonian at `state`.
///
/// # Safety
/// `state` must point to `len` doubles and `out` to one writable double.
#[no_mangle]
pub unsafe extern "C" fn rodflow_hamiltonian(
    model: *const RodflowModel,
    level: u32,
    state: *const f64,
    len: usize,
    out: *mut f64,
) -> RodflowStatus {
    guard(|| {
        check_ptr!(model, out);
        match read_state(level, state, len) {
            Ok(s) => {
                *out = model::hamiltonian(&s, &(*model).params);
                RodflowStatus::Ok
            }
            Err(st) => st,
        }
    })
}

/// Casimirs at `state`; there are `level + 1` of them.
///
/// # Safety
/// `state` must point to `len` doubles, `out` to `out_len` writable doubles
/// and `written`, if not null, to one writable `size_t`.
#[no_mangle]
pub unsafe extern "C" fn rodflow_casimirs(
    level: u32,
    state: *const f64,
    len: usize,
    out: *mut f64,
    out_len: usize,
    written: *mut usize,
) -> RodflowStatus {
    guard(|| {
        check_ptr!(out);
        let s = match read_state(level, state, len) {
            Ok(s) => s,
            Err(st) => return st,
        };
        let c = model::casimirs(&s);
        let st = write_out(&c, out, out_len);
        if st == RodflowStatus::Ok && !written.is_null() {
            *written = c.len();
        }
        st
    })
}

/// Level-2 body state (9 doubles) to canonical coordinates
/// `(theta, psi, phi, p_theta, p_psi, p_phi)` and Casimirs `(C1, C2, C3)`.
///
/// # Safety
/// `state` must point to 9 doubles, `canonical` to 6 and `casimirs` to 3 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn rodflow_to_canonical(state: *const f64, canonical: *mut f64, casimirs: *mut f64) -> RodflowStatus {
    guard(|| {
        check_ptr!(canonical, casimirs);
        let s = match read_state(2, state, 9) {
            Ok(s) => s,
            Err(st) => return st,
        };
        match reduction::to_canonical(&s) {
            Ok((c, cas)) => {
                ptr::copy_nonoverlapping(c.to_array().as_ptr(), canonical, 6);
                ptr::copy_nonoverlapping([cas.c1, cas.c2, cas.c3].as_ptr(), casimirs, 3);
                RodflowStatus::Ok
            }
            Err(e) => from_rod(e),
        }
    })
}

/// Inverse of [`rodflow_to_canonical`].
///
/// # Safety
/// `canonical` must point to 6 doubles, `casimirs` to 3 and `state` to 9 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn rodflow_from_canonical(canonical: *const f64, casimirs: *const f64, state: *mut f64) -> RodflowStatus {
    guard(|| {
        check_ptr!(canonical, casimirs, state);
        let c = CanonicalState::from_array(slice::from_raw_parts(canonical, 6));
        let k = slice::from_raw_parts(casimirs, 3);
        let cas = match CasimirTriple::new(k[0], k[1], k[2]) {
            Ok(c) => c,
            Err(e) => return from_rod(e),
        };
        match reduction::from_canonical(&c, &cas) {
            Ok(s) => write_out(&s.as_vec(), state, 9),
            Err(e) => from_rod(e),
        }
    })
}

/// Integrates from `state` over `[s0, s1]` with tolerance `tol`.
///
/// # Safety
/// `state` must point to `len` doubles and `out` to storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn rodflow_simulate(
    model: *const RodflowModel,
    level: u32,
    state: *const f64,
    len: usize,
    s0: f64,
    s1: f64,
    tol: f64,
    out: *mut *mut RodflowTrajectory,
) -> RodflowStatus {
    guard(|| {
        check_ptr!(model, out);
        let s = match read_state(level, state, len) {
            Ok(s) => s,
            Err(st) => return st,
        };
        match simulate(&s, &(*model).params, (s0, s1), &IntegratorOptions::with_tol(tol)) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(RodflowTrajectory { inner }));
                RodflowStatus::Ok
            }
            Err(e) => from_rod(e),
        }
    })
}

/// # Safety
/// `traj` must come from [`rodflow_simulate`] and not be freed twice. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn rodflow_trajectory_free(traj: *mut RodflowTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// Number of accepted snapshots including the initial one, or 0 for null.
///
/// # Safety
/// `traj` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rodflow_trajectory_len(traj: *const RodflowTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.inner.trajectory.len())
}

/// State dimension of the trajectory, or 0 for null.
///
/// # Safety
/// `traj` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rodflow_trajectory_dim(traj: *const RodflowTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.inner.trajectory.dim())
}

/// Arclength and state of snapshot `index`.
///
/// # Safety
/// `traj` must be a live handle, `s` one writable double and `out` `out_len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn rodflow_trajectory_snapshot(
    traj: *const RodflowTrajectory,
    index: usize,
    s: *mut f64,
    out: *mut f64,
    out_len: usize,
) -> RodflowStatus {
    guard(|| {
        check_ptr!(traj, s, out);
        let t = &(*traj).inner.trajectory;
        if index >= t.len() {
            return fail(RodflowStatus::InvalidArgument, format!("index {index} past {} snapshots", t.len()));
        }
        *s = t.grid()[index];
        write_out(&t.states()[index], out, out_len)
    })
}

/// State at arclength `s` from the dense output.
///
/// # Safety
/// `traj` must be a live handle and `out` point to `out_len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn rodflow_trajectory_interpolate(
    traj: *const RodflowTrajectory,
    s: f64,
    out: *mut f64,
    out_len: usize,
) -> RodflowStatus {
    guard(|| {
        check_ptr!(traj, out);
        match (*traj).inner.trajectory.interpolate(s) {
            Some(y) => write_out(&y, out, out_len),
            None => fail(RodflowStatus::InvalidArgument, format!("s = {s} outside the integrated span")),
        }
    })
}

/// Largest relative drift of the Hamiltonian, Casimirs and integrals.
///
/// # Safety
/// `traj` must be a live handle and `out` one writable double.
#[no_mangle]
pub unsafe extern "C" fn rodflow_trajectory_max_drift(traj: *const RodflowTrajectory, out: *mut f64) -> RodflowStatus {
    guard(|| {
        check_ptr!(traj, out);
        *out = (*traj).inner.drift().max();
        RodflowStatus::Ok
    })
}
