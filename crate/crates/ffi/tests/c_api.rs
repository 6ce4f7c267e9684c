use std::ffi::CStr;
use std::process::Command;
use std::ptr;

use rodflow_ffi::*;

fn model(k1: f64, k2: f64, k3: f64) -> *mut RodflowModel {
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { rodflow_model_new(k1, k2, k3, &mut m) }, RodflowStatus::Ok);
    m
}

fn last_error() -> String {
    let p = rodflow_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

const STATE9: [f64; 9] = [0.3, -0.2, 0.5, 0.1, 0.4, -0.3, 0.2, 0.6, 1.1];

#[test]
fn state_dims() {
    assert_eq!(rodflow_state_dim(0), 3);
    assert_eq!(rodflow_state_dim(3), 12);
    assert_eq!(rodflow_state_dim(4), 0);
}

#[test]
fn bad_stiffness_rejected_with_message() {
    let mut m = ptr::null_mut();
    let st = unsafe { rodflow_model_new(1.0, -1.0, 1.0, &mut m) };
    assert_eq!(st, RodflowStatus::InvalidArgument);
    assert!(m.is_null());
    assert!(!last_error().is_empty());
}

#[test]
fn null_pointers_reported() {
    let st = unsafe { rodflow_model_new(1.0, 1.0, 1.0, ptr::null_mut()) };
    assert_eq!(st, RodflowStatus::NullPointer);
    assert!(last_error().contains("out"));
    let mut h = 0.0;
    let st = unsafe { rodflow_hamiltonian(ptr::null(), 2, STATE9.as_ptr(), 9, &mut h) };
    assert_eq!(st, RodflowStatus::NullPointer);
}

#[test]
fn success_clears_error() {
    let m = model(1.0, 1.0, 0.75);
    unsafe { rodflow_model_new(0.0, 1.0, 1.0, &mut ptr::null_mut()) };
    assert!(!rodflow_last_error().is_null());
    let mut h = 0.0;
    assert_eq!(unsafe { rodflow_hamiltonian(m, 2, STATE9.as_ptr(), 9, &mut h) }, RodflowStatus::Ok);
    assert!(rodflow_last_error().is_null());
    unsafe { rodflow_model_free(m) };
}

#[test]
fn rhs_and_hamiltonian_match_library() {
    let m = model(1.0, 1.3, 0.7);
    let params = rodflow::RodParams::new(1.0, 1.3, 0.7).unwrap();
    let state = rodflow::FieldState::from_slice(rodflow::HierarchyLevel::Magnetic, &STATE9).unwrap();
    let mut out = [0.0; 9];
    assert_eq!(unsafe { rodflow_rhs(m, 2, STATE9.as_ptr(), 9, out.as_mut_ptr(), 9) }, RodflowStatus::Ok);
    assert_eq!(out.to_vec(), rodflow::model::rhs(&state, &params).as_vec());
    let mut h = 0.0;
    assert_eq!(unsafe { rodflow_hamiltonian(m, 2, STATE9.as_ptr(), 9, &mut h) }, RodflowStatus::Ok);
    assert_eq!(h, rodflow::model::hamiltonian(&state, &params));
    unsafe { rodflow_model_free(m) };
}

#[test]
fn wrong_length_and_small_buffer() {
    let m = model(1.0, 1.0, 1.0);
    let mut out = [0.0; 9];
    let st = unsafe { rodflow_rhs(m, 2, STATE9.as_ptr(), 8, out.as_mut_ptr(), 9) };
    assert_eq!(st, RodflowStatus::InvalidArgument);
    let st = unsafe { rodflow_rhs(m, 2, STATE9.as_ptr(), 9, out.as_mut_ptr(), 5) };
    assert_eq!(st, RodflowStatus::BufferTooSmall);
    let st = unsafe { rodflow_rhs(m, 7, STATE9.as_ptr(), 9, out.as_mut_ptr(), 9) };
    assert_eq!(st, RodflowStatus::InvalidArgument);
    unsafe { rodflow_model_free(m) };
}

#[test]
fn casimirs_count() {
    let mut out = [0.0; 4];
    let mut n = 0usize;
    assert_eq!(unsafe { rodflow_casimirs(2, STATE9.as_ptr(), 9, out.as_mut_ptr(), 4, &mut n) }, RodflowStatus::Ok);
    assert_eq!(n, 3);
    let b = &STATE9[6..9];
    assert!((out[2] - b.iter().map(|x| x * x).sum::<f64>()).abs() < 1e-15);
}

#[test]
fn canonical_roundtrip() {
    let mut c = [0.0; 6];
    let mut cas = [0.0; 3];
    assert_eq!(unsafe { rodflow_to_canonical(STATE9.as_ptr(), c.as_mut_ptr(), cas.as_mut_ptr()) }, RodflowStatus::Ok);
    let mut back = [0.0; 9];
    assert_eq!(unsafe { rodflow_from_canonical(c.as_ptr(), cas.as_ptr(), back.as_mut_ptr()) }, RodflowStatus::Ok);
    for (a, b) in back.iter().zip(STATE9) {
        assert!((a - b).abs() < 1e-10, "{a} vs {b}");
    }
}

#[test]
fn aligned_state_is_numerical_error() {
    let aligned = [0.0, 0.0, 0.4, 0.0, 0.0, -0.8, 0.0, 0.0, 1.2];
    let mut c = [0.0; 6];
    let mut cas = [0.0; 3];
    let st = unsafe { rodflow_to_canonical(aligned.as_ptr(), c.as_mut_ptr(), cas.as_mut_ptr()) };
    assert_eq!(st, RodflowStatus::Numerical);
    assert!(last_error().contains("aligned"));
}

#[test]
fn simulate_and_query() {
    let m = model(1.0, 1.0, 0.75);
    let mut t = ptr::null_mut();
    let st = unsafe { rodflow_simulate(m, 2, STATE9.as_ptr(), 9, 0.0, 10.0, 1e-11, &mut t) };
    assert_eq!(st, RodflowStatus::Ok);
    unsafe {
        let n = rodflow_trajectory_len(t);
        assert!(n > 2);
        assert_eq!(rodflow_trajectory_dim(t), 9);
        let (mut s, mut y) = (0.0, [0.0; 9]);
        assert_eq!(rodflow_trajectory_snapshot(t, 0, &mut s, y.as_mut_ptr(), 9), RodflowStatus::Ok);
        assert_eq!((s, y), (0.0, STATE9));
        assert_eq!(rodflow_trajectory_snapshot(t, n - 1, &mut s, y.as_mut_ptr(), 9), RodflowStatus::Ok);
        assert_eq!(s, 10.0);
        assert_eq!(rodflow_trajectory_snapshot(t, n, &mut s, y.as_mut_ptr(), 9), RodflowStatus::InvalidArgument);
        assert_eq!(rodflow_trajectory_interpolate(t, 5.0, y.as_mut_ptr(), 9), RodflowStatus::Ok);
        assert_eq!(rodflow_trajectory_interpolate(t, 11.0, y.as_mut_ptr(), 9), RodflowStatus::InvalidArgument);
        let mut d = 1.0;
        assert_eq!(rodflow_trajectory_max_drift(t, &mut d), RodflowStatus::Ok);
        assert!(d < 1e-9, "{d}");
        rodflow_trajectory_free(t);
        rodflow_model_free(m);
    }
}

#[test]
fn bad_tolerance_rejected() {
    let m = model(1.0, 1.0, 0.75);
    let mut t = ptr::null_mut();
    let st = unsafe { rodflow_simulate(m, 2, STATE9.as_ptr(), 9, 0.0, 1.0, 0.5, &mut t) };
    assert_eq!(st, RodflowStatus::InvalidArgument);
    assert!(t.is_null());
    unsafe { rodflow_model_free(m) };
}

#[test]
fn null_handles_are_harmless() {
    unsafe {
        rodflow_model_free(ptr::null_mut());
        rodflow_trajectory_free(ptr::null_mut());
        assert_eq!(rodflow_trajectory_len(ptr::null()), 0);
    }
}

#[test]
fn header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/rodflow.h");
    let src = std::env::temp_dir().join(format!("rodflow_header_{}.c", std::process::id()));
    std::fs::write(&src, format!("#include \"{header}\"\nint main(void) {{ return rodflow_state_dim(2) == 9 ? 0 : 1; }}\n")).unwrap();
    let out = match Command::new("cc").args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only"]).arg(&src).output() {
        Ok(o) => o,
        Err(_) => {
            eprintln!("no C compiler, skipped");
            return;
        }
    };
    let _ = std::fs::remove_file(&src);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
