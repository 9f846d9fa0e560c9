use std::ffi::{CStr, CString};
use std::ptr;

use galbrun_ffi::*;

const SLAB: &str = r#"
[problem]
omega = 1.0
[fields]
rho = 1.0
c = 1.0
gamma = 0.2
p = 1.0
phi = 0.0
b = ["0.3*sin(pi*x)"]
divrhob = "0.3*pi*cos(pi*x)"
[fields.bounds]
rho = [1.0, 1.0]
c = [1.0, 1.0]
gamma = [0.2, 0.2]
[domain]
kind = "interval"
x = [-1.0, 1.0]
cells = [16]
[source]
f = ["1 + x"]
"#;

fn problem(text: &str) -> (GalbrunStatus, *mut GalbrunProblem) {
    let c = CString::new(text).unwrap();
    let mut p = ptr::null_mut();
    let st = unsafe { galbrun_problem_from_toml(c.as_ptr(), &mut p) };
    (st, p)
}

fn last_error() -> String {
    let m = galbrun_last_error();
    assert!(!m.is_null());
    let s = unsafe { CStr::from_ptr(m) }.to_str().unwrap().to_string();
    unsafe { galbrun_string_free(m) };
    s
}

#[test]
fn check_reports_theta_and_margin() {
    let (st, p) = problem(SLAB);
    assert_eq!(st, GalbrunStatus::Ok);
    let (mut theta, mut margin) = (f64::NAN, f64::NAN);
    assert_eq!(unsafe { galbrun_check(p, &mut theta, &mut margin) }, GalbrunStatus::Ok);
    assert_eq!(theta, 0.0);
    // sampled sup of |b| sits just below 0.3
    assert!(margin > 1.0 - 0.09 && margin < 1.0 - 0.089, "{margin}");
    unsafe { galbrun_problem_free(p) };
}

#[test]
fn solve_reports_required_length_then_fills_buffer() {
    let (_, p) = problem(SLAB);
    let mut n = 0usize;
    assert_eq!(unsafe { galbrun_problem_ndofs(p, 0, &mut n) }, GalbrunStatus::Ok);
    let (mut len, mut res) = (0usize, f64::NAN);
    let st = unsafe { galbrun_solve(p, GalbrunModel::Cowling, 0, ptr::null_mut(), 0, &mut len, &mut res) };
    assert_eq!(st, GalbrunStatus::BufferTooSmall);
    assert_eq!(len, 2 * n);
    assert!(last_error().contains("need"));

    let mut cow = vec![0.0; len];
    let st = unsafe { galbrun_solve(p, GalbrunModel::Cowling, 0, cow.as_mut_ptr(), len, &mut len, &mut res) };
    assert_eq!(st, GalbrunStatus::Ok);
    assert!(res <= 1e-9);
    assert!(cow.iter().any(|&v| v != 0.0));

    let mut a = vec![0.0; len];
    let mut b = vec![0.0; len];
    unsafe {
        assert_eq!(galbrun_solve(p, GalbrunModel::FullDirect, 0, a.as_mut_ptr(), len, &mut len, &mut res), GalbrunStatus::Ok);
        assert_eq!(galbrun_solve(p, GalbrunModel::FullSchur, 0, b.as_mut_ptr(), len, &mut len, &mut res), GalbrunStatus::Ok);
        galbrun_problem_free(p);
    }
    let diff: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let norm: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    assert!(diff <= 1e-8 * norm);
}

#[test]
fn invalid_configs_map_to_validation() {
    let (st, p) = problem("[problem]\nomega = 1.0\n");
    assert_eq!(st, GalbrunStatus::Validation);
    assert!(p.is_null());
    assert!(last_error().starts_with("Config"));

    let (st, _) = problem(&SLAB.replace("0.3*pi*cos(pi*x)", "0.0"));
    assert_eq!(st, GalbrunStatus::Validation);
    assert!(last_error().contains("InconsistentDerivative"));
}

#[test]
fn zero_frequency_is_rejected_before_factorization() {
    let (st, p) = problem(&SLAB.replace("omega = 1.0", "omega = 0.0"));
    assert_eq!(st, GalbrunStatus::Ok);
    let (mut len, mut res) = (0usize, 0.0);
    let st = unsafe { galbrun_solve(p, GalbrunModel::Cowling, 0, ptr::null_mut(), 0, &mut len, &mut res) };
    // omega = 0 is rejected before factorization
    assert_eq!(st, GalbrunStatus::Validation);
    unsafe { galbrun_problem_free(p) };
}

#[test]
fn header_declares_the_api() {
    let h = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/galbrun.h")).unwrap();
    for name in [
        "GalbrunProblem",
        "galbrun_problem_from_toml",
        "galbrun_problem_free",
        "galbrun_check",
        "galbrun_sector_angle",
        "galbrun_solve",
        "galbrun_last_error",
        "galbrun_string_free",
        "GALBRUN_STATUS_BUFFER_TOO_SMALL",
    ] {
        assert!(h.contains(name), "{name} missing from header");
    }
}
