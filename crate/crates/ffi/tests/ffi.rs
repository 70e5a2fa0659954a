use std::ffi::CStr;
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use cavity_eigen_ffi::*;

fn last_error() -> String {
    let p = ce_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn analytic_entry_points() {
    let mut a = 0.0;
    assert_eq!(unsafe { ce_a_star(4.0, 3.0, &mut a) }, CeStatus::Ok);
    assert_eq!(a, 3.0);
    assert_eq!(unsafe { ce_a_star(1.0, 1.0, &mut a) }, CeStatus::InvalidArgument);
    assert!(last_error().contains("below spectral edge"));

    let (mut lambda, mut mode) = (0.0, CeMode::Critical);
    assert_eq!(unsafe { ce_single_degree_eigenvalue(4, 1.0, 0.9, &mut lambda, &mut mode) }, CeStatus::Ok);
    assert!((lambda - 3.8111).abs() < 1e-4);
    assert_eq!(mode, CeMode::Ferromagnetic);
    assert_eq!(unsafe { ce_dense_limit_eigenvalue(0.5, 1.0, &mut lambda, &mut mode) }, CeStatus::Ok);
    assert_eq!((lambda, mode), (2.0, CeMode::Paramagnetic));
}

#[test]
fn null_pointers_are_reported() {
    assert_eq!(unsafe { ce_a_star(4.0, 3.0, ptr::null_mut()) }, CeStatus::NullPointer);
    let mut lambda = 0.0;
    assert_eq!(unsafe { ce_cavity_eigenvalue(ptr::null(), 0.0, &mut lambda) }, CeStatus::NullPointer);
    assert_eq!(unsafe { ce_instance_n(ptr::null()) }, 0);
    unsafe {
        ce_instance_free(ptr::null_mut());
        ce_ensemble_free(ptr::null_mut());
    }
}

#[test]
fn instance_round_trip_and_solvers() {
    let rows = [0usize, 0, 0, 0];
    let cols = [1usize, 2, 3, 4];
    let weights = [1.0; 4];
    let mut g = ptr::null_mut();
    let status = unsafe { ce_instance_from_edges(5, rows.as_ptr(), cols.as_ptr(), weights.as_ptr(), 4, &mut g) };
    assert_eq!(status, CeStatus::Ok);
    assert_eq!(unsafe { (ce_instance_n(g), ce_instance_edge_count(g)) }, (5, 4));

    let (mut lambda, mut m) = (0.0, 0.0);
    let mut v = [0.0; 5];
    let status = unsafe { ce_power_iterate(g, 1e-12, 3, &mut lambda, &mut m, v.as_mut_ptr(), 5) };
    assert_eq!(status, CeStatus::Ok);
    assert!((lambda - 2.0).abs() < 1e-10);
    assert!((v[0] / v[1] - 2.0).abs() < 1e-8);
    let status = unsafe { ce_power_iterate(g, 0.0, 3, &mut lambda, &mut m, v.as_mut_ptr(), 4) };
    assert_eq!(status, CeStatus::InvalidArgument);

    assert_eq!(unsafe { ce_cavity_eigenvalue(g, 1e-12, &mut lambda) }, CeStatus::Ok);
    assert!((lambda - 2.0).abs() < 1e-10);

    let dir = tempfile_dir();
    let path = dir.join("star.txt");
    let c_path = std::ffi::CString::new(path.to_str().unwrap()).unwrap();
    assert_eq!(unsafe { ce_instance_write_edge_list(g, c_path.as_ptr()) }, CeStatus::Ok);
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("n=5 edges=4"));
    unsafe { ce_instance_free(g) };

    let bad = unsafe { ce_instance_from_edges(2, [0usize].as_ptr(), [0usize].as_ptr(), [1.0].as_ptr(), 1, &mut g) };
    assert_eq!(bad, CeStatus::InvalidArgument);
}

fn tempfile_dir() -> PathBuf {
    let dir = std::env::temp_dir().join(format!("cavity-eigen-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn ensemble_generation_and_population() {
    let mass = [0.0, 0.0, 0.0, 0.0, 1.0];
    let mut e = ptr::null_mut();
    assert_eq!(unsafe { ce_ensemble_new_binary(mass.as_ptr(), 5, 0.9, 1.0, &mut e) }, CeStatus::Ok);
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { ce_instance_generate(e, 100, 1, &mut g) }, CeStatus::Ok);
    assert_eq!(unsafe { ce_instance_edge_count(g) }, 200);
    unsafe { ce_instance_free(g) };
    assert_eq!(unsafe { ce_instance_generate(e, 3, 1, &mut g) }, CeStatus::GenerationFailed);

    let mut delta = 0.0;
    let status = unsafe { ce_mixture_delta_of_lambda(e, 2.7 + 1.0 / 0.9, 1000, 200, 1, &mut delta) };
    assert_eq!(status, CeStatus::Ok);
    assert!((delta - 0.9).abs() < 1e-6);

    let (mut lambda, mut mode) = (0.0, CeMode::Critical);
    let status = unsafe { ce_detect_eigenvalue(e, 20_000, 1e-2, 5, &mut lambda, &mut mode) };
    assert_eq!(status, CeStatus::Ok);
    assert!((lambda - 3.8111).abs() < 0.02, "{lambda}");
    assert_eq!(mode, CeMode::Ferromagnetic);
    unsafe { ce_ensemble_free(e) };

    let bad_mass = [0.5, 0.6];
    assert_eq!(unsafe { ce_ensemble_new_gaussian(bad_mass.as_ptr(), 2, 0.0, 1.0, &mut e) }, CeStatus::InvalidArgument);
}

/// Compiles a C program against the generated header and the static library.
#[test]
fn c_program_links_against_the_header() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let profile_dir = std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf();
    let lib = profile_dir.join("libcavity_eigen_ffi.a");
    assert!(lib.exists(), "static library missing at {}", lib.display());
    let exe = tempfile_dir().join("smoke");
    let status = Command::new("cc")
        .arg(manifest.join("tests/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .expect("C compiler");
    assert!(status.success());
    let output = Command::new(&exe).output().unwrap();
    assert!(output.status.success(), "exit {:?}", output.status.code());
    assert_eq!(String::from_utf8_lossy(&output.stdout).trim(), "ok");
}
