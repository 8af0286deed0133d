use std::ffi::{CStr, CString};
use std::ptr;

use hybrid_lu_ffi::*;

/// CSR of the nonsymmetric tridiagonal matrix with diagonal 4 and
/// off-diagonals -1 and -2.
fn tridiagonal(n: usize) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
    let (mut ptr, mut idx, mut val) = (vec![0], Vec::new(), Vec::new());
    for i in 0..n {
        if i > 0 {
            idx.push(i - 1);
            val.push(-1.0);
        }
        idx.push(i);
        val.push(4.0);
        if i + 1 < n {
            idx.push(i + 1);
            val.push(-2.0);
        }
        ptr.push(idx.len());
    }
    (ptr, idx, val)
}

fn last_error() -> String {
    let p = hlu_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn create_solve_refactorize_free() {
    let n = 50;
    let (ptr, idx, val) = tridiagonal(n);
    let mut s = ptr::null_mut();
    unsafe {
        assert_eq!(hlu_solver_create(n, ptr.as_ptr(), idx.as_ptr(), val.as_ptr(), 2, &mut s), HluStatus::Ok);
        assert_eq!(hlu_solver_n(s), n);
        assert_eq!(hlu_solver_nnz(s), val.len());
        assert_eq!(hlu_solver_perturbation_count(s), 0);

        // b = A * ones
        let b: Vec<f64> = (0..n).map(|i| 4.0 - if i > 0 { 1.0 } else { 0.0 } - if i + 1 < n { 2.0 } else { 0.0 }).collect();
        let mut x = vec![0.0; n];
        assert_eq!(hlu_solver_solve(s, b.as_ptr(), x.as_mut_ptr()), HluStatus::Ok);
        assert!(x.iter().all(|v| (v - 1.0).abs() <= 1e-14));
        let mut be = -1.0;
        let mut iters = usize::MAX;
        assert_eq!(hlu_solver_last_solve_info(s, &mut be, &mut iters), HluStatus::Ok);
        assert!((0.0..=1e-15).contains(&be));
        assert_eq!(iters, 0);

        let doubled: Vec<f64> = val.iter().map(|v| 2.0 * v).collect();
        assert_eq!(hlu_solver_refactorize(s, doubled.as_ptr()), HluStatus::Ok);
        assert_eq!(hlu_solver_solve(s, b.as_ptr(), x.as_mut_ptr()), HluStatus::Ok);
        assert!(x.iter().all(|v| (v - 0.5).abs() <= 1e-14));
        hlu_solver_free(s);
    }
}

#[test]
fn errors_map_to_status_codes() {
    let mut s = ptr::null_mut();
    unsafe {
        // column out of range
        let (ptr, idx, val) = (vec![0usize, 1, 2], vec![0usize, 5], vec![1.0, 1.0]);
        assert_eq!(hlu_solver_create(2, ptr.as_ptr(), idx.as_ptr(), val.as_ptr(), 1, &mut s), HluStatus::InvalidMatrix);
        assert!(s.is_null());
        assert!(!last_error().is_empty());

        // both rows only in column 0
        let (ptr, idx, val) = (vec![0usize, 1, 2], vec![0usize, 0], vec![1.0, 2.0]);
        assert_eq!(
            hlu_solver_create(2, ptr.as_ptr(), idx.as_ptr(), val.as_ptr(), 1, &mut s),
            HluStatus::StructurallySingular
        );
        assert!(last_error().starts_with("StructurallySingular"));

        assert_eq!(hlu_solver_create(2, ptr::null(), idx.as_ptr(), val.as_ptr(), 1, &mut s), HluStatus::NullPointer);
        assert_eq!(hlu_solver_solve(ptr::null_mut(), ptr::null(), ptr::null_mut()), HluStatus::NullPointer);
        assert_eq!(hlu_solver_n(ptr::null()), 0);
        hlu_solver_free(ptr::null_mut());

        let missing = CString::new("/nonexistent/matrix.mtx").unwrap();
        assert_eq!(hlu_solver_load(missing.as_ptr(), 1, &mut s), HluStatus::Io);
    }
}

#[test]
fn status_names_are_static_strings() {
    let name = unsafe { CStr::from_ptr(hlu_status_name(HluStatus::PatternMismatch)) };
    assert_eq!(name.to_str().unwrap(), "pattern mismatch");
}

#[test]
fn load_reads_matrix_market() {
    let dir = std::env::temp_dir().join(format!("hlu-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("id2.mtx");
    std::fs::write(&path, "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 2.0\n2 2 4.0\n").unwrap();
    let c_path = CString::new(path.to_str().unwrap()).unwrap();
    let mut s = ptr::null_mut();
    unsafe {
        assert_eq!(hlu_solver_load(c_path.as_ptr(), 0, &mut s), HluStatus::Ok);
        let mut x = [0.0; 2];
        assert_eq!(hlu_solver_solve(s, [2.0, 4.0].as_ptr(), x.as_mut_ptr()), HluStatus::Ok);
        assert_eq!(x, [1.0, 1.0]);
        hlu_solver_free(s);
    }
    std::fs::remove_dir_all(dir).unwrap();
}
