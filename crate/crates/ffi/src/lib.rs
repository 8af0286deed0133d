//! C interface to the solver: an opaque solver handle, status codes, and a
//! per-thread message describing the most recent failure.
//!
//! The header `include/hybrid_lu.h` is generated from this file at build
//! time.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;

use hybrid_lu::matrix::read_matrix_market;
use hybrid_lu::numeric::{factorize, refactorize, FactorOptions, NumericFactors};
use hybrid_lu::preprocess::{analyze, AnalyzeOptions};
use hybrid_lu::trisolve::{solve_with, RefinementReport, SolveOptions, TriangularSolver};
use hybrid_lu::{CsrMatrix, Error};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HluStatus {
    Ok = 0,
    NullPointer = 1,
    /// Empty, non-square, malformed or out-of-range matrix input.
    InvalidMatrix = 2,
    /// No perfect matching, or a structurally zero diagonal.
    StructurallySingular = 3,
    /// Zero pivot with perturbation disabled.
    NumericBreakdown = 4,
    /// New values do not fit the analyzed pattern.
    PatternMismatch = 5,
    DimensionMismatch = 6,
    InvalidConfig = 7,
    Io = 8,
    Internal = 9,
}

impl From<&Error> for HluStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::EmptyMatrix
            | Error::IndexOutOfRange { .. }
            | Error::NonSquare { .. }
            | Error::Parse { .. }
            | Error::UnsupportedFormat(_) => HluStatus::InvalidMatrix,
            Error::StructurallySingular { .. } | Error::ZeroDiagonal { .. } => HluStatus::StructurallySingular,
            Error::NumericBreakdown { .. } => HluStatus::NumericBreakdown,
            Error::PatternMismatch => HluStatus::PatternMismatch,
            Error::DimensionMismatch { .. } | Error::LengthMismatch { .. } => HluStatus::DimensionMismatch,
            Error::InvalidConfig(_) => HluStatus::InvalidConfig,
            Error::Io(_) => HluStatus::Io,
            Error::CycleDetected { .. } => HluStatus::Internal,
        }
    }
}

/// A factorized matrix ready to solve. Created by `hlu_solver_create` or
/// `hlu_solver_load`, released by `hlu_solver_free`.
pub struct HluSolver {
    matrix: CsrMatrix,
    factors: NumericFactors,
    solver: TriangularSolver,
    factor_opts: FactorOptions,
    solve_opts: SolveOptions,
    last_report: Option<RefinementReport>,
}

impl HluSolver {
    fn build(matrix: CsrMatrix, threads: usize) -> Result<Self, Error> {
        let threads = threads.max(1);
        let analysis = analyze(
            &matrix,
            &AnalyzeOptions {
                threads,
                ..Default::default()
            },
        )?;
        let factor_opts = FactorOptions {
            threads,
            ..Default::default()
        };
        let solve_opts = SolveOptions {
            threads,
            ..Default::default()
        };
        let factors = factorize(&matrix, Arc::new(analysis), &factor_opts)?;
        let solver = TriangularSolver::new(&factors, &solve_opts)?;
        Ok(Self {
            matrix,
            factors,
            solver,
            factor_opts,
            solve_opts,
            last_report: None,
        })
    }
}

struct Failure {
    status: HluStatus,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            status: HluStatus::from(&e),
            message: format!("{}: {e}", e.class()),
        }
    }
}

fn null(what: &str) -> Failure {
    Failure {
        status: HluStatus::NullPointer,
        message: format!("{what} is null"),
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: &str) {
    let text = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(text));
}

/// Runs `f`, recording any failure or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> HluStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HluStatus::Ok,
        Ok(Err(fail)) => {
            set_last_error(&fail.message);
            fail.status
        }
        Err(_) => {
            set_last_error("internal panic");
            HluStatus::Internal
        }
    }
}

/// # Safety
/// `ptr` is null or valid for reading `len` elements.
unsafe fn slice<'a, T>(ptr: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

/// # Safety
/// `solver` is null or a live handle from this library.
unsafe fn handle<'a>(solver: *const HluSolver) -> Result<&'a HluSolver, Failure> {
    solver.as_ref().ok_or_else(|| null("solver"))
}

/// # Safety
/// `out` is null or valid for writing one pointer.
unsafe fn publish(out: *mut *mut HluSolver, solver: HluSolver) {
    *out = Box::into_raw(Box::new(solver));
}

/// Analyzes and factorizes the `n x n` CSR matrix. `row_ptr` holds `n + 1`
/// offsets; `col_idx` and `values` hold `row_ptr[n]` entries with strictly
/// ascending columns per row. `threads` of 0 is treated as 1.
///
/// # Safety
/// The arrays must be valid for the lengths above and `out` valid for one
/// write. On failure `*out` is left untouched.
#[no_mangle]
pub unsafe extern "C" fn hlu_solver_create(
    n: usize,
    row_ptr: *const usize,
    col_idx: *const usize,
    values: *const f64,
    threads: usize,
    out: *mut *mut HluSolver,
) -> HluStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let ptr = slice(row_ptr, n + 1, "row_ptr")?;
        let nnz = ptr[n];
        let cols = slice(col_idx, nnz, "col_idx")?;
        let vals = slice(values, nnz, "values")?;
        let matrix = CsrMatrix::new(n, ptr.to_vec(), cols.to_vec(), vals.to_vec())?;
        publish(out, HluSolver::build(matrix, threads)?);
        Ok(())
    })
}

/// Like `hlu_solver_create` with the matrix read from a Matrix Market file.
///
/// # Safety
/// `path` is a NUL-terminated UTF-8 string; `out` is valid for one write.
#[no_mangle]
pub unsafe extern "C" fn hlu_solver_load(path: *const c_char, threads: usize, out: *mut *mut HluSolver) -> HluStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if path.is_null() {
            return Err(null("path"));
        }
        let path = CStr::from_ptr(path).to_str().map_err(|e| Failure {
            status: HluStatus::Io,
            message: format!("path is not UTF-8: {e}"),
        })?;
        let matrix = read_matrix_market(Path::new(path))?;
        publish(out, HluSolver::build(matrix, threads)?);
        Ok(())
    })
}

/// Refactorizes with new values on the same pattern, reusing the analysis
/// and the prior pivot order.
///
/// # Safety
/// `solver` is a live handle; `values` holds `hlu_solver_nnz(solver)`
/// entries.
#[no_mangle]
pub unsafe extern "C" fn hlu_solver_refactorize(solver: *mut HluSolver, values: *const f64) -> HluStatus {
    guard(|| {
        let s = solver.as_mut().ok_or_else(|| null("solver"))?;
        let vals = slice(values, s.matrix.nnz(), "values")?;
        let matrix = s.matrix.with_values(vals.to_vec())?;
        let factors = refactorize(&matrix, &s.factors, &s.factor_opts)?;
        s.solver = TriangularSolver::new(&factors, &s.solve_opts)?;
        s.factors = factors;
        s.matrix = matrix;
        Ok(())
    })
}

/// Solves `A x = b`, refining automatically when a pivot was perturbed.
///
/// # Safety
/// `solver` is a live handle; `b` and `x` hold `hlu_solver_n(solver)`
/// entries and may not overlap.
#[no_mangle]
pub unsafe extern "C" fn hlu_solver_solve(solver: *mut HluSolver, b: *const f64, x: *mut f64) -> HluStatus {
    guard(|| {
        let s = solver.as_mut().ok_or_else(|| null("solver"))?;
        let n = s.matrix.n();
        let rhs = slice(b, n, "b")?;
        if x.is_null() {
            return Err(null("x"));
        }
        let (sol, report) = solve_with(&s.matrix, &s.factors, &s.solver, rhs, &s.solve_opts)?;
        std::slice::from_raw_parts_mut(x, n).copy_from_slice(&sol);
        s.last_report = Some(report);
        Ok(())
    })
}

/// Dimension of the factorized matrix, or 0 for a null handle.
///
/// # Safety
/// `solver` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hlu_solver_n(solver: *const HluSolver) -> usize {
    handle(solver).map_or(0, |s| s.matrix.n())
}

/// Stored entries of the factorized matrix, or 0 for a null handle.
///
/// # Safety
/// `solver` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hlu_solver_nnz(solver: *const HluSolver) -> usize {
    handle(solver).map_or(0, |s| s.matrix.nnz())
}

/// Pivots perturbed by the latest factorization.
///
/// # Safety
/// `solver` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hlu_solver_perturbation_count(solver: *const HluSolver) -> usize {
    handle(solver).map_or(0, |s| s.factors.perturbed().len())
}

/// Backward error and refinement steps of the latest solve. Either output
/// may be null.
///
/// # Safety
/// `solver` is a live handle; non-null outputs are valid for one write.
#[no_mangle]
pub unsafe extern "C" fn hlu_solver_last_solve_info(
    solver: *const HluSolver,
    backward_error: *mut f64,
    refinement_iterations: *mut usize,
) -> HluStatus {
    guard(|| {
        let s = handle(solver)?;
        let report = s.last_report.as_ref().ok_or_else(|| Failure {
            status: HluStatus::InvalidConfig,
            message: "no solve has run on this handle".into(),
        })?;
        if !backward_error.is_null() {
            *backward_error = report.final_backward_error();
        }
        if !refinement_iterations.is_null() {
            *refinement_iterations = report.iterations;
        }
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `solver` is null or a live handle, which must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hlu_solver_free(solver: *mut HluSolver) {
    if !solver.is_null() {
        drop(Box::from_raw(solver));
    }
}

/// Message for the most recent failure on the calling thread, or null if
/// none. Valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn hlu_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(std::ptr::null(), |s| s.as_ptr()))
}

/// Static name of a status code.
#[no_mangle]
pub extern "C" fn hlu_status_name(status: HluStatus) -> *const c_char {
    let name: &'static CStr = match status {
        HluStatus::Ok => c"ok",
        HluStatus::NullPointer => c"null pointer",
        HluStatus::InvalidMatrix => c"invalid matrix",
        HluStatus::StructurallySingular => c"structurally singular",
        HluStatus::NumericBreakdown => c"numeric breakdown",
        HluStatus::PatternMismatch => c"pattern mismatch",
        HluStatus::DimensionMismatch => c"dimension mismatch",
        HluStatus::InvalidConfig => c"invalid configuration",
        HluStatus::Io => c"i/o error",
        HluStatus::Internal => c"internal error",
    };
    name.as_ptr()
}
