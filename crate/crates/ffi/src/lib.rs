//! C ABI for the free boundary laboratory.
//!
//! Opaque handles wrap the Rust objects; every entry point returns a status
//! code (or null for constructors) and the last error message is retrievable
//! per thread. All functions catch panics at the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use fbtouch::{
    classify, contact_free_boundary, monotone_verdict, phi, solve, verify_membership, Config,
    DomainKind, GlobalSolution, Grid, ProblemClass, ScalarField, SolutionKind, SolveConfig,
    SolveReport,
};

/// Status codes returned by the C entry points.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FbtStatus {
    FbtOk = 0,
    FbtErrInvalidArgument = 1,
    FbtErrIo = 2,
    FbtErrNotConverged = 3,
    FbtErrVerification = 4,
    FbtErrNullPointer = 5,
    FbtErrUtf8 = 6,
    FbtErrPanic = 7,
}

/// Opaque scalar field handle.
pub struct FbtField {
    inner: ScalarField,
}

/// Opaque solve report handle.
pub struct FbtReport {
    inner: SolveReport,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: &str) {
    let sanitized = msg.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(err: &fbtouch::FbError) -> FbtStatus {
    use fbtouch::FbError::*;
    set_error(&err.to_string());
    match err {
        Io { .. } => FbtStatus::FbtErrIo,
        Parse { .. } | Config(_) => FbtStatus::FbtErrInvalidArgument,
        InnerDiverged(_) => FbtStatus::FbtErrNotConverged,
        _ => FbtStatus::FbtErrInvalidArgument,
    }
}

fn guard<F: FnOnce() -> FbtStatus>(f: F) -> FbtStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("panic across the C boundary");
            FbtStatus::FbtErrPanic
        }
    }
}

unsafe fn cstr<'a>(ptr: *const c_char) -> Result<&'a str, FbtStatus> {
    if ptr.is_null() {
        set_error("null string pointer");
        return Err(FbtStatus::FbtErrNullPointer);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error("string is not valid UTF-8");
        FbtStatus::FbtErrUtf8
    })
}

/// Library version as a static C string.
#[no_mangle]
pub extern "C" fn fbt_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr() as *const c_char
}

/// Copy the last error message for the calling thread into `buf`
/// (truncated, always NUL-terminated). Returns the full message length.
///
/// # Safety
/// `buf` must point to `len` writable bytes (or be null to query the length).
#[no_mangle]
pub unsafe extern "C" fn fbt_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let msg = slot.borrow();
        let bytes = msg.as_bytes_with_nul();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        bytes.len() - 1
    })
}

// ---------------------------------------------------------------------------
// Fields
// ---------------------------------------------------------------------------

/// Load a field file; null on failure (see fbt_last_error).
///
/// # Safety
/// `path` must be a NUL-terminated UTF-8 string.
#[no_mangle]
pub unsafe extern "C" fn fbt_field_load(path: *const c_char) -> *mut FbtField {
    let path = match cstr(path) {
        Ok(p) => p,
        Err(_) => return ptr::null_mut(),
    };
    match catch_unwind(|| ScalarField::load(path)) {
        Ok(Ok(inner)) => Box::into_raw(Box::new(FbtField { inner })),
        Ok(Err(e)) => {
            set_error(&e.to_string());
            ptr::null_mut()
        }
        Err(_) => {
            set_error("panic across the C boundary");
            ptr::null_mut()
        }
    }
}

/// Sample a catalog member onto a fresh grid.
/// `kind`: 0 half-space polynomial, 1 one-sided positive, 2 one-sided
/// negative, 3 two-sided. `domain`: 0 half ball, 1 full ball, 2 half rect.
#[no_mangle]
pub extern "C" fn fbt_field_sample_catalog(
    kind: i32,
    a: f64,
    alpha: f64,
    b: f64,
    rotation: f64,
    subdiv: u32,
    domain: i32,
) -> *mut FbtField {
    let build = || -> fbtouch::Result<ScalarField> {
        let kind = match kind {
            0 => SolutionKind::HalfSpacePoly,
            1 => SolutionKind::OneSidedPositive,
            2 => SolutionKind::OneSidedNegative,
            3 => SolutionKind::TwoSided,
            _ => {
                return Err(fbtouch::FbError::InvalidArgument(format!(
                    "unknown catalog kind code {kind}"
                )))
            }
        };
        let mut member = match kind {
            SolutionKind::HalfSpacePoly => GlobalSolution::half_space_poly(a, alpha),
            SolutionKind::OneSidedPositive => GlobalSolution::one_sided_positive(b)?,
            SolutionKind::OneSidedNegative => GlobalSolution::one_sided_negative(a)?,
            SolutionKind::TwoSided => GlobalSolution::two_sided(a, b)?,
        };
        member.rotation = rotation;
        let domain = match domain {
            0 => DomainKind::HalfBall,
            1 => DomainKind::FullBall,
            2 => DomainKind::HalfRect,
            _ => {
                return Err(fbtouch::FbError::InvalidArgument(format!(
                    "unknown domain code {domain}"
                )))
            }
        };
        let grid = Grid::new(2, subdiv, domain)?;
        Ok(member.sample(&grid))
    };
    match catch_unwind(build) {
        Ok(Ok(inner)) => Box::into_raw(Box::new(FbtField { inner })),
        Ok(Err(e)) => {
            set_error(&e.to_string());
            ptr::null_mut()
        }
        Err(_) => {
            set_error("panic across the C boundary");
            ptr::null_mut()
        }
    }
}

/// Write the field file format.
///
/// # Safety
/// `field` must be a live handle, `path` a NUL-terminated UTF-8 string.
#[no_mangle]
pub unsafe extern "C" fn fbt_field_save(field: *const FbtField, path: *const c_char) -> FbtStatus {
    guard(|| {
        let Some(field) = field.as_ref() else {
            set_error("null field handle");
            return FbtStatus::FbtErrNullPointer;
        };
        let path = match cstr(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match field.inner.save(path) {
            Ok(()) => FbtStatus::FbtOk,
            Err(e) => status_of(&e),
        }
    })
}

/// Grid metadata: dimension, spacing and active node count.
///
/// # Safety
/// `field` must be a live handle; out pointers may be null to skip.
#[no_mangle]
pub unsafe extern "C" fn fbt_field_info(
    field: *const FbtField,
    n_out: *mut u32,
    h_out: *mut f64,
    active_out: *mut u64,
) -> FbtStatus {
    guard(|| {
        let Some(field) = field.as_ref() else {
            set_error("null field handle");
            return FbtStatus::FbtErrNullPointer;
        };
        let grid = field.inner.grid();
        if !n_out.is_null() {
            *n_out = grid.n() as u32;
        }
        if !h_out.is_null() {
            *h_out = grid.h();
        }
        if !active_out.is_null() {
            *active_out = grid.active_count() as u64;
        }
        FbtStatus::FbtOk
    })
}

/// Value at the active node nearest to (x, y).
///
/// # Safety
/// `field` must be a live handle and `value_out` writable.
#[no_mangle]
pub unsafe extern "C" fn fbt_field_value_at(
    field: *const FbtField,
    x: f64,
    y: f64,
    value_out: *mut f64,
) -> FbtStatus {
    guard(|| {
        let Some(field) = field.as_ref() else {
            set_error("null field handle");
            return FbtStatus::FbtErrNullPointer;
        };
        if value_out.is_null() {
            set_error("null output pointer");
            return FbtStatus::FbtErrNullPointer;
        }
        match field.inner.grid().nearest_node(&[x, y]) {
            Some(idx) => {
                *value_out = field.inner.value(idx);
                FbtStatus::FbtOk
            }
            None => {
                set_error("point outside the active grid");
                FbtStatus::FbtErrInvalidArgument
            }
        }
    })
}

/// # Safety
/// `field` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn fbt_field_free(field: *mut FbtField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

// ---------------------------------------------------------------------------
// Solver
// ---------------------------------------------------------------------------

/// Solve from a flat `key = value` config given as text (same keys as the
/// CLI solve subcommand). Null on config errors; inspect fbt_last_error.
///
/// # Safety
/// `config_text` must be a NUL-terminated UTF-8 string.
#[no_mangle]
pub unsafe extern "C" fn fbt_solve_config(config_text: *const c_char) -> *mut FbtReport {
    let text = match cstr(config_text) {
        Ok(t) => t,
        Err(_) => return ptr::null_mut(),
    };
    let run = || -> fbtouch::Result<SolveReport> {
        let cfg = Config::parse(text, "<config>")?;
        let sc = SolveConfig::from_config(&cfg)?;
        cfg.finish()?;
        solve(&sc.spec)
    };
    match catch_unwind(run) {
        Ok(Ok(inner)) => Box::into_raw(Box::new(FbtReport { inner })),
        Ok(Err(e)) => {
            set_error(&e.to_string());
            ptr::null_mut()
        }
        Err(_) => {
            set_error("panic across the C boundary");
            ptr::null_mut()
        }
    }
}

/// # Safety
/// `report` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn fbt_report_converged(report: *const FbtReport) -> i32 {
    report.as_ref().map(|r| r.inner.converged as i32).unwrap_or(-1)
}

/// # Safety
/// `report` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn fbt_report_outer_iters(report: *const FbtReport) -> i64 {
    report.as_ref().map(|r| r.inner.outer_iters as i64).unwrap_or(-1)
}

/// # Safety
/// `report` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn fbt_report_final_residual(report: *const FbtReport) -> f64 {
    report
        .as_ref()
        .map(|r| r.inner.final_residual)
        .unwrap_or(f64::NAN)
}

/// Clone the solved field out of a report.
///
/// # Safety
/// `report` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn fbt_report_field(report: *const FbtReport) -> *mut FbtField {
    match report.as_ref() {
        Some(r) => Box::into_raw(Box::new(FbtField {
            inner: r.inner.field.clone(),
        })),
        None => {
            set_error("null report handle");
            ptr::null_mut()
        }
    }
}

/// Verify class membership of the solved field: trace, sup bound and
/// distributional residual (plus origin contact when `require_origin`).
/// Returns FbtOk when every item passes, FbtErrVerification otherwise.
///
/// # Safety
/// `report` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn fbt_report_verify(
    report: *const FbtReport,
    m: f64,
    require_origin: i32,
) -> FbtStatus {
    guard(|| {
        let Some(r) = report.as_ref() else {
            set_error("null report handle");
            return FbtStatus::FbtErrNullPointer;
        };
        if !r.inner.converged {
            set_error("report is not converged");
            return FbtStatus::FbtErrNotConverged;
        }
        let mut cls = ProblemClass::p_plus(1.0, m);
        if require_origin != 0 {
            cls = cls.with_origin_contact();
        }
        match verify_membership(&r.inner.field, &cls, r.inner.eps_g) {
            Ok(v) if v.passed() => FbtStatus::FbtOk,
            Ok(v) => {
                set_error(&format!("membership failed: {v:?}"));
                FbtStatus::FbtErrVerification
            }
            Err(e) => status_of(&e),
        }
    })
}

/// # Safety
/// `report` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn fbt_report_free(report: *mut FbtReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

// ---------------------------------------------------------------------------
// Analysis
// ---------------------------------------------------------------------------

/// Best-fit classification of a field against the global-solution catalog.
/// Outputs: kind code (as in fbt_field_sample_catalog), parameters and the
/// RMS misfit.
///
/// # Safety
/// `field` must be a live handle; out pointers may be null to skip.
#[no_mangle]
pub unsafe extern "C" fn fbt_classify(
    field: *const FbtField,
    kind_out: *mut i32,
    a_out: *mut f64,
    alpha_out: *mut f64,
    b_out: *mut f64,
    residual_out: *mut f64,
) -> FbtStatus {
    guard(|| {
        let Some(field) = field.as_ref() else {
            set_error("null field handle");
            return FbtStatus::FbtErrNullPointer;
        };
        match classify(&field.inner) {
            Ok((member, rms)) => {
                if !kind_out.is_null() {
                    *kind_out = match member.kind {
                        SolutionKind::HalfSpacePoly => 0,
                        SolutionKind::OneSidedPositive => 1,
                        SolutionKind::OneSidedNegative => 2,
                        SolutionKind::TwoSided => 3,
                    };
                }
                if !a_out.is_null() {
                    *a_out = member.a;
                }
                if !alpha_out.is_null() {
                    *alpha_out = member.alpha;
                }
                if !b_out.is_null() {
                    *b_out = member.b;
                }
                if !residual_out.is_null() {
                    *residual_out = rms;
                }
                FbtStatus::FbtOk
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Coincidence-boundary points of a thresholded field. Two-call pattern:
/// pass a null buffer to query the count, then a buffer of `2 * count`
/// doubles (x then y per point).
///
/// # Safety
/// `field` must be a live handle; `count_inout` must be writable; `buf`, if
/// non-null, must hold `2 * *count_inout` doubles.
#[no_mangle]
pub unsafe extern "C" fn fbt_contact_free_boundary(
    field: *const FbtField,
    eps_g: f64,
    buf: *mut f64,
    count_inout: *mut u64,
) -> FbtStatus {
    guard(|| {
        let Some(field) = field.as_ref() else {
            set_error("null field handle");
            return FbtStatus::FbtErrNullPointer;
        };
        if count_inout.is_null() {
            set_error("null count pointer");
            return FbtStatus::FbtErrNullPointer;
        }
        match contact_free_boundary(&field.inner, eps_g) {
            Ok(points) => {
                if buf.is_null() {
                    *count_inout = points.len() as u64;
                } else {
                    let cap = *count_inout as usize;
                    let n = points.len().min(cap);
                    for (k, p) in points.iter().take(n).enumerate() {
                        *buf.add(2 * k) = p[0];
                        *buf.add(2 * k + 1) = p[1];
                    }
                    *count_inout = n as u64;
                }
                FbtStatus::FbtOk
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Monotonicity scan of the product functional for the tangential split of
/// a half-ball field: fills `phi_out[i]` for each radius and reports whether
/// the scan is monotone (within the default slack) through `monotone_out`.
///
/// # Safety
/// `field` must be a live handle; `radii` must hold `radii_len` doubles and
/// `phi_out` as many writable slots.
#[no_mangle]
pub unsafe extern "C" fn fbt_phi_scan(
    field: *const FbtField,
    radii: *const f64,
    radii_len: u64,
    phi_out: *mut f64,
    monotone_out: *mut i32,
) -> FbtStatus {
    guard(|| {
        let Some(field) = field.as_ref() else {
            set_error("null field handle");
            return FbtStatus::FbtErrNullPointer;
        };
        if radii.is_null() || phi_out.is_null() {
            set_error("null buffer");
            return FbtStatus::FbtErrNullPointer;
        }
        let radii = std::slice::from_raw_parts(radii, radii_len as usize);
        let run = || -> fbtouch::Result<(Vec<f64>, bool)> {
            let (h1, h2) = fbtouch::split_directional(&field.inner, &[0.0, 1.0])?;
            let scan = phi(&h1, &h2, &[0.0, 0.0], radii)?;
            let monotone = monotone_verdict(&scan, None).is_monotone();
            Ok((scan.phi, monotone))
        };
        match run() {
            Ok((phis, monotone)) => {
                for (k, v) in phis.iter().enumerate() {
                    *phi_out.add(k) = *v;
                }
                if !monotone_out.is_null() {
                    *monotone_out = monotone as i32;
                }
                FbtStatus::FbtOk
            }
            Err(e) => status_of(&e),
        }
    })
}
