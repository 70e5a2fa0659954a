//! C ABI over `cavity_eigen`.
//!
//! Every function returns a [`CeStatus`]; results go through out-pointers.
//! On failure the message is kept per thread and read back with
//! [`ce_last_error_message`]. Ensembles and instances are opaque handles
//! owned by the caller and released with their `_free` function.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::io::BufWriter;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use cavity_eigen::analytic::{self, DenseLimitModel, SingleDegreeModel};
use cavity_eigen::cavity::{self, BisectionOptions};
use cavity_eigen::ensemble::{generate_instance, sample_degree_sequence};
use cavity_eigen::oracle::{self, PowerIterationOptions};
use cavity_eigen::population::{self, DetectionOptions};
use cavity_eigen::{CouplingLaw, DegreeDistribution, Ensemble, Error, Mode, SparseSymmetricInstance};

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    GenerationFailed = 3,
    NotConverged = 4,
    Numerical = 5,
    Io = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CeMode {
    Ferromagnetic = 0,
    Paramagnetic = 1,
    Critical = 2,
}

impl From<Mode> for CeMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Ferromagnetic => CeMode::Ferromagnetic,
            Mode::Paramagnetic => CeMode::Paramagnetic,
            Mode::Critical => CeMode::Critical,
        }
    }
}

/// Degree distribution plus coupling law.
pub struct CeEnsemble(Ensemble);

/// Sparse symmetric matrix with zero diagonal.
pub struct CeInstance(SparseSymmetricInstance);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(error: &Error) -> CeStatus {
    match error {
        Error::InvalidDistribution(_)
        | Error::InvalidCouplingLaw(_)
        | Error::DegenerateEnsemble
        | Error::InvalidInstance(_)
        | Error::EmptyInput
        | Error::InvalidBracket { .. }
        | Error::InvalidConfig(_)
        | Error::BelowSpectralEdge { .. }
        | Error::WindowExceedsHistory { .. }
        | Error::Parse { .. } => CeStatus::InvalidArgument,
        Error::InfeasibleSequence(_)
        | Error::NoEvenSumCompletion
        | Error::GenerationStalled { .. }
        | Error::TreeGenerationFailed { .. } => CeStatus::GenerationFailed,
        Error::NotConverged { .. } => CeStatus::NotConverged,
        Error::Io(_) | Error::Json(_) => CeStatus::Io,
        _ => CeStatus::Numerical,
    }
}

/// Runs `body`, translating errors and panics into status codes.
fn guard<F>(body: F) -> CeStatus
where
    F: FnOnce() -> Result<(), CeError>,
{
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => CeStatus::Ok,
        Ok(Err(CeError(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("panic inside the library".into());
            CeStatus::Panic
        }
    }
}

struct CeError(CeStatus, String);

impl From<Error> for CeError {
    fn from(e: Error) -> Self {
        CeError(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> CeError {
    CeError(CeStatus::NullPointer, format!("{what} is null"))
}

unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), CeError> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, CeError> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], CeError> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ce_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Ensemble with degree mass `p[0..len]` and couplings `±j` with mean `delta * j`.
#[no_mangle]
pub unsafe extern "C" fn ce_ensemble_new_binary(
    degree_mass: *const f64,
    len: usize,
    delta: f64,
    j: f64,
    out: *mut *mut CeEnsemble,
) -> CeStatus {
    guard(|| {
        let mass = slice(degree_mass, len, "degree_mass")?.to_vec();
        let ensemble = Ensemble::new(DegreeDistribution::new(mass)?, CouplingLaw::binary(delta, j)?)?;
        write(out, Box::into_raw(Box::new(CeEnsemble(ensemble))), "out")
    })
}

/// Ensemble with Gaussian couplings.
#[no_mangle]
pub unsafe extern "C" fn ce_ensemble_new_gaussian(
    degree_mass: *const f64,
    len: usize,
    mean: f64,
    variance: f64,
    out: *mut *mut CeEnsemble,
) -> CeStatus {
    guard(|| {
        let mass = slice(degree_mass, len, "degree_mass")?.to_vec();
        let ensemble = Ensemble::new(DegreeDistribution::new(mass)?, CouplingLaw::Gaussian { mean, variance })?;
        write(out, Box::into_raw(Box::new(CeEnsemble(ensemble))), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn ce_ensemble_free(ensemble: *mut CeEnsemble) {
    if !ensemble.is_null() {
        drop(Box::from_raw(ensemble));
    }
}

/// Draws an `n`-index instance from `ensemble`.
#[no_mangle]
pub unsafe extern "C" fn ce_instance_generate(
    ensemble: *const CeEnsemble,
    n: usize,
    seed: u64,
    out: *mut *mut CeInstance,
) -> CeStatus {
    guard(|| {
        let e = &deref(ensemble, "ensemble")?.0;
        let degrees = sample_degree_sequence(&e.degrees, n, seed)?;
        let g = generate_instance(&degrees, &e.coupling, seed)?;
        write(out, Box::into_raw(Box::new(CeInstance(g))), "out")
    })
}

/// Instance from `m` undirected edges `(rows[e], cols[e], weights[e])`.
#[no_mangle]
pub unsafe extern "C" fn ce_instance_from_edges(
    n: usize,
    rows: *const usize,
    cols: *const usize,
    weights: *const f64,
    m: usize,
    out: *mut *mut CeInstance,
) -> CeStatus {
    guard(|| {
        let rows = slice(rows, m, "rows")?;
        let cols = slice(cols, m, "cols")?;
        let weights = slice(weights, m, "weights")?;
        let edges: Vec<(usize, usize, f64)> = (0..m).map(|e| (rows[e], cols[e], weights[e])).collect();
        let g = SparseSymmetricInstance::from_edges(n, &edges)?;
        write(out, Box::into_raw(Box::new(CeInstance(g))), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn ce_instance_free(instance: *mut CeInstance) {
    if !instance.is_null() {
        drop(Box::from_raw(instance));
    }
}

/// Number of indices, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn ce_instance_n(instance: *const CeInstance) -> usize {
    instance.as_ref().map_or(0, |g| g.0.n())
}

/// Number of undirected edges, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn ce_instance_edge_count(instance: *const CeInstance) -> usize {
    instance.as_ref().map_or(0, |g| g.0.edge_count())
}

/// Writes the plain-text edge list to `path`.
#[no_mangle]
pub unsafe extern "C" fn ce_instance_write_edge_list(instance: *const CeInstance, path: *const c_char) -> CeStatus {
    guard(|| {
        let g = &deref(instance, "instance")?.0;
        if path.is_null() {
            return Err(null("path"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|e| CeError(CeStatus::InvalidArgument, e.to_string()))?;
        let file = File::create(path).map_err(Error::from)?;
        g.write_edge_list(BufWriter::new(file))?;
        Ok(())
    })
}

/// Power iteration. `v_out` may be null; otherwise it receives `n`
/// components normalized to `|v|² = n`, and `v_len` must equal `n`.
/// `tol <= 0` selects the default tolerance.
#[no_mangle]
pub unsafe extern "C" fn ce_power_iterate(
    instance: *const CeInstance,
    tol: f64,
    seed: u64,
    out_lambda: *mut f64,
    out_m: *mut f64,
    v_out: *mut f64,
    v_len: usize,
) -> CeStatus {
    guard(|| {
        let g = &deref(instance, "instance")?.0;
        let mut opts = PowerIterationOptions::default();
        if tol > 0.0 {
            opts.tol = tol;
        }
        let s = oracle::power_iterate(g, &opts, seed)?;
        if !v_out.is_null() {
            if v_len != s.v.len() {
                return Err(CeError(
                    CeStatus::InvalidArgument,
                    format!("v_len {v_len} differs from n = {}", s.v.len()),
                ));
            }
            std::slice::from_raw_parts_mut(v_out, v_len).copy_from_slice(&s.v);
        }
        write(out_lambda, s.lambda, "out_lambda")?;
        if !out_m.is_null() {
            out_m.write(s.m_statistic);
        }
        Ok(())
    })
}

/// Cavity bisection threshold; exact on forests. `tol <= 0` selects the default.
#[no_mangle]
pub unsafe extern "C" fn ce_cavity_eigenvalue(instance: *const CeInstance, tol: f64, out_lambda: *mut f64) -> CeStatus {
    guard(|| {
        let g = &deref(instance, "instance")?.0;
        let mut opts = BisectionOptions::default();
        if tol > 0.0 {
            opts.tol = tol;
        }
        let t = cavity::bisect_eigenvalue(g, None, &opts)?;
        write(out_lambda, t.estimate(), "out_lambda")
    })
}

/// Stable root of `A = lambda − c/A`.
#[no_mangle]
pub unsafe extern "C" fn ce_a_star(lambda: f64, c: f64, out: *mut f64) -> CeStatus {
    guard(|| write(out, analytic::a_star(lambda, c)?, "out"))
}

#[no_mangle]
pub unsafe extern "C" fn ce_single_degree_eigenvalue(
    k: usize,
    j: f64,
    delta: f64,
    out_lambda: *mut f64,
    out_mode: *mut CeMode,
) -> CeStatus {
    guard(|| {
        let (lambda, mode) = analytic::single_degree_eigenvalue(&SingleDegreeModel::new(k, j, delta)?);
        write(out_lambda, lambda, "out_lambda")?;
        write(out_mode, mode.into(), "out_mode")
    })
}

#[no_mangle]
pub unsafe extern "C" fn ce_dense_limit_eigenvalue(mu: f64, j: f64, out_lambda: *mut f64, out_mode: *mut CeMode) -> CeStatus {
    guard(|| {
        let (lambda, mode) = analytic::dense_limit_eigenvalue(&DenseLimitModel::new(mu, j)?);
        write(out_lambda, lambda, "out_lambda")?;
        write(out_mode, mode.into(), "out_mode")
    })
}

/// Population-dynamics eigenvalue of an ensemble. `pop_size == 0` and
/// `tol <= 0` select defaults.
#[no_mangle]
pub unsafe extern "C" fn ce_detect_eigenvalue(
    ensemble: *const CeEnsemble,
    pop_size: usize,
    tol: f64,
    seed: u64,
    out_lambda: *mut f64,
    out_mode: *mut CeMode,
) -> CeStatus {
    guard(|| {
        let e = &deref(ensemble, "ensemble")?.0;
        let mut opts = DetectionOptions {
            seed,
            ..Default::default()
        };
        if pop_size > 0 {
            opts.pop_size = pop_size;
        }
        if tol > 0.0 {
            opts.tol = tol;
        }
        let d = population::detect_eigenvalue(e, &opts)?;
        write(out_lambda, d.lambda, "out_lambda")?;
        write(out_mode, d.mode.into(), "out_mode")
    })
}

/// Bias for which `lambda` is the ferromagnetic eigenvalue under the
/// decoupled first-moment condition. Requires binary couplings.
#[no_mangle]
pub unsafe extern "C" fn ce_mixture_delta_of_lambda(
    ensemble: *const CeEnsemble,
    lambda: f64,
    pop_size: usize,
    sweeps: usize,
    seed: u64,
    out_delta: *mut f64,
) -> CeStatus {
    guard(|| {
        let e = &deref(ensemble, "ensemble")?.0;
        let CouplingLaw::Binary { j, .. } = e.coupling else {
            return Err(CeError(CeStatus::InvalidArgument, "binary couplings required".into()));
        };
        let r = e.edge_law()?;
        let marginal = population::marginal_a_fixed_point(&r, &e.coupling, lambda, pop_size, sweeps, seed)?;
        write(out_delta, population::mixture_delta_of_lambda(&r, j, &marginal)?, "out_delta")
    })
}
