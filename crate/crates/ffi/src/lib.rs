//! C ABI over the simulator.
//!
//! Objects are opaque handles created by `esr_*_new`/`esr_*_parse` style
//! functions and released with the matching `esr_*_free`. Every fallible call
//! returns an [`EsrStatus`]; on failure [`esr_last_error_message`] describes
//! the most recent error on the calling thread. Strings handed out by the
//! library are released with [`esr_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use esr_core::config::{parse_config, RunConfiguration};
use esr_core::eigen::EigenBasis;
use esr_core::entangle::{BellLabel, EntanglementRecorder, EntanglementTrace};
use esr_core::error::Error;
use esr_core::propagate::{initial_state, propagate_with, DensityMatrixTrajectory, PropagationSettings, QmeSystem, TrajectoryRecorder};
use esr_core::pulse::PulseProgram;
use esr_core::pulse_format::{parse_pulse_program, serialize_pulse_program};
use esr_core::reference::{appendix_config, bell_program};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EsrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Parse = 4,
    Validation = 5,
    NumericalAbort = 6,
    Calibration = 7,
    OutOfRange = 8,
    Panic = 9,
}

impl From<&Error> for EsrStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Io { .. } => EsrStatus::Io,
            Error::Parse { .. } => EsrStatus::Parse,
            Error::OutOfRange { .. } => EsrStatus::OutOfRange,
            Error::Integrity(_) | Error::NumericalAbort { .. } => EsrStatus::NumericalAbort,
            Error::Calibration { .. } => EsrStatus::Calibration,
            _ => EsrStatus::Validation,
        }
    }
}

/// A configured model with its eigenbasis and electrodes.
pub struct EsrSimulation {
    config: RunConfiguration,
    basis: EigenBasis,
}

/// A drive schedule.
pub struct EsrProgram {
    program: PulseProgram,
}

/// Sampled observables of one propagation.
pub struct EsrTrajectory {
    traj: DensityMatrixTrajectory,
    ent: EntanglementTrace,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn fail(status: EsrStatus, message: impl Into<String>) -> EsrStatus {
    set_error(message.into());
    status
}

fn from_error(e: Error) -> EsrStatus {
    let status = EsrStatus::from(&e);
    fail(status, e.to_string())
}

/// Runs `f`, turning panics into [`EsrStatus::Panic`].
fn guarded(f: impl FnOnce() -> EsrStatus) -> EsrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => {
            if s == EsrStatus::Ok {
                set_error(String::new());
            }
            s
        }
        Err(_) => fail(EsrStatus::Panic, "internal panic"),
    }
}

unsafe fn text<'a>(s: *const c_char) -> Result<&'a str, EsrStatus> {
    if s.is_null() {
        return Err(fail(EsrStatus::NullPointer, "null string argument"));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| fail(EsrStatus::InvalidUtf8, "string argument is not UTF-8"))
}

unsafe fn emit<T>(out: *mut *mut T, value: T) -> EsrStatus {
    *out = Box::into_raw(Box::new(value));
    EsrStatus::Ok
}

/// Copies `values` into `buf` of capacity `len`; fails if it does not fit.
unsafe fn copy_out(values: impl ExactSizeIterator<Item = f64>, buf: *mut f64, len: usize) -> EsrStatus {
    if buf.is_null() {
        return fail(EsrStatus::NullPointer, "null output buffer");
    }
    if values.len() > len {
        return fail(EsrStatus::OutOfRange, format!("buffer holds {len} values, {} needed", values.len()));
    }
    for (k, v) in values.enumerate() {
        *buf.add(k) = v;
    }
    EsrStatus::Ok
}

fn simulation(config: RunConfiguration) -> Result<EsrSimulation, Error> {
    config.validate()?;
    let basis = EigenBasis::new(&config.model, config.simulation.label_axis)?;
    Ok(EsrSimulation { config, basis })
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call into the library.
#[no_mangle]
pub extern "C" fn esr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Releases a string returned by the library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn esr_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Builds the bundled reference simulation.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn esr_simulation_new_reference(out: *mut *mut EsrSimulation) -> EsrStatus {
    guarded(|| {
        if out.is_null() {
            return fail(EsrStatus::NullPointer, "null output pointer");
        }
        match simulation(appendix_config()) {
            Ok(s) => emit(out, s),
            Err(e) => from_error(e),
        }
    })
}

/// Builds a simulation from configuration text.
///
/// # Safety
/// `config` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn esr_simulation_from_config(config: *const c_char, out: *mut *mut EsrSimulation) -> EsrStatus {
    guarded(|| {
        if out.is_null() {
            return fail(EsrStatus::NullPointer, "null output pointer");
        }
        let t = match text(config) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match parse_config(t).and_then(simulation) {
            Ok(s) => emit(out, s),
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `sim` must come from this library and not be freed twice. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn esr_simulation_free(sim: *mut EsrSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Number of eigenstates; 0 for a null handle.
///
/// # Safety
/// `sim` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn esr_simulation_dimension(sim: *const EsrSimulation) -> usize {
    sim.as_ref().map_or(0, |s| s.basis.dim())
}

/// Eigenenergies in GHz above the ground state, ascending.
///
/// # Safety
/// `sim` must be a live handle and `buf` hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn esr_simulation_energies(sim: *const EsrSimulation, buf: *mut f64, len: usize) -> EsrStatus {
    guarded(|| match sim.as_ref() {
        Some(s) => copy_out(s.basis.energies.iter().copied(), buf, len),
        None => fail(EsrStatus::NullPointer, "null simulation"),
    })
}

/// The bundled Bell-state pulse program.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn esr_program_reference(out: *mut *mut EsrProgram) -> EsrStatus {
    guarded(|| {
        if out.is_null() {
            return fail(EsrStatus::NullPointer, "null output pointer");
        }
        emit(out, EsrProgram { program: bell_program() })
    })
}

/// Parses a pulse file.
///
/// # Safety
/// `pulses` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn esr_program_parse(pulses: *const c_char, out: *mut *mut EsrProgram) -> EsrStatus {
    guarded(|| {
        if out.is_null() {
            return fail(EsrStatus::NullPointer, "null output pointer");
        }
        let t = match text(pulses) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match parse_pulse_program(t) {
            Ok(program) => emit(out, EsrProgram { program }),
            Err(e) => from_error(e),
        }
    })
}

/// Number of segments; 0 for a null handle.
///
/// # Safety
/// `program` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn esr_program_segment_count(program: *const EsrProgram) -> usize {
    program.as_ref().map_or(0, |p| p.program.segments.len())
}

/// Writes the program in the pulse file format; release with
/// [`esr_string_free`].
///
/// # Safety
/// `program` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn esr_program_serialize(program: *const EsrProgram, out: *mut *mut c_char) -> EsrStatus {
    guarded(|| {
        let (Some(p), false) = (program.as_ref(), out.is_null()) else {
            return fail(EsrStatus::NullPointer, "null argument");
        };
        match serialize_pulse_program(&p.program) {
            Ok(s) => {
                *out = CString::new(s).unwrap_or_default().into_raw();
                EsrStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `program` must come from this library and not be freed twice. Null is
/// ignored.
#[no_mangle]
pub unsafe extern "C" fn esr_program_free(program: *mut EsrProgram) {
    if !program.is_null() {
        drop(Box::from_raw(program));
    }
}

/// Propagates the configured initial state through `program`, sampling every
/// `sample_interval` ns. `dt <= 0` selects the default step.
///
/// # Safety
/// `sim` and `program` must be live handles and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn esr_simulation_propagate(
    sim: *const EsrSimulation,
    program: *const EsrProgram,
    dt: f64,
    sample_interval: f64,
    out: *mut *mut EsrTrajectory,
) -> EsrStatus {
    guarded(|| {
        let (Some(s), Some(p), false) = (sim.as_ref(), program.as_ref(), out.is_null()) else {
            return fail(EsrStatus::NullPointer, "null argument");
        };
        let run = || -> Result<EsrTrajectory, Error> {
            let electrodes = s.config.electrodes();
            let system = QmeSystem::new(&s.basis, &electrodes, &s.config.kernel, None)?;
            let rho0 = initial_state(&s.basis, &s.config.simulation.initial_state)?;
            let settings = PropagationSettings {
                dt: (dt > 0.0).then_some(dt),
                ..Default::default()
            };
            let mut rec = TrajectoryRecorder::new(sample_interval, 0);
            let mut ent = EntanglementRecorder::new(&s.basis, sample_interval)?;
            propagate_with(&system, &p.program, &rho0, &settings, &mut (&mut rec, &mut ent))?;
            Ok(EsrTrajectory {
                traj: rec.trajectory,
                ent: ent.trace,
            })
        };
        match run() {
            Ok(t) => emit(out, t),
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `traj` must come from this library and not be freed twice. Null is
/// ignored.
#[no_mangle]
pub unsafe extern "C" fn esr_trajectory_free(traj: *mut EsrTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// Number of samples; 0 for a null handle.
///
/// # Safety
/// `traj` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn esr_trajectory_len(traj: *const EsrTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.traj.times.len())
}

/// Observable selector for [`esr_trajectory_series`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EsrSeries {
    /// ns
    Time = 0,
    /// Population of eigenstate `index` (0-based).
    Population = 1,
    /// Tip current, pA.
    TipCurrent = 2,
    /// Substrate current, pA.
    SubstrateCurrent = 3,
    /// Renormalized fidelity against |Φ+⟩.
    FidelityPhiPlus = 4,
    Concurrence = 5,
    /// Weight outside the two-qubit subspace.
    Leakage = 6,
    /// `<S^axis>` of spin `index / 3` (0 = transport), axis `index % 3`.
    Spin = 7,
}

/// Copies one observable series into `buf` (capacity `len`, at least
/// [`esr_trajectory_len`]).
///
/// # Safety
/// `traj` must be a live handle and `buf` hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn esr_trajectory_series(
    traj: *const EsrTrajectory,
    series: EsrSeries,
    index: usize,
    buf: *mut f64,
    len: usize,
) -> EsrStatus {
    guarded(|| {
        let Some(t) = traj.as_ref() else {
            return fail(EsrStatus::NullPointer, "null trajectory");
        };
        let tr = &t.traj;
        let n = tr.times.len();
        let bad_index = |what: &str| fail(EsrStatus::OutOfRange, format!("{what} index {index} out of range"));
        let phi = BellLabel::ALL.iter().position(|b| *b == BellLabel::PhiPlus).unwrap_or(0);
        match series {
            EsrSeries::Time => copy_out(tr.times.iter().copied(), buf, len),
            EsrSeries::Population => {
                if tr.populations.first().is_some_and(|p| index >= p.len()) {
                    return bad_index("state");
                }
                copy_out(tr.populations.iter().map(|p| p[index]), buf, len)
            }
            EsrSeries::TipCurrent => copy_out(tr.current.iter().map(|i| i[0]), buf, len),
            EsrSeries::SubstrateCurrent => copy_out(tr.current.iter().map(|i| i[1]), buf, len),
            EsrSeries::FidelityPhiPlus => copy_out(t.ent.fidelity.iter().map(|f| f[phi]), buf, len),
            EsrSeries::Concurrence => copy_out(t.ent.concurrence.iter().copied(), buf, len),
            EsrSeries::Leakage => copy_out(t.ent.leakage.iter().copied(), buf, len),
            EsrSeries::Spin => {
                let (site, axis) = (index / 3, index % 3);
                if tr.spin_expectations.first().is_some_and(|s| site >= s.len()) {
                    return bad_index("spin");
                }
                if n == 0 {
                    return EsrStatus::Ok;
                }
                copy_out(tr.spin_expectations.iter().map(|s| s[site][axis]), buf, len)
            }
        }
    })
}
