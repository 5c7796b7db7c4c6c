//! Time-dependent quantum master equation simulation of STM-driven electron
//! spin resonance on a quantum impurity: a transport orbital exchange-coupled
//! to auxiliary spins, driven by microwave modulation of the tunneling
//! barrier.
//!
//! The crate is organised along the simulation pipeline:
//!
//! * [`model`], [`stevens`], [`eigen`]: many-body basis, impurity Hamiltonian
//!   and its eigenbasis.
//! * [`pulse`], [`pulse_format`]: drive schedules and their text format.
//! * [`rates`], [`tensor`]: electrode kernels, the rate tensor and the master
//!   equation right-hand side.
//! * [`propagate`], [`sweep`]: time propagation, observables and
//!   continuous-wave spectra.
//! * [`gates`], [`calibrate`]: analytic pulse unitaries, Rabi calibration and
//!   gate compilation.
//! * [`entangle`]: two-qubit reduction, Bell fidelity and concurrence.
//! * [`config`], [`reference`], [`output`], [`run`]: run configuration, the
//!   bundled reference inputs and the command-line runner.

// `!(x > 0.0)` style checks reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibrate;
pub mod config;
pub mod eigen;
pub mod entangle;
pub mod error;
pub mod gates;
pub mod linalg;
pub mod model;
pub mod output;
pub mod propagate;
pub mod pulse;
pub mod pulse_format;
pub mod rates;
pub mod reference;
pub mod run;
pub mod spectral;
pub mod stevens;
pub mod sweep;
pub mod tensor;
pub mod units;

pub use error::{Error, Result};
pub use linalg::{CMat, C64};
