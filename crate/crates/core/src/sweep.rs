//! Continuous-wave spectra: DC current versus drive frequency.
//!
//! Each frequency point is driven from the initial state for `settle_time`,
//! then the tip current is averaged over two consecutive windows of
//! `window_periods` drive periods. The point is flagged as not converged
//! when the two averages disagree by more than the tolerance.

use std::ops::ControlFlow;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::propagate::{propagate_with, Observer, PropagationSettings, QmeSystem, StepState};
use crate::pulse::{PulseProgram, PulseSegment};
use crate::rates::ElectrodeLabel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepOptions {
    /// ns
    pub settle_time: f64,
    pub window_periods: usize,
    /// Relative tolerance between the two window averages.
    pub tolerance: f64,
    /// Absolute floor for the tolerance, pA.
    pub absolute_tolerance: f64,
    pub propagation: PropagationSettings,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            settle_time: 2000.0,
            window_periods: 2000,
            tolerance: 1e-2,
            absolute_tolerance: 1e-9,
            propagation: PropagationSettings::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    /// GHz
    pub frequency: f64,
    /// Mean of the last window, pA.
    pub dc_current: f64,
    /// Means of both windows, pA.
    pub window_averages: [f64; 2],
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub frequencies: Vec<f64>,
    /// Tip current (electrons into the impurity), pA.
    pub dc_current: Vec<f64>,
    pub converged: Vec<bool>,
}

impl SweepResult {
    pub fn points(&self) -> impl Iterator<Item = (f64, f64, bool)> + '_ {
        self.frequencies
            .iter()
            .zip(&self.dc_current)
            .zip(&self.converged)
            .map(|((f, i), c)| (*f, *i, *c))
    }
}

/// Evenly spaced grid including both ends.
pub fn frequency_grid(start: f64, stop: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![start],
        n => (0..n).map(|k| start + (stop - start) * k as f64 / (n - 1) as f64).collect(),
    }
}

struct WindowAverager {
    electrode: usize,
    bounds: [f64; 3],
    last: Option<(f64, f64)>,
    integrals: [f64; 2],
}

impl Observer for WindowAverager {
    fn observe(&mut self, s: &StepState<'_>) -> ControlFlow<()> {
        let current = s.currents()[self.electrode];
        if let Some((t0, i0)) = self.last {
            for w in 0..2 {
                if t0 >= self.bounds[w] - 1e-9 && s.t <= self.bounds[w + 1] + 1e-9 {
                    self.integrals[w] += 0.5 * (i0 + current) * (s.t - t0);
                }
            }
        }
        self.last = Some((s.t, current));
        ControlFlow::Continue(())
    }
}

/// Steady-state DC current at one drive frequency.
pub fn cw_point(system: &QmeSystem<'_>, rho0: &CMat, frequency: f64, options: &SweepOptions) -> Result<SweepPoint> {
    if !(frequency > 0.0) {
        return Err(Error::validation("sweep frequencies must be > 0"));
    }
    let electrode = system
        .electrode_labels()
        .iter()
        .position(|l| *l == ElectrodeLabel::Tip)
        .ok_or_else(|| Error::validation("the sweep reports the tip current but there is no tip"))?;
    let window = options.window_periods as f64 / frequency;
    let t1 = options.settle_time;
    let bounds = [t1, t1 + window, t1 + 2.0 * window];
    let mut segments = Vec::new();
    if t1 > 0.0 {
        segments.push(PulseSegment::new(0.0, t1, frequency, 0.0));
    }
    segments.push(PulseSegment::new(bounds[0], bounds[1], frequency, 0.0));
    segments.push(PulseSegment::new(bounds[1], bounds[2], frequency, 0.0));
    let program = PulseProgram::new(0.0, bounds[2], segments)?;
    let mut avg = WindowAverager {
        electrode,
        bounds,
        last: None,
        integrals: [0.0; 2],
    };
    propagate_with(system, &program, rho0, &options.propagation, &mut avg)?;
    let means = [avg.integrals[0] / window, avg.integrals[1] / window];
    let scale = means[1].abs().max(means[0].abs());
    let converged = (means[1] - means[0]).abs() <= (options.tolerance * scale).max(options.absolute_tolerance);
    Ok(SweepPoint {
        frequency,
        dc_current: means[1],
        window_averages: means,
        converged,
    })
}

/// Sweeps `frequencies` in parallel; the result keeps the input order.
pub fn cw_spectrum(
    system: &QmeSystem<'_>,
    rho0: &CMat,
    frequencies: &[f64],
    options: &SweepOptions,
) -> Result<(SweepResult, Vec<SweepPoint>)> {
    if options.window_periods == 0 || !(options.settle_time >= 0.0) || !(options.tolerance > 0.0) {
        return Err(Error::validation("sweep window, settle time and tolerance must be positive"));
    }
    let points: Vec<SweepPoint> = frequencies
        .par_iter()
        .map(|&f| cw_point(system, rho0, f, options))
        .collect::<Result<_>>()?;
    let result = SweepResult {
        frequencies: points.iter().map(|p| p.frequency).collect(),
        dc_current: points.iter().map(|p| p.dc_current).collect(),
        converged: points.iter().map(|p| p.converged).collect(),
    };
    Ok((result, points))
}
