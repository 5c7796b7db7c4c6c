//! Numerical Rabi calibration: drive a transition on resonance, record the
//! upper-level population and fit `p(t) = A sin²(π Ω t) + B`.
//!
//! The recorded population is conditioned on the driven pair,
//! `p_u / (p_l + p_u)`, so slow leakage into spectator levels does not
//! masquerade as a fit residual.

use std::ops::ControlFlow;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::c;
use crate::propagate::{propagate_with, Observer, PropagationSettings, QmeSystem, StepState};
use crate::pulse::PulseProgram;
use crate::spectral::amplitude_spectrum;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CalibrationOptions {
    /// Minimum number of Rabi periods in the fitted record.
    pub periods: f64,
    /// First propagation window, ns; doubled until enough periods are seen.
    pub initial_window: f64,
    /// Give up beyond this duration, ns.
    pub max_duration: f64,
    /// ns between samples.
    pub sample_interval: f64,
    /// Largest accepted RMS fit residual.
    pub residual_limit: f64,
    /// Smallest fitted amplitude `A` counted as an oscillation.
    pub min_amplitude: f64,
    pub propagation: PropagationSettings,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        CalibrationOptions {
            periods: 3.0,
            initial_window: 64.0,
            max_duration: 4096.0,
            sample_interval: 0.05,
            residual_limit: 1e-2,
            min_amplitude: 0.05,
            propagation: PropagationSettings::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RabiCalibration {
    /// Eigenstate indices.
    pub lower: usize,
    pub upper: usize,
    /// Resonant drive frequency, GHz.
    pub drive_frequency: f64,
    /// GHz; a full population cycle takes `1/Ω`.
    pub rabi_frequency: f64,
    /// `1/(2Ω)`, ns.
    pub pi_time: f64,
    pub amplitude: f64,
    pub offset: f64,
    /// RMS residual of the fit.
    pub fit_residual: f64,
    /// Length of the fitted record, ns.
    pub duration: f64,
}

/// Least-squares `A sin²(π f t) + B` at fixed `f`; returns `(A, B, rms)`.
fn linear_fit(times: &[f64], values: &[f64], f: f64) -> (f64, f64, f64) {
    let n = times.len() as f64;
    let (mut sx, mut sxx, mut sy, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for (t, y) in times.iter().zip(values) {
        let x = (std::f64::consts::PI * f * t).sin().powi(2);
        sx += x;
        sxx += x * x;
        sy += y;
        sxy += x * y;
    }
    let det = n * sxx - sx * sx;
    let (a, b) = if det.abs() > 1e-300 {
        ((n * sxy - sx * sy) / det, (sxx * sy - sx * sxy) / det)
    } else {
        (0.0, sy / n)
    };
    let rss: f64 = times
        .iter()
        .zip(values)
        .map(|(t, y)| {
            let r = y - a * (std::f64::consts::PI * f * t).sin().powi(2) - b;
            r * r
        })
        .sum();
    (a, b, (rss / n).sqrt())
}

/// Fits `A sin²(π f t) + B` with `t` measured from the first sample;
/// returns `(f, A, B, rms)`.
pub fn fit_rabi(times: &[f64], values: &[f64]) -> Result<(f64, f64, f64, f64)> {
    if times.len() != values.len() || times.len() < 8 {
        return Err(Error::validation("Rabi fit needs at least 8 matching samples"));
    }
    let step = times[1] - times[0];
    let t0 = times[0];
    let rel: Vec<f64> = times.iter().map(|t| t - t0).collect();
    let spectrum = amplitude_spectrum(values, step)?;
    let guess = spectrum.peak_frequency();
    let res = spectrum.resolution;
    // coarse scan over ±1.5 bins, then golden-section refinement
    let cost = |f: f64| linear_fit(&rel, values, f).2;
    let (mut lo, mut hi) = ((guess - 1.5 * res).max(0.1 * res), guess + 1.5 * res);
    let mut best = (guess, cost(guess));
    for k in 0..=60 {
        let f = lo + (hi - lo) * k as f64 / 60.0;
        let r = cost(f);
        if r < best.1 {
            best = (f, r);
        }
    }
    let width = (hi - lo) / 60.0;
    lo = (best.0 - width).max(0.1 * res);
    hi = best.0 + width;
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut x1, mut x2) = (hi - g * (hi - lo), lo + g * (hi - lo));
    let (mut f1, mut f2) = (cost(x1), cost(x2));
    for _ in 0..80 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = cost(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = cost(x2);
        }
    }
    let f = 0.5 * (lo + hi);
    let (a, b, rms) = linear_fit(&rel, values, f);
    Ok((f, a, b, rms))
}

struct PopulationRecorder {
    lower: usize,
    upper: usize,
    interval: f64,
    next: f64,
    times: Vec<f64>,
    values: Vec<f64>,
}

impl Observer for PopulationRecorder {
    fn observe(&mut self, s: &StepState<'_>) -> ControlFlow<()> {
        if s.t + 1e-9 >= self.next {
            self.times.push(s.t);
            let (pl, pu) = (s.population(self.lower), s.population(self.upper));
            self.values.push(if pl + pu > 0.0 { pu / (pl + pu) } else { 0.0 });
            self.next = self.times.len() as f64 * self.interval;
        }
        ControlFlow::Continue(())
    }
}

/// Calibrates the Rabi frequency of `lower → upper` (eigenstate indices)
/// under the electrodes and drive compiled into `system`, starting from the
/// pure `lower` state.
pub fn calibrate_rabi(
    system: &QmeSystem<'_>,
    lower: usize,
    upper: usize,
    options: &CalibrationOptions,
) -> Result<RabiCalibration> {
    let basis = system.basis();
    let fail = |message: String| Error::Calibration {
        from: lower + 1,
        to: upper + 1,
        message,
    };
    if lower >= basis.dim() || upper >= basis.dim() || lower == upper {
        return Err(fail("transition levels out of range".into()));
    }
    if basis.charge_of_state[lower] != basis.charge_of_state[upper] {
        return Err(fail("levels differ in charge".into()));
    }
    if !(options.periods >= 3.0) {
        return Err(Error::validation("calibration must span at least 3 Rabi periods"));
    }
    if !system.is_driven() {
        return Err(fail("no oscillation detected: the drive is off".into()));
    }
    let frequency = basis.gap(upper, lower).abs();
    let mut rho = crate::linalg::zeros(basis.dim());
    rho[(lower, lower)] = c(1.0, 0.0);
    let mut rec = PopulationRecorder {
        lower,
        upper,
        interval: options.sample_interval,
        next: 0.0,
        times: Vec::new(),
        values: Vec::new(),
    };
    let (mut t, mut window) = (0.0, options.initial_window);
    loop {
        let program = PulseProgram::continuous(t, window, frequency, 0.0)?;
        rho = propagate_with(system, &program, &rho, &options.propagation, &mut rec)?.rho_final;
        t = window;
        let (f, a, b, rms) = fit_rabi(&rec.times, &rec.values)?;
        if a.abs() >= options.min_amplitude && f > 0.0 && t * f >= options.periods {
            if rms > options.residual_limit {
                return Err(fail(format!(
                    "fit residual {rms:.3e} exceeds {:.1e}",
                    options.residual_limit
                )));
            }
            return Ok(RabiCalibration {
                lower,
                upper,
                drive_frequency: frequency,
                rabi_frequency: f,
                pi_time: 0.5 / f,
                amplitude: a,
                offset: b,
                fit_residual: rms,
                duration: t,
            });
        }
        if window >= options.max_duration {
            let message = if a.abs() < options.min_amplitude {
                format!("no oscillation detected (amplitude {a:.3e})")
            } else {
                format!("fewer than {} periods within {} ns", options.periods, options.max_duration)
            };
            return Err(fail(message));
        }
        window = if a.abs() >= options.min_amplitude && f > 0.0 {
            // the current estimate is good enough to size the final window
            (1.02 * options.periods / f).max(1.25 * window)
        } else {
            2.0 * window
        }
        .min(options.max_duration);
    }
}
