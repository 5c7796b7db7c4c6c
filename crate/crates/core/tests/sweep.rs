//! Continuous-wave spectra on a single transport orbital in spin blockade.
//!
//! Reverse bias puts the singly occupied level between the electrode
//! chemical potentials: electrons enter from the substrate and leave through
//! a spin-polarized tip. The minority spin cannot leave, so the current is
//! blocked until the drive flips it at the Larmor frequency.

use std::ops::ControlFlow;

use esr_core::eigen::EigenBasis;
use esr_core::model::{QuantumImpurityModel, TransportOrbitalSpec};
use esr_core::propagate::{initial_state, propagate_with, InitialState, Observer, PropagationSettings, QmeSystem, StepState};
use esr_core::pulse::PulseProgram;
use esr_core::rates::{ElectrodeLabel, ElectrodeSpec, KernelOptions};
use esr_core::sweep::{cw_point, cw_spectrum, frequency_grid, SweepOptions};

const FIELD: f64 = 0.55;

fn basis() -> EigenBasis {
    let model = QuantumImpurityModel {
        transport: TransportOrbitalSpec {
            epsilon_up: 0.0,
            epsilon_down: 0.0,
            coulomb_u: 50.0,
            g_factors: [2.0; 3],
            b_field: [FIELD, 0.0, 0.0],
        },
        sites: Vec::new(),
        exchanges: Vec::new(),
    };
    EigenBasis::new(&model, [1.0, 0.0, 0.0]).unwrap()
}

fn electrodes(amplitude: f64, tip_rate: f64) -> Vec<ElectrodeSpec> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    vec![
        ElectrodeSpec {
            label: ElectrodeLabel::Tip,
            temperature: 0.05,
            chemical_potential: -3.0,
            base_rate: tip_rate,
            // between the field axis (spin selection) and z (spin-flip drive)
            spin_polarization: [s, 0.0, s],
            drive_amplitude: amplitude,
        },
        ElectrodeSpec {
            label: ElectrodeLabel::Substrate,
            temperature: 0.05,
            chemical_potential: 3.0,
            base_rate: 0.1,
            spin_polarization: [0.0; 3],
            drive_amplitude: 0.0,
        },
    ]
}

fn kernel() -> KernelOptions {
    KernelOptions {
        principal_value: true,
        broadening: 0.5,
        ..Default::default()
    }
}

fn options() -> SweepOptions {
    SweepOptions {
        settle_time: 50.0,
        window_periods: 200,
        ..Default::default()
    }
}

fn larmor(b: &EigenBasis) -> f64 {
    let one = b.states_with_charge(1);
    b.gap(one[1], one[0])
}

#[test]
fn resonance_at_the_larmor_frequency() {
    let b = basis();
    let sys = QmeSystem::new(&b, &electrodes(0.5, 0.1), &kernel(), None).unwrap();
    let rho0 = initial_state(&b, &InitialState::Ground).unwrap();
    let step = 0.05;
    let freqs = frequency_grid(15.0, 15.8, 17);
    let (result, points) = cw_spectrum(&sys, &rho0, &freqs, &options()).unwrap();
    assert!(points.iter().all(|p| p.converged));
    assert_eq!(result.frequencies, freqs);

    let background = 0.5 * (result.dc_current[0] + result.dc_current[16]);
    let dev: Vec<f64> = result.dc_current.iter().map(|i| (i - background).abs()).collect();
    let (k, depth) = dev.iter().enumerate().fold((0, 0.0), |a, (k, &d)| if d > a.1 { (k, d) } else { a });
    let above_half = dev.iter().filter(|&&d| d >= 0.5 * depth).count();
    let linewidth = (above_half as f64 * step).max(step);
    let w = larmor(&b);
    assert!(depth > 0.05 * background.abs(), "contrast {depth} of {background}");
    assert!((freqs[k] - w).abs() <= 2.0 * linewidth, "extremum {} vs Larmor {w}", freqs[k]);
}

#[test]
fn zero_drive_gives_a_flat_spectrum() {
    let b = basis();
    let sys = QmeSystem::new(&b, &electrodes(0.0, 0.1), &kernel(), None).unwrap();
    let rho0 = initial_state(&b, &InitialState::Ground).unwrap();
    let freqs = [14.0, 15.396, 17.0];
    // undriven dynamics are time-independent; settle fully into the steady state
    let opts = SweepOptions {
        settle_time: 600.0,
        ..options()
    };
    let (result, _) = cw_spectrum(&sys, &rho0, &freqs, &opts).unwrap();
    let i0 = result.dc_current[0];
    for i in &result.dc_current {
        assert!((i - i0).abs() <= 1e-6 * i0.abs(), "{i} vs {i0}");
    }
}

struct Average {
    from: f64,
    last: Option<(f64, f64)>,
    integral: f64,
    span: f64,
}

impl Observer for Average {
    fn observe(&mut self, s: &StepState<'_>) -> ControlFlow<()> {
        let i = s.currents()[0];
        if let Some((t0, i0)) = self.last {
            if t0 >= self.from - 1e-9 {
                self.integral += 0.5 * (i + i0) * (s.t - t0);
                self.span += s.t - t0;
            }
        }
        self.last = Some((s.t, i));
        ControlFlow::Continue(())
    }
}

/// Far from any transition the drive only rectifies: the tip rate scales as
/// `(1 + A cos ωt)²`, whose period average is `1 + A²/2`. The driven DC
/// current then equals the undriven current with that averaged rate.
#[test]
fn far_detuned_matches_undriven_with_averaged_rate() {
    let b = basis();
    let a = 0.5;
    let rho0 = initial_state(&b, &InitialState::Ground).unwrap();
    let driven = QmeSystem::new(&b, &electrodes(a, 0.1), &kernel(), None).unwrap();
    let far = 25.0;
    let point = cw_point(&driven, &rho0, far, &options()).unwrap();

    let averaged = QmeSystem::new(&b, &electrodes(0.0, 0.1 * (1.0 + 0.5 * a * a)), &kernel(), None).unwrap();
    let window = options().window_periods as f64 / far;
    let t_end = options().settle_time + 2.0 * window;
    let mut avg = Average {
        from: options().settle_time + window,
        last: None,
        integral: 0.0,
        span: 0.0,
    };
    let program = PulseProgram::free_evolution(0.0, t_end).unwrap();
    propagate_with(&averaged, &program, &rho0, &PropagationSettings::default(), &mut avg).unwrap();
    let undriven = avg.integral / avg.span;
    let rel = ((point.dc_current - undriven) / undriven).abs();
    assert!(rel < 1e-2, "driven {} undriven {undriven} rel {rel}", point.dc_current);
}

#[test]
fn rejects_bad_options() {
    let b = basis();
    let sys = QmeSystem::new(&b, &electrodes(0.5, 0.1), &kernel(), None).unwrap();
    let rho0 = initial_state(&b, &InitialState::Ground).unwrap();
    let mut o = options();
    o.window_periods = 0;
    assert!(cw_spectrum(&sys, &rho0, &[15.0], &o).is_err());
    assert!(cw_point(&sys, &rho0, -1.0, &options()).is_err());
}
