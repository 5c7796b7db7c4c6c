//! Physics checks on the bundled reference model.

use std::ops::ControlFlow;

use esr_core::calibrate::{calibrate_rabi, CalibrationOptions};
use esr_core::eigen::EigenBasis;
use esr_core::propagate::{initial_state, propagate, propagate_with, InitialState, Observer, PropagationSettings, QmeSystem, StepState};
use esr_core::pulse::PulseProgram;
use esr_core::reference::{appendix_electrodes, appendix_model, bell_program, reference_kernel};

fn basis() -> EigenBasis {
    EigenBasis::new(&appendix_model(), [1.0, 0.0, 0.0]).unwrap()
}

#[test]
fn reference_pi_times() {
    let b = basis();
    let sys = QmeSystem::new(&b, &appendix_electrodes(), &reference_kernel(), None).unwrap();
    let one = b.states_with_charge(1);
    let opts = CalibrationOptions::default();
    // site flip: a 200 ns π pulse
    let c13 = calibrate_rabi(&sys, one[0], one[2], &opts).unwrap();
    assert!((c13.pi_time - 200.0).abs() < 0.01 * 200.0, "{c13:?}");
    assert!((c13.drive_frequency - 16.161).abs() < 0.01);
    // CNOT transition: a 16.31 ns π pulse
    let c34 = calibrate_rabi(&sys, one[2], one[3], &opts).unwrap();
    assert!((c34.pi_time - 16.31).abs() < 0.01 * 16.31, "{c34:?}");
    assert!((c34.drive_frequency - 15.359).abs() < 0.01);
}

#[test]
fn undriven_calibration_fails() {
    let b = basis();
    let mut electrodes = appendix_electrodes();
    electrodes[0].drive_amplitude = 0.0;
    let sys = QmeSystem::new(&b, &electrodes, &reference_kernel(), None).unwrap();
    let one = b.states_with_charge(1);
    let e = calibrate_rabi(&sys, one[0], one[2], &CalibrationOptions::default()).unwrap_err();
    assert_eq!(e.exit_code(), 7);
}

#[test]
fn no_tip_coupling_means_no_tip_current() {
    let b = basis();
    let mut electrodes = appendix_electrodes();
    electrodes[0].base_rate = 0.0;
    let sys = QmeSystem::new(&b, &electrodes, &reference_kernel(), None).unwrap();
    let rho0 = initial_state(&b, &InitialState::Ground).unwrap();
    let program = PulseProgram::continuous(0.0, 5.0, 16.161, 0.0).unwrap();
    let (traj, _) = propagate(&sys, &program, &rho0, &PropagationSettings::default(), 0.1, 0).unwrap();
    assert!(traj.current.iter().all(|i| i[0] == 0.0));
}

#[test]
fn equilibrium_carries_no_current() {
    let b = basis();
    let mut electrodes = appendix_electrodes();
    for e in &mut electrodes {
        e.chemical_potential = 0.0;
        e.drive_amplitude = 0.0;
    }
    let sys = QmeSystem::new(&b, &electrodes, &reference_kernel(), None).unwrap();
    let rho0 = initial_state(&b, &InitialState::Thermal(0.05)).unwrap();
    // the isolated-impurity thermal state first relaxes into equilibrium with
    // the electrodes
    let program = PulseProgram::free_evolution(0.0, 50.0).unwrap();
    let (traj, _) = propagate(&sys, &program, &rho0, &PropagationSettings::default(), 5.0, 0).unwrap();
    let i = traj.current.last().unwrap();
    assert!(i.iter().all(|x| x.abs() < 1e-3), "{i:?}");
}

/// Mean tip current inside two time windows.
struct WindowMeans {
    windows: [(f64, f64); 2],
    sums: [f64; 2],
    counts: [usize; 2],
}

impl Observer for WindowMeans {
    fn observe(&mut self, s: &StepState<'_>) -> ControlFlow<()> {
        for (k, (a, b)) in self.windows.iter().enumerate() {
            if s.t >= *a && s.t < *b {
                self.sums[k] += s.currents()[0];
                self.counts[k] += 1;
            }
        }
        ControlFlow::Continue(())
    }
}

#[test]
fn current_changes_when_the_pulses_end() {
    let b = basis();
    let sys = QmeSystem::new(&b, &appendix_electrodes(), &reference_kernel(), None).unwrap();
    let rho0 = initial_state(&b, &InitialState::Ground).unwrap();
    let full = bell_program();
    let off = full.segments[3].t_start;
    let mut segments = full.segments.clone();
    segments[3].t_end = off + 50.0;
    let program = PulseProgram::new(full.t_initial, off + 50.0, segments).unwrap();
    let mut m = WindowMeans {
        windows: [(off - 40.0, off - 20.0), (off + 5.0, off + 50.0)],
        sums: [0.0; 2],
        counts: [0; 2],
    };
    propagate_with(&sys, &program, &rho0, &PropagationSettings::default(), &mut m).unwrap();
    let before = m.sums[0] / m.counts[0] as f64;
    let after = m.sums[1] / m.counts[1] as f64;
    assert!(((before - after) / before).abs() > 0.05, "before {before} after {after}");
}

#[test]
fn site_spin_flips_during_the_first_pulse() {
    let b = basis();
    let sys = QmeSystem::new(&b, &appendix_electrodes(), &reference_kernel(), None).unwrap();
    let rho0 = initial_state(&b, &InitialState::Ground).unwrap();
    let first = bell_program().segments[0].clone();
    let program = PulseProgram::new(first.t_start, first.t_end, vec![first]).unwrap();
    let (traj, _) = propagate(&sys, &program, &rho0, &PropagationSettings::default(), 1.0, 0).unwrap();
    let s = &traj.spin_expectations;
    assert!((s[0][1][0] + 0.5).abs() < 1e-6);
    assert!((s[0][0][0] + 0.5).abs() < 1e-6);
    let last = s.last().unwrap();
    assert!(last[1][0] > 0.45, "site {}", last[1][0]);
    assert!((-0.50..=-0.44).contains(&last[0][0]), "transport {}", last[0][0]);
}
