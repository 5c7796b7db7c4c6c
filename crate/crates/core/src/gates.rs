//! Analytic pulse unitaries and compilation of gates into pulse programs.
//!
//! A resonant pulse of angle `θ = 2π Ω t` (Ω the Rabi frequency in GHz) and
//! drive phase `δ` acts on its two-level transition, in the rotating frame,
//! as
//!
//! ```text
//! U(θ, δ) = [[cos θ/2, −i e^{iδ} sin θ/2], [−i e^{−iδ} sin θ/2, cos θ/2]]
//! ```
//!
//! with the lower level first. Z rotations are virtual: they re-reference
//! the phases of later pulses on the same qubit instead of being driven.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::Serialize;

use crate::eigen::EigenBasis;
use crate::error::{Error, Result};
use crate::linalg::{c, CMat, C64, I, ONE, ZERO};
use crate::pulse::{PulseProgram, PulseSegment};
use crate::units::TWO_PI;

/// Largest relative detuning accepted between a pulse and its transition.
pub const RESONANCE_TOLERANCE: f64 = 1e-3;

pub fn rotating_frame_unitary(angle: f64, phase: f64) -> CMat {
    let (s, co) = (0.5 * angle).sin_cos();
    CMat::from_row_slice(
        2,
        2,
        &[
            c(co, 0.0),
            -I * C64::from_polar(s, phase),
            -I * C64::from_polar(s, -phase),
            c(co, 0.0),
        ],
    )
}

/// Lab-frame form for Larmor frequency `larmor` (GHz) at time `t` (ns),
/// with the global phase convention of the rotating-frame form.
pub fn lab_frame_unitary(angle: f64, phase: f64, larmor: f64, t: f64) -> CMat {
    let w = TWO_PI * larmor * t;
    let global = C64::from_polar(1.0, -0.5 * w);
    let spin = C64::from_polar(1.0, w);
    let mut u = rotating_frame_unitary(angle, phase);
    u[(1, 0)] *= spin;
    u[(1, 1)] *= spin;
    u.map(|z| z * global)
}

/// `diag(e^{iω₀t/2}, e^{−iω₀t/2}) · U_lab`, which equals the rotating-frame
/// unitary exactly.
pub fn to_rotating_frame(lab: &CMat, larmor: f64, t: f64) -> CMat {
    let w = TWO_PI * larmor * t;
    let mut u = lab.clone();
    for j in 0..2 {
        u[(0, j)] *= C64::from_polar(1.0, 0.5 * w);
        u[(1, j)] *= C64::from_polar(1.0, -0.5 * w);
    }
    u
}

pub fn pauli_x() -> CMat {
    CMat::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
}

pub fn pauli_y() -> CMat {
    CMat::from_row_slice(2, 2, &[ZERO, -I, I, ZERO])
}

pub fn pauli_z() -> CMat {
    CMat::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
}

/// Principal square root of `Y`.
pub fn sqrt_y() -> CMat {
    let h = c(0.5, 0.5);
    CMat::from_row_slice(2, 2, &[h, -h, h, h])
}

pub fn hadamard() -> CMat {
    let h = c(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    CMat::from_row_slice(2, 2, &[h, h, h, -h])
}

/// Controlled NOT with the site qubit as control, in the `2 q_transport +
/// q_site` ordering.
pub fn cnot_site_control() -> CMat {
    let mut u = CMat::zeros(4, 4);
    u[(0, 0)] = ONE;
    u[(2, 2)] = ONE;
    u[(1, 3)] = ONE;
    u[(3, 1)] = ONE;
    u
}

/// The two qubits of the two-spin model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Qubit {
    Transport,
    Site,
}

impl Qubit {
    fn from_number(n: &str) -> Option<Self> {
        match n {
            "1" => Some(Qubit::Transport),
            "2" => Some(Qubit::Site),
            _ => None,
        }
    }

    fn slot(self) -> usize {
        match self {
            Qubit::Transport => 0,
            Qubit::Site => 1,
        }
    }
}

/// Hadamard pulse orders: `π/2` at `δ = −π/2` then `π` at `δ = 0`, or the
/// reverse order with the phase sign flipped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum HadamardVariant {
    HalfFirst,
    PiFirst,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Gate {
    X(Qubit),
    SqrtY(Qubit),
    SqrtYInv(Qubit),
    Z(Qubit),
    Hadamard(Qubit, HadamardVariant),
    /// Site qubit controls, transport qubit is the target.
    Cnot,
}

impl Gate {
    /// Parses `X`, `Y+1/2`, `Y-1/2`, `Z`, `H`, `H'` with an optional
    /// `:1`/`:2` qubit suffix (default 2, the site), and `CNOT`.
    pub fn parse(s: &str) -> Result<Self> {
        let (name, qubit) = match s.split_once(':') {
            Some((n, q)) => (n, Qubit::from_number(q)),
            None => (s, Some(Qubit::Site)),
        };
        let q = qubit.ok_or_else(|| Error::validation(format!("gate `{s}`: qubit must be 1 or 2")))?;
        Ok(match name {
            "X" => Gate::X(q),
            "Y1/2" | "Y+1/2" => Gate::SqrtY(q),
            "Y-1/2" => Gate::SqrtYInv(q),
            "Z" => Gate::Z(q),
            "H" => Gate::Hadamard(q, HadamardVariant::HalfFirst),
            "H'" => Gate::Hadamard(q, HadamardVariant::PiFirst),
            "CNOT" if !s.contains(':') => Gate::Cnot,
            _ => return Err(Error::validation(format!("unsupported gate `{s}`"))),
        })
    }
}

/// Rabi frequency of one transition between eigenstates, 0-based indices
/// with `lower` below `upper` in energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransitionRate {
    pub lower: usize,
    pub upper: usize,
    /// GHz
    pub rabi_frequency: f64,
}

/// One compiled pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompiledPulse {
    pub lower: usize,
    pub upper: usize,
    /// Rotation angle `θ`.
    pub angle: f64,
    /// Drive phase δ, including virtual-Z offsets.
    pub phase: f64,
    /// GHz
    pub frequency: f64,
    pub t_start: f64,
    pub t_end: f64,
}

/// Compiled gate sequence: pulses plus the virtual Z frame left at the end.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompiledCircuit {
    pub pulses: Vec<CompiledPulse>,
    /// Pending Z-rotation angle per qubit (transport, site).
    pub frame: [f64; 2],
    pub t_start: f64,
    pub t_end: f64,
}

/// Qubit-space index (`2 q_transport + q_site`) of each charge-1 eigenstate,
/// ordered by energy, for the two-spin model with the site Larmor frequency
/// above the transport one. This is the map `|1⟩…|4⟩ → 00, 10, 01, 11`.
pub fn qubit_index_of_level(level: usize) -> Option<usize> {
    [0, 2, 1, 3].get(level).copied()
}

/// Transition (as 0-based charge-1 levels) flipping `qubit` with the other
/// qubit in `|0⟩`.
fn single_qubit_transition(q: Qubit) -> (usize, usize) {
    match q {
        Qubit::Transport => (0, 1),
        Qubit::Site => (0, 2),
    }
}

/// The CNOT transition `|01⟩ ↔ |11⟩`.
pub const CNOT_TRANSITION: (usize, usize) = (2, 3);

pub struct Compiler<'a> {
    basis: &'a EigenBasis,
    levels: Vec<usize>,
    rates: &'a [TransitionRate],
}

impl<'a> Compiler<'a> {
    /// Rates are given on eigenstate indices; the qubit levels are the four
    /// lowest charge-1 eigenstates.
    pub fn new(basis: &'a EigenBasis, rates: &'a [TransitionRate]) -> Result<Self> {
        let levels: Vec<usize> = basis.states_with_charge(1).into_iter().take(4).collect();
        if levels.len() < 4 {
            return Err(Error::validation("gate compilation needs four charge-1 levels"));
        }
        Ok(Compiler { basis, levels, rates })
    }

    fn rate(&self, pair: (usize, usize)) -> Result<(usize, usize, f64, f64)> {
        let (a, b) = (self.levels[pair.0], self.levels[pair.1]);
        let found = self
            .rates
            .iter()
            .find(|r| (r.lower == a && r.upper == b) || (r.lower == b && r.upper == a))
            .ok_or_else(|| {
                Error::validation(format!(
                    "missing Rabi calibration for transition {}-{}",
                    pair.0 + 1,
                    pair.1 + 1
                ))
            })?;
        if !(found.rabi_frequency > 0.0) {
            return Err(Error::validation("Rabi frequency must be > 0"));
        }
        Ok((a, b, self.basis.gap(b, a), found.rabi_frequency))
    }

    /// Compiles `gates` back to back from `t_start`.
    pub fn compile(&self, gates: &[Gate], t_start: f64) -> Result<CompiledCircuit> {
        let mut pulses = Vec::new();
        let mut frame = [0.0f64; 2];
        let mut t = t_start;
        let mut emit = |pair: (usize, usize), angle: f64, phase: f64, t: &mut f64| -> Result<()> {
            let (lower, upper, frequency, rabi) = self.rate(pair)?;
            let duration = angle / (TWO_PI * rabi);
            pulses.push(CompiledPulse {
                lower,
                upper,
                angle,
                phase,
                frequency,
                t_start: *t,
                t_end: *t + duration,
            });
            *t += duration;
            Ok(())
        };
        for g in gates {
            match *g {
                Gate::X(q) => emit(single_qubit_transition(q), PI, frame[q.slot()], &mut t)?,
                Gate::SqrtY(q) => emit(single_qubit_transition(q), FRAC_PI_2, -FRAC_PI_2 + frame[q.slot()], &mut t)?,
                Gate::SqrtYInv(q) => emit(single_qubit_transition(q), FRAC_PI_2, FRAC_PI_2 + frame[q.slot()], &mut t)?,
                Gate::Z(q) => frame[q.slot()] += PI,
                Gate::Hadamard(q, HadamardVariant::HalfFirst) => {
                    emit(single_qubit_transition(q), FRAC_PI_2, -FRAC_PI_2 + frame[q.slot()], &mut t)?;
                    emit(single_qubit_transition(q), PI, frame[q.slot()], &mut t)?;
                }
                Gate::Hadamard(q, HadamardVariant::PiFirst) => {
                    emit(single_qubit_transition(q), PI, frame[q.slot()], &mut t)?;
                    emit(single_qubit_transition(q), FRAC_PI_2, FRAC_PI_2 + frame[q.slot()], &mut t)?;
                }
                Gate::Cnot => emit(CNOT_TRANSITION, PI, frame[Qubit::Transport.slot()], &mut t)?,
            }
        }
        Ok(CompiledCircuit {
            pulses,
            frame,
            t_start,
            t_end: t,
        })
    }
}

impl CompiledCircuit {
    /// Pulse program covering `[t_start, t_final]` with a trailing undriven
    /// window when `t_final` is past the last pulse.
    pub fn to_program(&self, t_final: f64) -> Result<PulseProgram> {
        if t_final < self.t_end - 1e-9 {
            return Err(Error::validation("final time ends before the last pulse"));
        }
        let mut segments: Vec<PulseSegment> = self
            .pulses
            .iter()
            .map(|p| PulseSegment::new(p.t_start, p.t_end, p.frequency, p.phase))
            .collect();
        let last_frequency = self.pulses.last().map(|p| p.frequency).unwrap_or(0.0);
        if t_final > self.t_end + 1e-9 || segments.is_empty() {
            segments.push(PulseSegment::free(self.t_end, t_final.max(self.t_end + 1e-9), last_frequency));
        }
        PulseProgram::new(self.t_start, segments.last().expect("non-empty").t_end, segments)
    }

    /// Ideal rotating-frame unitary on the qubit space (`2 q_transport +
    /// q_site` ordering), each pulse acting on its two levels only and the
    /// pending frame applied last.
    pub fn ideal_unitary(&self, basis: &EigenBasis) -> Result<CMat> {
        let levels = basis.states_with_charge(1);
        let qubit_of = |state: usize| -> Result<usize> {
            levels
                .iter()
                .position(|&s| s == state)
                .and_then(qubit_index_of_level)
                .ok_or_else(|| Error::validation("pulse outside the qubit levels"))
        };
        let mut total = CMat::identity(4, 4);
        for p in &self.pulses {
            let (a, b) = (qubit_of(p.lower)?, qubit_of(p.upper)?);
            total = embed(&rotating_frame_unitary(p.angle, p.phase), a, b) * total;
        }
        Ok(frame_unitary(self.frame) * total)
    }
}

/// 2×2 unitary acting on qubit-space states `a` (first) and `b`.
pub fn embed(u: &CMat, a: usize, b: usize) -> CMat {
    let mut m = CMat::identity(4, 4);
    m[(a, a)] = u[(0, 0)];
    m[(a, b)] = u[(0, 1)];
    m[(b, a)] = u[(1, 0)];
    m[(b, b)] = u[(1, 1)];
    m
}

/// `Z^{φ_t/π} ⊗ Z^{φ_s/π}` as `diag(1, e^{iφ})` per qubit.
fn frame_unitary(frame: [f64; 2]) -> CMat {
    let z = |phi: f64, bit: usize| if bit == 1 { C64::from_polar(1.0, phi) } else { ONE };
    CMat::from_fn(4, 4, |i, j| if i == j { z(frame[0], i / 2) * z(frame[1], i % 2) } else { ZERO })
}

/// Bell-state phase conventions for the half-angle pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BellVariant {
    /// `π/2` pulse at `δ = +π/2`.
    PlusHalfPi,
    /// `π/2` pulse at `δ = −π/2`.
    MinusHalfPi,
}

/// `X` on the site qubit, a half-angle pulse, then CNOT, followed by free
/// evolution up to `t_final`.
pub fn bell_state_program(
    basis: &EigenBasis,
    rates: &[TransitionRate],
    variant: BellVariant,
    t_final: f64,
) -> Result<(CompiledCircuit, PulseProgram)> {
    let half = match variant {
        BellVariant::PlusHalfPi => Gate::SqrtYInv(Qubit::Site),
        BellVariant::MinusHalfPi => Gate::SqrtY(Qubit::Site),
    };
    let circuit = Compiler::new(basis, rates)?.compile(&[Gate::X(Qubit::Site), half, Gate::Cnot], 0.0)?;
    let program = circuit.to_program(t_final)?;
    Ok((circuit, program))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{phase_distance, unitarity_deviation};
    use crate::reference::appendix_model;
    use proptest::prelude::*;

    fn basis() -> EigenBasis {
        EigenBasis::new(&appendix_model(), [1.0, 0.0, 0.0]).unwrap()
    }

    fn reference_rates(b: &EigenBasis) -> Vec<TransitionRate> {
        // π-times of 200 ns and 16.31 ns
        vec![
            TransitionRate {
                lower: 0,
                upper: 2,
                rabi_frequency: 1.0 / 400.0,
            },
            TransitionRate {
                lower: 2,
                upper: 3,
                rabi_frequency: 1.0 / (2.0 * 16.31),
            },
            TransitionRate {
                lower: 0,
                upper: b.states_with_charge(1)[1],
                rabi_frequency: 0.01,
            },
        ]
    }

    fn max_dev(a: &CMat, b: &CMat) -> f64 {
        (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn rotating_frame_examples() {
        assert!(max_dev(&rotating_frame_unitary(PI, 0.0), &pauli_x().map(|z| -I * z)) < 1e-15);
        assert!(max_dev(&rotating_frame_unitary(0.0, 0.3), &CMat::identity(2, 2)) < 1e-15);
        assert!(phase_distance(&rotating_frame_unitary(FRAC_PI_2, -FRAC_PI_2), &sqrt_y()) < 1e-12);
        assert!(max_dev(&(&sqrt_y() * &sqrt_y()), &pauli_y()) < 1e-15);
    }

    #[test]
    fn lab_frame_examples() {
        assert!(max_dev(&lab_frame_unitary(1.0, 0.4, 16.0, 0.0), &rotating_frame_unitary(1.0, 0.4)) < 1e-15);
        let u = lab_frame_unitary(PI, 0.2, 16.0, 3.7);
        assert!(u[(0, 0)].norm() < 1e-15 && u[(1, 1)].norm() < 1e-15);
        // the diag(1, e^{−iω₀t}) transform agrees up to a global phase
        let w = TWO_PI * 16.0 * 3.7;
        let d = CMat::from_row_slice(2, 2, &[ONE, ZERO, ZERO, C64::from_polar(1.0, -w)]);
        assert!(phase_distance(&(d * &u), &rotating_frame_unitary(PI, 0.2)) < 1e-12);
    }

    #[test]
    fn gate_identities() {
        let y_half = rotating_frame_unitary(FRAC_PI_2, -FRAC_PI_2);
        let x = rotating_frame_unitary(PI, 0.0);
        // H = Y^{1/2} Z and H = X Y^{1/2}
        assert!(phase_distance(&(&sqrt_y() * pauli_z()), &hadamard()) < 1e-12);
        assert!(phase_distance(&(pauli_x() * sqrt_y()), &hadamard()) < 1e-12);
        // the two Hadamard pulse orders, each equal to −iH exactly
        let minus_i_h = hadamard().map(|z| -I * z);
        assert!(max_dev(&(&x * &y_half), &minus_i_h) < 1e-12);
        let y_half_inv = rotating_frame_unitary(FRAC_PI_2, FRAC_PI_2);
        assert!(max_dev(&(&y_half_inv * &x), &minus_i_h) < 1e-12);
    }

    #[test]
    fn compiled_hadamards() {
        let b = basis();
        let rates = reference_rates(&b);
        let compiler = Compiler::new(&b, &rates).unwrap();
        let site_h = embed(&hadamard(), 0, 1);
        for v in [HadamardVariant::HalfFirst, HadamardVariant::PiFirst] {
            let c = compiler.compile(&[Gate::Hadamard(Qubit::Site, v)], 0.0).unwrap();
            assert_eq!(c.pulses.len(), 2);
            let u = c.ideal_unitary(&b).unwrap();
            // acts as H on the site qubit with the transport qubit in |0⟩
            let block = u.view((0, 0), (2, 2)).into_owned();
            assert!(phase_distance(&block, &hadamard()) < 1e-12);
            let want = site_h.view((0, 0), (2, 2)).into_owned();
            assert!(max_dev(&block, &want.map(|z| -I * z)) < 1e-12);
        }
        // virtual Z: Y^{1/2} after Z needs one physical pulse
        let c = compiler.compile(&[Gate::Z(Qubit::Site), Gate::SqrtY(Qubit::Site)], 0.0).unwrap();
        assert_eq!(c.pulses.len(), 1);
        let u = c.ideal_unitary(&b).unwrap();
        assert!(phase_distance(&u.view((0, 0), (2, 2)).into_owned(), &hadamard()) < 1e-12);
    }

    #[test]
    fn cnot_fragment() {
        let b = basis();
        let rates = reference_rates(&b);
        let c = Compiler::new(&b, &rates).unwrap().compile(&[Gate::Cnot], 10.0).unwrap();
        let p = c.pulses[0];
        assert!((p.frequency - 15.359).abs() < 0.01, "{}", p.frequency);
        assert!((p.t_end - p.t_start - 16.31).abs() < 1e-9);
        assert_eq!(p.t_start, 10.0);
        // CNOT on the subspace the pulse touches, up to phase there
        let u = c.ideal_unitary(&b).unwrap();
        let cnot = cnot_site_control();
        let rows = [1, 3];
        let sub = CMat::from_fn(2, 2, |i, j| u[(rows[i], rows[j])]);
        let want = CMat::from_fn(2, 2, |i, j| cnot[(rows[i], rows[j])]);
        assert!(phase_distance(&sub, &want) < 1e-12);
        assert!(unitarity_deviation(&u) < 1e-12);
    }

    #[test]
    fn bell_program_intermediate_states() {
        let b = basis();
        let rates = reference_rates(&b);
        let (circuit, program) = bell_state_program(&b, &rates, BellVariant::PlusHalfPi, 750.0).unwrap();
        let times: Vec<f64> = program.segments.iter().map(|s| s.t_end).collect();
        assert!((times[0] - 200.0).abs() < 1e-9);
        assert!((times[1] - 300.0).abs() < 1e-9);
        assert!((times[2] - 316.31).abs() < 1e-9);
        assert_eq!(times[3], 750.0);
        assert!((program.segments[1].frequencies[0].phase - FRAC_PI_2).abs() < 1e-15);

        let zero = CMat::from_fn(4, 1, |i, _| if i == 0 { ONE } else { ZERO });
        let mut psi = zero.clone();
        let levels = b.states_with_charge(1);
        let q = |s: usize| qubit_index_of_level(levels.iter().position(|&x| x == s).unwrap()).unwrap();
        let step = |p: &CompiledPulse| embed(&rotating_frame_unitary(p.angle, p.phase), q(p.lower), q(p.upper));
        psi = step(&circuit.pulses[0]) * psi;
        assert!((psi[(1, 0)] - (-I)).norm() < 1e-12);
        psi = step(&circuit.pulses[1]) * psi;
        let h = c(0.0, -std::f64::consts::FRAC_1_SQRT_2);
        assert!((psi[(0, 0)] - h).norm() < 1e-12 && (psi[(1, 0)] - h).norm() < 1e-12);
        psi = step(&circuit.pulses[2]) * psi;
        // Bell-type state: equal weight on |00⟩ and |11⟩
        assert!((psi[(0, 0)].norm_sqr() - 0.5).abs() < 1e-12);
        assert!((psi[(3, 0)].norm_sqr() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn gate_parsing() {
        assert_eq!(Gate::parse("X").unwrap(), Gate::X(Qubit::Site));
        assert_eq!(Gate::parse("Y-1/2:1").unwrap(), Gate::SqrtYInv(Qubit::Transport));
        assert_eq!(Gate::parse("H'").unwrap(), Gate::Hadamard(Qubit::Site, HadamardVariant::PiFirst));
        assert_eq!(Gate::parse("CNOT").unwrap(), Gate::Cnot);
        assert!(Gate::parse("T").is_err());
        assert!(Gate::parse("X:3").is_err());
    }

    #[test]
    fn missing_calibration() {
        let b = basis();
        let rates = vec![];
        assert!(Compiler::new(&b, &rates).unwrap().compile(&[Gate::Cnot], 0.0).is_err());
    }

    proptest! {
        #[test]
        fn same_phase_angles_add(t1 in -7.0f64..7.0, t2 in -7.0f64..7.0, d in -7.0f64..7.0) {
            let lhs = rotating_frame_unitary(t1, d) * rotating_frame_unitary(t2, d);
            prop_assert!(max_dev(&lhs, &rotating_frame_unitary(t1 + t2, d)) < 1e-12);
        }

        #[test]
        fn frames_agree(theta in 0.0f64..7.0, d in -4.0f64..4.0, f0 in 1.0f64..40.0, t in 0.0f64..100.0) {
            let lab = lab_frame_unitary(theta, d, f0, t);
            prop_assert!(unitarity_deviation(&lab) < 1e-12);
            prop_assert!(max_dev(&to_rotating_frame(&lab, f0, t), &rotating_frame_unitary(theta, d)) < 1e-12);
        }
    }
}
