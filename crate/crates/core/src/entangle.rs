//! Two-qubit reduction and entanglement measures.
//!
//! The qubits are the transport spin and one spin-½ site, labelled by their
//! projections on the label axis: `|0⟩` is `m = −½`, `|1⟩` is `m = +½`, and
//! the two-qubit index is `2 q_transport + q_site`. Complex conjugation in
//! the concurrence is taken in this basis.

use std::ops::ControlFlow;

use serde::Serialize;

use crate::eigen::EigenBasis;
use crate::error::{Error, Result};
use crate::linalg::{c, eigvalsh, hermitian_sqrt, CMat, C64, ZERO};
use crate::propagate::{Observer, SampleClock, StepState};

/// Leakage above which the qubit subspace no longer dominates.
pub const LEAKAGE_WARNING: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BellLabel {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl BellLabel {
    pub const ALL: [BellLabel; 4] = [BellLabel::PhiPlus, BellLabel::PhiMinus, BellLabel::PsiPlus, BellLabel::PsiMinus];

    pub fn name(self) -> &'static str {
        match self {
            BellLabel::PhiPlus => "phi+",
            BellLabel::PhiMinus => "phi-",
            BellLabel::PsiPlus => "psi+",
            BellLabel::PsiMinus => "psi-",
        }
    }

    /// Amplitudes on `|00⟩, |01⟩, |10⟩, |11⟩`.
    pub fn vector(self) -> [C64; 4] {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let (p, m) = (c(h, 0.0), c(-h, 0.0));
        match self {
            BellLabel::PhiPlus => [p, ZERO, ZERO, p],
            BellLabel::PhiMinus => [p, ZERO, ZERO, m],
            BellLabel::PsiPlus => [ZERO, p, p, ZERO],
            BellLabel::PsiMinus => [ZERO, p, m, ZERO],
        }
    }
}

/// The density matrix restricted to the qubit subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoQubitState {
    /// Renormalized to unit trace.
    pub rho4: CMat,
    /// Projection before renormalization.
    pub raw: CMat,
    /// Weight outside the qubit subspace.
    pub leakage: f64,
}

impl TwoQubitState {
    pub fn from_matrix(rho4: CMat) -> Result<Self> {
        if rho4.nrows() != 4 || rho4.ncols() != 4 {
            return Err(Error::DimensionMismatch {
                expected: 4,
                found: rho4.nrows(),
            });
        }
        Ok(TwoQubitState {
            raw: rho4.clone(),
            rho4,
            leakage: 0.0,
        })
    }

    pub fn leakage_warning(&self) -> bool {
        self.leakage > LEAKAGE_WARNING
    }
}

/// Columns: the qubit states `|00⟩ … |11⟩` in the eigenbasis.
pub fn qubit_basis(basis: &EigenBasis) -> Result<CMat> {
    let dims = &basis.catalog.local_dims;
    if dims.as_slice() != [4, 2] {
        return Err(Error::validation(
            "the qubit mapping needs exactly one spin-1/2 site besides the transport orbital",
        ));
    }
    let labels = basis.label_states_in_eigenbasis();
    // product index = 2·occupation + site slot; occupation 1 = +½, 2 = −½;
    // site slot 0 = +½, 1 = −½
    let columns: Vec<usize> = (0..4)
        .map(|q| {
            let (qt, qs) = (q / 2, q % 2);
            let occupation = if qt == 0 { 2 } else { 1 };
            let slot = if qs == 0 { 1 } else { 0 };
            2 * occupation + slot
        })
        .collect();
    Ok(CMat::from_fn(basis.dim(), 4, |r, k| labels[(r, columns[k])]))
}

/// Projects `rho` (eigenbasis) onto the qubit subspace given by
/// [`qubit_basis`].
pub fn reduce_with(rho: &CMat, qubits: &CMat) -> Result<TwoQubitState> {
    if rho.nrows() != qubits.nrows() {
        return Err(Error::DimensionMismatch {
            expected: qubits.nrows(),
            found: rho.nrows(),
        });
    }
    let raw = qubits.adjoint() * rho * qubits;
    let kept = raw.trace().re;
    let total = rho.trace().re;
    if !(kept > 0.0) {
        return Err(Error::validation("no weight in the qubit subspace"));
    }
    Ok(TwoQubitState {
        rho4: raw.unscale(kept),
        raw,
        leakage: (total - kept).max(0.0),
    })
}

pub fn reduce_to_qubits(rho: &CMat, basis: &EigenBasis) -> Result<TwoQubitState> {
    reduce_with(rho, &qubit_basis(basis)?)
}

fn overlap(m: &CMat, v: &[C64; 4]) -> f64 {
    let mut acc = ZERO;
    for i in 0..4 {
        for j in 0..4 {
            acc += v[i].conj() * m[(i, j)] * v[j];
        }
    }
    acc.re
}

/// `⟨B|ρ|B⟩` of the renormalized state.
pub fn fidelity(state: &TwoQubitState, target: BellLabel) -> f64 {
    overlap(&state.rho4, &target.vector()).clamp(0.0, 1.0)
}

/// `⟨B|ρ|B⟩` without renormalization.
pub fn fidelity_raw(state: &TwoQubitState, target: BellLabel) -> f64 {
    overlap(&state.raw, &target.vector()).clamp(0.0, 1.0)
}

/// `(σ_y ⊗ σ_y) ρ* (σ_y ⊗ σ_y)`.
pub fn spin_flip(rho: &CMat) -> CMat {
    // σ_y ⊗ σ_y is real: anti-diagonal (−1, 1, 1, −1)
    let sign = [-1.0, 1.0, 1.0, -1.0];
    CMat::from_fn(4, 4, |i, j| rho[(3 - i, 3 - j)].conj() * (sign[i] * sign[j]))
}

/// Wootters concurrence of the renormalized state.
pub fn concurrence(state: &TwoQubitState) -> f64 {
    concurrence_of(&state.rho4)
}

pub fn concurrence_of(rho: &CMat) -> f64 {
    let s = hermitian_sqrt(rho);
    let r = &s * spin_flip(rho) * &s;
    let mut lambdas: Vec<f64> = eigvalsh(&r).into_iter().map(|x| x.max(0.0).sqrt()).collect();
    lambdas.sort_by(|a, b| b.total_cmp(a));
    (lambdas[0] - lambdas[1] - lambdas[2] - lambdas[3]).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundReport {
    pub fidelities: [f64; 4],
    pub max_fidelity: f64,
    pub best: BellLabel,
    pub concurrence: f64,
    /// `(1 + C)/2 + 1e-9 ≥ max F`.
    pub holds: bool,
}

pub fn bound_check(state: &TwoQubitState) -> BoundReport {
    let fidelities = BellLabel::ALL.map(|b| fidelity(state, b));
    let (k, &max_fidelity) = fidelities
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("four targets");
    let concurrence = concurrence(state);
    BoundReport {
        fidelities,
        max_fidelity,
        best: BellLabel::ALL[k],
        concurrence,
        holds: (1.0 + concurrence) / 2.0 + 1e-9 >= max_fidelity,
    }
}

/// Entanglement observables sampled along a trajectory.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct EntanglementTrace {
    pub times: Vec<f64>,
    /// Renormalized fidelities in [`BellLabel::ALL`] order.
    pub fidelity: Vec<[f64; 4]>,
    pub fidelity_raw: Vec<[f64; 4]>,
    pub concurrence: Vec<f64>,
    pub leakage: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntanglementSummary {
    pub peak_fidelity: f64,
    pub peak_fidelity_target: BellLabel,
    pub peak_fidelity_time: f64,
    pub peak_concurrence: f64,
    pub peak_concurrence_time: f64,
    /// Exponential decay time of C after its peak, ns; `None` when C does not
    /// decay or too few samples follow the peak.
    pub concurrence_decay_time: Option<f64>,
    pub max_leakage: f64,
}

impl EntanglementTrace {
    pub fn summary(&self) -> Option<EntanglementSummary> {
        if self.times.is_empty() {
            return None;
        }
        let (mut pf, mut pk, mut pt) = (f64::NEG_INFINITY, 0, 0.0);
        for (i, f) in self.fidelity.iter().enumerate() {
            for (k, &v) in f.iter().enumerate() {
                if v > pf {
                    (pf, pk, pt) = (v, k, self.times[i]);
                }
            }
        }
        let ic = self
            .concurrence
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)?;
        Some(EntanglementSummary {
            peak_fidelity: pf,
            peak_fidelity_target: BellLabel::ALL[pk],
            peak_fidelity_time: pt,
            peak_concurrence: self.concurrence[ic],
            peak_concurrence_time: self.times[ic],
            concurrence_decay_time: decay_time(&self.times[ic..], &self.concurrence[ic..]),
            max_leakage: self.leakage.iter().copied().fold(0.0, f64::max),
        })
    }
}

/// Least-squares fit of `ln y` against `t`; returns `−1/slope`.
fn decay_time(t: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = t.iter().zip(y).filter(|(_, &v)| v > 1e-9).map(|(&a, &v)| (a, v.ln())).collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let (mt, my) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x / n, b + y / n));
    let (sxy, sxx) = pts
        .iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + (x - mt) * (y - my), b + (x - mt) * (x - mt)));
    if !(sxx > 0.0) {
        return None;
    }
    let slope = sxy / sxx;
    (slope < 0.0).then(|| -1.0 / slope)
}

/// Observer that evaluates fidelities, concurrence and leakage every
/// `interval` ns, on the same sample times as
/// [`TrajectoryRecorder`](crate::propagate::TrajectoryRecorder).
pub struct EntanglementRecorder {
    clock: SampleClock,
    qubits: CMat,
    pub trace: EntanglementTrace,
}

impl EntanglementRecorder {
    pub fn new(basis: &EigenBasis, interval: f64) -> Result<Self> {
        if !(interval > 0.0) {
            return Err(Error::validation("sample interval must be > 0"));
        }
        Ok(EntanglementRecorder {
            clock: SampleClock::new(interval),
            qubits: qubit_basis(basis)?,
            trace: EntanglementTrace::default(),
        })
    }
}

impl Observer for EntanglementRecorder {
    fn observe(&mut self, state: &StepState<'_>) -> ControlFlow<()> {
        if !self.clock.due(state.t) {
            return ControlFlow::Continue(());
        }
        let tr = &mut self.trace;
        tr.times.push(state.t);
        match reduce_with(&state.rho(), &self.qubits) {
            Ok(q) => {
                tr.fidelity.push(BellLabel::ALL.map(|b| fidelity(&q, b)));
                tr.fidelity_raw.push(BellLabel::ALL.map(|b| fidelity_raw(&q, b)));
                tr.concurrence.push(concurrence(&q));
                tr.leakage.push(q.leakage);
            }
            Err(_) => {
                tr.fidelity.push([0.0; 4]);
                tr.fidelity_raw.push([0.0; 4]);
                tr.concurrence.push(0.0);
                tr.leakage.push(1.0);
            }
        }
        ControlFlow::Continue(())
    }
}
