//! Time propagation of the master equation.
//!
//! Only same-charge density-matrix entries are evolved (see
//! [`PairSpace`]). The coherent phases are integrated exactly by working in
//! the interaction picture `x̃_k = e^{2πi Δ_k t} ρ_k`, and the dissipative
//! part is stepped with fixed-step RK4 whose steps never straddle a pulse
//! edge.

use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use crate::eigen::EigenBasis;
use crate::error::{Error, Result};
use crate::linalg::{c, eigvalsh, hermiticity_deviation, CMat, C64, ZERO};
use crate::pulse::{PulseProgram, PulseSegment};
use crate::rates::{ElectrodeLabel, ElectrodeSpec, KernelOptions};
use crate::tensor::{electrode_rate_tensor, liouvillian, PairSpace, RateTensor, SparseMatrix};
use crate::units::{kelvin_to_ghz, PA_PER_ELECTRON_PER_NS, TWO_PI};

/// Abort thresholds during propagation.
pub const TRACE_ABORT: f64 = 1e-6;
pub const POSITIVITY_ABORT: f64 = -1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InitialState {
    Ground,
    /// Gibbs state at the given temperature (K).
    Thermal(f64),
    /// Diagonal weights in the eigenbasis, normalized on use.
    Custom(Vec<f64>),
}

pub fn initial_state(basis: &EigenBasis, mode: &InitialState) -> Result<CMat> {
    let n = basis.dim();
    let weights: Vec<f64> = match mode {
        InitialState::Ground => (0..n).map(|k| if k == 0 { 1.0 } else { 0.0 }).collect(),
        InitialState::Thermal(t) => {
            if !(*t > 0.0) {
                return Err(Error::validation("thermal initial state needs a temperature > 0"));
            }
            let kt = kelvin_to_ghz(*t);
            basis.energies.iter().map(|e| (-e / kt).exp()).collect()
        }
        InitialState::Custom(w) => {
            if w.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: w.len(),
                });
            }
            if w.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
                return Err(Error::validation("custom weights must be finite and non-negative"));
            }
            w.clone()
        }
    };
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::validation("initial-state weights are all zero"));
    }
    let mut rho = CMat::zeros(n, n);
    for (k, w) in weights.iter().enumerate() {
        rho[(k, k)] = c(w / total, 0.0);
    }
    Ok(rho)
}

/// Synthetic coherent drive `H_d = Ω cos(2π ω t + δ) (|a⟩⟨b| + |b⟩⟨a|)`
/// between two eigenstates of equal charge, all in GHz. On resonance and
/// for `Ω ≪ ω` it produces Rabi flopping at frequency `Ω`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherentDrive {
    pub state_a: usize,
    pub state_b: usize,
    pub rabi_frequency: f64,
    pub frequency: f64,
    pub phase: f64,
}

struct ElectrodeTerm {
    label: ElectrodeLabel,
    amplitude: f64,
    /// Row functional giving the electron inflow `Tr(N L_α ρ)` per ns.
    inflow: Vec<C64>,
}

/// The master equation compiled for one eigenbasis and electrode set.
pub struct QmeSystem<'a> {
    basis: &'a EigenBasis,
    space: PairSpace,
    /// Angular frequencies `2π Δ_k` of the pairs.
    omegas: Vec<f64>,
    diagonal: Vec<usize>,
    blocks: Vec<Vec<usize>>,
    /// Static, linear and quadratic parts in the drive signal.
    m0: SparseMatrix,
    m1: SparseMatrix,
    m2: SparseMatrix,
    electrodes: Vec<ElectrodeTerm>,
    coherent: Option<(SparseMatrix, CoherentDrive)>,
    driven: bool,
}

fn combine(space: &PairSpace, parts: &[(f64, &RateTensor)]) -> SparseMatrix {
    let scaled: Vec<RateTensor> = parts.iter().map(|(f, t)| t.scaled(*f)).collect();
    let sum = RateTensor::sum(space.dim, scaled.iter());
    liouvillian(space, &sum)
}

impl<'a> QmeSystem<'a> {
    pub fn new(
        basis: &'a EigenBasis,
        electrodes: &[ElectrodeSpec],
        kernel: &KernelOptions,
        coherent: Option<CoherentDrive>,
    ) -> Result<Self> {
        let space = PairSpace::new(basis);
        let tensors: Vec<RateTensor> = electrodes
            .iter()
            .map(|e| electrode_rate_tensor(basis, e, kernel))
            .collect::<Result<_>>()?;
        let m0 = combine(&space, &tensors.iter().map(|t| (1.0, t)).collect::<Vec<_>>());
        let m1 = combine(
            &space,
            &tensors
                .iter()
                .zip(electrodes)
                .map(|(t, e)| (2.0 * e.drive_amplitude, t))
                .collect::<Vec<_>>(),
        );
        let m2 = combine(
            &space,
            &tensors
                .iter()
                .zip(electrodes)
                .map(|(t, e)| (e.drive_amplitude * e.drive_amplitude, t))
                .collect::<Vec<_>>(),
        );
        let number: Vec<C64> = space
            .pairs
            .iter()
            .map(|&(l, j)| if l == j { c(basis.charge_of_state[l] as f64, 0.0) } else { ZERO })
            .collect();
        let driven = coherent.is_some()
            || tensors
                .iter()
                .zip(electrodes)
                .any(|(t, e)| e.drive_amplitude != 0.0 && !t.is_zero());
        let electrode_terms = tensors
            .iter()
            .zip(electrodes)
            .map(|(t, e)| ElectrodeTerm {
                label: e.label,
                amplitude: e.drive_amplitude,
                inflow: liouvillian(&space, t).row_functional(&number),
            })
            .collect();
        let coherent = match coherent {
            None => None,
            Some(d) => Some((coherent_liouvillian(basis, &space, &d)?, d)),
        };
        let omegas = space.pairs.iter().map(|&(l, j)| TWO_PI * basis.gap(l, j)).collect();
        let diagonal = space
            .pairs
            .iter()
            .enumerate()
            .filter(|(_, (l, j))| l == j)
            .map(|(k, _)| k)
            .collect();
        let blocks = (0u8..=2).map(|q| basis.states_with_charge(q)).filter(|b| !b.is_empty()).collect();
        Ok(QmeSystem {
            basis,
            space,
            omegas,
            diagonal,
            blocks,
            m0,
            m1,
            m2,
            electrodes: electrode_terms,
            coherent,
            driven,
        })
    }

    pub fn basis(&self) -> &EigenBasis {
        self.basis
    }

    pub fn pair_space(&self) -> &PairSpace {
        &self.space
    }

    /// Whether any drive can act: a modulated, coupled electrode or a
    /// coherent drive.
    pub fn is_driven(&self) -> bool {
        self.driven
    }

    pub fn electrode_labels(&self) -> Vec<ElectrodeLabel> {
        self.electrodes.iter().map(|e| e.label).collect()
    }

    /// Default step: 1/50 of the period of the fastest same-charge
    /// coherence.
    pub fn default_dt(&self) -> f64 {
        default_dt(self.basis)
    }

    fn phases(&self, t: f64, out: &mut [C64]) {
        for (p, w) in out.iter_mut().zip(&self.omegas) {
            *p = C64::from_polar(1.0, w * t);
        }
    }

    /// Drive signal `scale · Σ cos(2π ω t + δ)`, zero when undriven.
    fn signal(seg: &PulseSegment, t: f64) -> f64 {
        if !seg.is_driven() {
            return 0.0;
        }
        seg.amplitude_scale
            * seg
                .frequencies
                .iter()
                .map(|f| (TWO_PI * f.omega * t + f.phase).cos())
                .sum::<f64>()
    }

    fn rhs(&self, seg: &PulseSegment, t: f64, xt: &[C64], work: &mut Workspace, out: &mut [C64]) {
        self.phases(t, &mut work.phase);
        for k in 0..xt.len() {
            work.y[k] = xt[k] * work.phase[k].conj();
            out[k] = ZERO;
        }
        let s = Self::signal(seg, t);
        self.m0.mul_add(c(1.0, 0.0), &work.y, out);
        if s != 0.0 {
            self.m1.mul_add(c(s, 0.0), &work.y, out);
            self.m2.mul_add(c(s * s, 0.0), &work.y, out);
        }
        if let Some((m, d)) = &self.coherent {
            let f = (TWO_PI * d.frequency * t + d.phase).cos();
            m.mul_add(c(f, 0.0), &work.y, out);
        }
        for k in 0..xt.len() {
            out[k] *= work.phase[k];
        }
    }
}

/// Default step for a basis: `1 / (50 · max |Δ_lj|)` over same-charge pairs.
pub fn default_dt(basis: &EigenBasis) -> f64 {
    let gap = basis.max_same_charge_gap();
    if gap > 0.0 {
        1.0 / (50.0 * gap)
    } else {
        0.01
    }
}

fn coherent_liouvillian(basis: &EigenBasis, space: &PairSpace, d: &CoherentDrive) -> Result<SparseMatrix> {
    let n = basis.dim();
    if d.state_a >= n || d.state_b >= n || d.state_a == d.state_b {
        return Err(Error::validation("coherent drive needs two distinct eigenstates"));
    }
    if basis.charge_of_state[d.state_a] != basis.charge_of_state[d.state_b] {
        return Err(Error::validation("coherent drive must connect states of equal charge"));
    }
    // −2πi [H, ρ] with H = Ω (|a⟩⟨b| + |b⟩⟨a|)
    let mut trip = std::collections::BTreeMap::new();
    let coeff = c(0.0, -TWO_PI * d.rabi_frequency);
    for (a, b) in [(d.state_a, d.state_b), (d.state_b, d.state_a)] {
        for x in 0..n {
            // (Hρ)_{a x} = Ω ρ_{b x}
            if let (Some(r), Some(col)) = (space.index(a, x), space.index(b, x)) {
                *trip.entry((r, col)).or_insert(ZERO) += coeff;
            }
            // −(ρH)_{x b} = −Ω ρ_{x a}
            if let (Some(r), Some(col)) = (space.index(x, b), space.index(x, a)) {
                *trip.entry((r, col)).or_insert(ZERO) -= coeff;
            }
        }
    }
    Ok(SparseMatrix::from_triplets(space.len(), trip))
}

struct Workspace {
    phase: Vec<C64>,
    y: Vec<C64>,
    k1: Vec<C64>,
    k2: Vec<C64>,
    k3: Vec<C64>,
    k4: Vec<C64>,
    tmp: Vec<C64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        let z = vec![ZERO; n];
        Workspace {
            phase: z.clone(),
            y: z.clone(),
            k1: z.clone(),
            k2: z.clone(),
            k3: z.clone(),
            k4: z.clone(),
            tmp: z,
        }
    }
}

/// Read-only view of the state after a step.
pub struct StepState<'s> {
    pub t: f64,
    pub step: u64,
    system: &'s QmeSystem<'s>,
    xt: &'s [C64],
    signal: f64,
}

impl StepState<'_> {
    pub fn basis(&self) -> &EigenBasis {
        self.system.basis
    }

    /// Density matrix in the eigenbasis (lab frame).
    pub fn rho(&self) -> CMat {
        let mut phase = vec![ZERO; self.xt.len()];
        self.system.phases(self.t, &mut phase);
        let x: Vec<C64> = self.xt.iter().zip(&phase).map(|(v, p)| v * p.conj()).collect();
        self.system.space.scatter(&x)
    }

    pub fn populations(&self) -> Vec<f64> {
        let n = self.system.basis.dim();
        (0..n)
            .map(|k| self.xt[self.system.space.index(k, k).expect("diagonal pair")].re)
            .collect()
    }

    /// Population of eigenstate `k`.
    pub fn population(&self, k: usize) -> f64 {
        self.xt[self.system.space.index(k, k).expect("diagonal pair")].re
    }

    pub fn trace(&self) -> f64 {
        self.system.diagonal.iter().map(|&k| self.xt[k].re).sum()
    }

    /// Electron current from each electrode into the impurity, pA.
    pub fn currents(&self) -> Vec<f64> {
        let mut phase = vec![ZERO; self.xt.len()];
        self.system.phases(self.t, &mut phase);
        self.system
            .electrodes
            .iter()
            .map(|e| {
                let f = 1.0 + e.amplitude * self.signal;
                let flow: C64 = e
                    .inflow
                    .iter()
                    .zip(self.xt.iter().zip(&phase))
                    .map(|(w, (x, p))| w * x * p.conj())
                    .sum();
                PA_PER_ELECTRON_PER_NS * f * f * flow.re
            })
            .collect()
    }
}

pub trait Observer {
    /// Called with the initial state and after every step. Returning
    /// `Break` stops the propagation.
    fn observe(&mut self, state: &StepState<'_>) -> ControlFlow<()>;
}

impl<T: Observer + ?Sized> Observer for &mut T {
    fn observe(&mut self, state: &StepState<'_>) -> ControlFlow<()> {
        (**self).observe(state)
    }
}

impl<A: Observer, B: Observer> Observer for (A, B) {
    fn observe(&mut self, state: &StepState<'_>) -> ControlFlow<()> {
        self.0.observe(state)?;
        self.1.observe(state)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagationSettings {
    /// Step size; `None` uses [`default_dt`].
    pub dt: Option<f64>,
    /// Steps between positivity checks.
    pub positivity_check_every: u64,
}

impl Default for PropagationSettings {
    fn default() -> Self {
        PropagationSettings {
            dt: None,
            positivity_check_every: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropagationSummary {
    pub steps: u64,
    pub t_end: f64,
    pub dt: f64,
    pub stopped_early: bool,
    /// Final density matrix in the eigenbasis.
    pub rho_final: CMat,
}

fn min_block_eigenvalue(rho: &CMat, blocks: &[Vec<usize>]) -> f64 {
    let mut lowest = f64::INFINITY;
    for b in blocks {
        let sub = CMat::from_fn(b.len(), b.len(), |i, j| rho[(b[i], b[j])]);
        if let Some(&v) = eigvalsh(&sub).first() {
            lowest = lowest.min(v);
        }
    }
    lowest
}

/// Lowest eigenvalue of a density matrix that is block diagonal in charge.
pub fn min_eigenvalue(basis: &EigenBasis, rho: &CMat) -> f64 {
    let blocks: Vec<Vec<usize>> = (0u8..=2).map(|q| basis.states_with_charge(q)).filter(|b| !b.is_empty()).collect();
    min_block_eigenvalue(rho, &blocks)
}

/// Integrates from `program.t_initial` to `program.t_final`.
pub fn propagate_with<O: Observer>(
    system: &QmeSystem<'_>,
    program: &PulseProgram,
    rho0: &CMat,
    settings: &PropagationSettings,
    observer: &mut O,
) -> Result<PropagationSummary> {
    program.validate()?;
    let n = system.basis.dim();
    if rho0.nrows() != n || rho0.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: rho0.nrows(),
        });
    }
    if hermiticity_deviation(rho0) > 1e-12 {
        return Err(Error::validation("initial density matrix is not Hermitian"));
    }
    if (rho0.trace().re - 1.0).abs() > 1e-10 {
        return Err(Error::validation("initial density matrix does not have unit trace"));
    }
    if system.space.outside_weight(rho0) > 1e-12 {
        return Err(Error::validation(
            "initial density matrix has coherences between different charge states",
        ));
    }
    let dt = settings.dt.unwrap_or_else(|| system.default_dt());
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::validation("dt must be > 0"));
    }

    let dim = system.space.len();
    let mut work = Workspace::new(dim);
    let mut xt: Vec<C64> = {
        let mut phase = vec![ZERO; dim];
        system.phases(program.t_initial, &mut phase);
        system.space.gather(rho0).iter().zip(&phase).map(|(x, p)| x * p).collect()
    };
    let mut step: u64 = 0;
    let first = &program.segments[0];
    let flow = observer.observe(&StepState {
        t: program.t_initial,
        step,
        system,
        xt: &xt,
        signal: QmeSystem::signal(first, program.t_initial),
    });
    if flow.is_break() {
        return Ok(PropagationSummary {
            steps: 0,
            t_end: program.t_initial,
            dt,
            stopped_early: true,
            rho_final: rho0.clone(),
        });
    }
    let mut t = program.t_initial;
    for seg in &program.segments {
        let duration = seg.duration();
        let n_steps = ((duration / dt) - 1e-9).ceil().max(1.0) as u64;
        let h = duration / n_steps as f64;
        for k in 0..n_steps {
            let t0 = seg.t_start + k as f64 * h;
            rk4_step(system, seg, t0, h, &mut xt, &mut work);
            step += 1;
            t = if k + 1 == n_steps { seg.t_end } else { seg.t_start + (k + 1) as f64 * h };

            let state = StepState {
                t,
                step,
                system,
                xt: &xt,
                signal: QmeSystem::signal(seg, t),
            };
            let tr = state.trace();
            if !tr.is_finite() || (tr - 1.0).abs() > TRACE_ABORT {
                return Err(Error::NumericalAbort {
                    t,
                    message: format!("trace drifted to {tr:.12}"),
                });
            }
            if step.is_multiple_of(settings.positivity_check_every.max(1)) {
                let lowest = min_block_eigenvalue(&state.rho(), &system.blocks);
                if !(lowest >= POSITIVITY_ABORT) {
                    return Err(Error::NumericalAbort {
                        t,
                        message: format!("density matrix eigenvalue {lowest:e} below {POSITIVITY_ABORT:e}"),
                    });
                }
            }
            if observer.observe(&state).is_break() {
                return Ok(PropagationSummary {
                    steps: step,
                    t_end: t,
                    dt,
                    stopped_early: true,
                    rho_final: state.rho(),
                });
            }
        }
    }
    let state = StepState {
        t,
        step,
        system,
        xt: &xt,
        signal: 0.0,
    };
    Ok(PropagationSummary {
        steps: step,
        t_end: t,
        dt,
        stopped_early: false,
        rho_final: state.rho(),
    })
}

fn rk4_step(system: &QmeSystem<'_>, seg: &PulseSegment, t: f64, h: f64, x: &mut [C64], w: &mut Workspace) {
    let n = x.len();
    let mut k1 = std::mem::take(&mut w.k1);
    let mut k2 = std::mem::take(&mut w.k2);
    let mut k3 = std::mem::take(&mut w.k3);
    let mut k4 = std::mem::take(&mut w.k4);
    let mut tmp = std::mem::take(&mut w.tmp);
    system.rhs(seg, t, x, w, &mut k1);
    for i in 0..n {
        tmp[i] = x[i] + k1[i] * (0.5 * h);
    }
    system.rhs(seg, t + 0.5 * h, &tmp, w, &mut k2);
    for i in 0..n {
        tmp[i] = x[i] + k2[i] * (0.5 * h);
    }
    system.rhs(seg, t + 0.5 * h, &tmp, w, &mut k3);
    for i in 0..n {
        tmp[i] = x[i] + k3[i] * h;
    }
    system.rhs(seg, t + h, &tmp, w, &mut k4);
    for i in 0..n {
        x[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (h / 6.0);
    }
    w.k1 = k1;
    w.k2 = k2;
    w.k3 = k3;
    w.k4 = k4;
    w.tmp = tmp;
}

/// Sampled record of a propagation.
#[derive(Debug, Clone, Default, Serialize)]
pub struct DensityMatrixTrajectory {
    pub times: Vec<f64>,
    /// Eigenstate populations per sample.
    pub populations: Vec<Vec<f64>>,
    /// `⟨S_i^χ⟩` per sample, site (0 = transport) and axis.
    pub spin_expectations: Vec<Vec<[f64; 3]>>,
    /// Electron current into the impurity per sample and electrode, pA.
    pub current: Vec<Vec<f64>>,
    pub electrode_labels: Vec<ElectrodeLabel>,
    /// Thinned density-matrix snapshots `(time, ρ)`.
    #[serde(skip)]
    pub rho: Vec<(f64, CMat)>,
    pub conservation: ConservationStats,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConservationStats {
    pub max_trace_error: f64,
    pub max_hermiticity_error: f64,
    pub min_eigenvalue: f64,
    pub max_purity_change: f64,
}

impl Default for ConservationStats {
    fn default() -> Self {
        ConservationStats {
            max_trace_error: 0.0,
            max_hermiticity_error: 0.0,
            min_eigenvalue: f64::INFINITY,
            max_purity_change: 0.0,
        }
    }
}

fn purity(rho: &CMat) -> f64 {
    rho.iter().map(|z| z.norm_sqr()).sum()
}

/// Decides which steps are sampled: the first step, then the first step at
/// or after each multiple of `interval` past it.
#[derive(Debug, Clone)]
pub struct SampleClock {
    interval: f64,
    next: f64,
}

impl SampleClock {
    pub fn new(interval: f64) -> Self {
        SampleClock {
            interval,
            next: f64::NEG_INFINITY,
        }
    }

    /// True when `t` should be sampled; advances the clock if so.
    pub fn due(&mut self, t: f64) -> bool {
        if t + 1e-9 < self.next {
            return false;
        }
        self.next = if self.next == f64::NEG_INFINITY {
            t + self.interval
        } else {
            let mut next = self.next + self.interval;
            while next <= t + 1e-9 {
                next += self.interval;
            }
            next
        };
        true
    }
}

/// Observer that samples the trajectory every `interval` ns and keeps every
/// `rho_stride`-th density matrix (0 keeps none).
pub struct TrajectoryRecorder {
    clock: SampleClock,
    rho_stride: usize,
    samples: usize,
    initial_purity: Option<f64>,
    pub trajectory: DensityMatrixTrajectory,
}

impl TrajectoryRecorder {
    pub fn new(interval: f64, rho_stride: usize) -> Self {
        TrajectoryRecorder {
            clock: SampleClock::new(interval),
            rho_stride,
            samples: 0,
            initial_purity: None,
            trajectory: DensityMatrixTrajectory::default(),
        }
    }
}

impl Observer for TrajectoryRecorder {
    fn observe(&mut self, state: &StepState<'_>) -> ControlFlow<()> {
        if !self.clock.due(state.t) {
            return ControlFlow::Continue(());
        }
        let basis = state.system.basis;
        let rho = state.rho();
        let tr = &mut self.trajectory;
        if tr.electrode_labels.is_empty() {
            tr.electrode_labels = state.system.electrode_labels();
        }
        tr.times.push(state.t);
        tr.populations.push((0..basis.dim()).map(|k| rho[(k, k)].re).collect());
        tr.spin_expectations.push(
            basis
                .spin_matrices
                .iter()
                .map(|s| {
                    [
                        crate::linalg::expectation(&rho, &s[0]).re,
                        crate::linalg::expectation(&rho, &s[1]).re,
                        crate::linalg::expectation(&rho, &s[2]).re,
                    ]
                })
                .collect(),
        );
        tr.current.push(state.currents());
        let stats = &mut tr.conservation;
        stats.max_trace_error = stats.max_trace_error.max((rho.trace().re - 1.0).abs().max(rho.trace().im.abs()));
        stats.max_hermiticity_error = stats.max_hermiticity_error.max(hermiticity_deviation(&rho));
        stats.min_eigenvalue = stats.min_eigenvalue.min(min_block_eigenvalue(&rho, &state.system.blocks));
        let p = purity(&rho);
        let p0 = *self.initial_purity.get_or_insert(p);
        stats.max_purity_change = stats.max_purity_change.max((p - p0).abs());
        if self.rho_stride > 0 && self.samples.is_multiple_of(self.rho_stride) {
            tr.rho.push((state.t, rho));
        }
        self.samples += 1;
        ControlFlow::Continue(())
    }
}

/// Propagates and records a trajectory sampled every `sample_interval` ns.
pub fn propagate(
    system: &QmeSystem<'_>,
    program: &PulseProgram,
    rho0: &CMat,
    settings: &PropagationSettings,
    sample_interval: f64,
    rho_stride: usize,
) -> Result<(DensityMatrixTrajectory, PropagationSummary)> {
    if !(sample_interval > 0.0) {
        return Err(Error::validation("sample interval must be > 0"));
    }
    let mut rec = TrajectoryRecorder::new(sample_interval, rho_stride);
    let summary = propagate_with(system, program, rho0, settings, &mut rec)?;
    Ok((rec.trajectory, summary))
}

/// Electron current from `electrode` into the impurity (pA) for a density
/// matrix and a rate tensor evaluated at the same time.
pub fn electrode_current(rho: &CMat, tensor: &RateTensor, basis: &EigenBasis) -> f64 {
    let space = PairSpace::new(basis);
    let l = liouvillian(&space, tensor);
    let number: Vec<C64> = space
        .pairs
        .iter()
        .map(|&(a, b)| if a == b { c(basis.charge_of_state[a] as f64, 0.0) } else { ZERO })
        .collect();
    let w = l.row_functional(&number);
    let x = space.gather(rho);
    let flow: C64 = w.iter().zip(&x).map(|(a, b)| a * b).sum();
    PA_PER_ELECTRON_PER_NS * flow.re
}
