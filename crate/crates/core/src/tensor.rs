//! Rate tensor `Γ_{vl,ju}` and the master-equation right-hand side
//!
//! `ρ̇_lj = −i Δ_lj ρ_lj + Σ_vu [Γ_{vl,ju} + Γ*_{uj,lv}] ρ_vu
//!          − Σ_vu [Γ_{jv,vu} ρ_lu + Γ*_{lv,vu} ρ_uj]`
//!
//! with energies and rates in GHz (the right-hand side carries the factor
//! 2π). Per electrode with coupling `γ⁰` and spin matrix `P`:
//!
//! * electron leaving (`N_v = N_l + 1`, `N_u = N_j + 1`):
//!   `Γ_{vl,ju} = (γ⁰/2) Σ_σσ' (d_σ)_lv P_σ'σ (d†_σ')_uj Q⁻(E_u − E_j)`
//! * electron entering (`N_l = N_v + 1`, `N_j = N_u + 1`):
//!   `Γ_{vl,ju} = (γ⁰/2) Σ_σσ' (d†_σ)_lv P_σσ' (d_σ')_uj Q⁺(E_j − E_u)`
//!
//! The tunneling amplitude of electrode α is modulated by the pulse
//! program, so its contribution is scaled by the squared drive factor.

use std::collections::{BTreeMap, HashMap};

use crate::eigen::EigenBasis;
use crate::error::{Error, Result};
use crate::linalg::{CMat, C64, ZERO};
use crate::pulse::PulseProgram;
use crate::rates::{addition_kernel, removal_kernel, ElectrodeSpec, KernelEnergy, KernelOptions};
use crate::units::TWO_PI;

/// Trace tolerance accepted by [`qme_rhs`].
pub const TRACE_TOLERANCE: f64 = 1e-6;

/// Sparse `Γ_{vl,ju}` in GHz, entries sorted by index.
#[derive(Debug, Clone, PartialEq)]
pub struct RateTensor {
    pub dim: usize,
    entries: Vec<([usize; 4], C64)>,
}

impl RateTensor {
    pub fn zero(dim: usize) -> Self {
        RateTensor {
            dim,
            entries: Vec::new(),
        }
    }

    fn from_map(dim: usize, map: BTreeMap<[usize; 4], C64>) -> Self {
        RateTensor {
            dim,
            entries: map.into_iter().filter(|(_, v)| *v != ZERO).collect(),
        }
    }

    pub fn get(&self, v: usize, l: usize, j: usize, u: usize) -> C64 {
        match self.entries.binary_search_by(|(k, _)| k.cmp(&[v, l, j, u])) {
            Ok(i) => self.entries[i].1,
            Err(_) => ZERO,
        }
    }

    pub fn entries(&self) -> &[([usize; 4], C64)] {
        &self.entries
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        RateTensor {
            dim: self.dim,
            entries: self.entries.iter().map(|(k, v)| (*k, v * factor)).collect(),
        }
    }

    /// Entry-wise sum.
    pub fn sum<'a>(dim: usize, parts: impl IntoIterator<Item = &'a RateTensor>) -> Self {
        let mut map = BTreeMap::new();
        for p in parts {
            for (k, v) in &p.entries {
                *map.entry(*k).or_insert(ZERO) += v;
            }
        }
        RateTensor::from_map(dim, map)
    }
}

/// Undriven tensor of one electrode.
pub fn electrode_rate_tensor(basis: &EigenBasis, electrode: &ElectrodeSpec, opts: &KernelOptions) -> Result<RateTensor> {
    electrode.validate()?;
    opts.validate()?;
    let n = basis.dim();
    let gamma = electrode.gamma();
    if gamma == 0.0 {
        return Ok(RateTensor::zero(n));
    }
    let p = electrode.polarization_matrix();
    let d = &basis.d_matrix;
    let q = &basis.charge_of_state;
    // absolute energies so transition energies are physical
    let e = |k: usize| basis.energies[k] + basis.ground_energy;
    let mut cache: HashMap<(bool, u64), C64> = HashMap::new();
    let mut kernel = |adding: bool, energy: f64| -> Result<C64> {
        let key = (adding, energy.to_bits());
        if let Some(v) = cache.get(&key) {
            return Ok(*v);
        }
        let v = if adding {
            addition_kernel(energy, electrode, opts)?
        } else {
            removal_kernel(energy, electrode, opts)?
        };
        cache.insert(key, v);
        Ok(v)
    };

    // pairs (a, b) with N_a = N_b + 1 and the 2×2 spin block of d elements
    let mut down_pairs = Vec::new();
    for a in 0..n {
        for b in 0..n {
            if q[a] == q[b] + 1 {
                let el = [d[0][(b, a)], d[1][(b, a)]];
                if el[0].norm() > 1e-14 || el[1].norm() > 1e-14 {
                    down_pairs.push((a, b, el));
                }
            }
        }
    }

    let mut map: BTreeMap<[usize; 4], C64> = BTreeMap::new();
    let half = 0.5 * gamma;
    // electron leaving: v = a (N+1), l = b (N); u = a' (N+1), j = b' (N)
    for &(v, l, dl) in &down_pairs {
        for &(u, j, dj) in &down_pairs {
            // Σ (d_σ)_lv P_σ'σ conj((d_σ')_ju)
            let mut m = ZERO;
            for s in 0..2 {
                for sp in 0..2 {
                    m += dl[s] * p[sp][s] * dj[sp].conj();
                }
            }
            if m.norm() == 0.0 {
                continue;
            }
            let energy = match opts.kernel_energy {
                KernelEnergy::Transition => e(u) - e(j),
                KernelEnergy::Symmetrized => 0.5 * (e(v) - e(l) + e(u) - e(j)),
            };
            *map.entry([v, l, j, u]).or_insert(ZERO) += m * half * kernel(false, energy)?;
        }
    }
    // electron entering: l = a (N+1), v = b (N); j = a' (N+1), u = b' (N)
    for &(l, v, dv) in &down_pairs {
        for &(j, u, du) in &down_pairs {
            // Σ conj((d_σ)_vl) P_σσ' (d_σ')_uj
            let mut m = ZERO;
            for s in 0..2 {
                for sp in 0..2 {
                    m += dv[s].conj() * p[s][sp] * du[sp];
                }
            }
            if m.norm() == 0.0 {
                continue;
            }
            let energy = match opts.kernel_energy {
                KernelEnergy::Transition => e(j) - e(u),
                KernelEnergy::Symmetrized => 0.5 * (e(l) - e(v) + e(j) - e(u)),
            };
            *map.entry([v, l, j, u]).or_insert(ZERO) += m * half * kernel(true, energy)?;
        }
    }
    Ok(RateTensor::from_map(n, map))
}

/// `Γ(t) = Σ_α drive_factor_α(t)² Γ_α`.
pub fn build_rate_tensor(
    basis: &EigenBasis,
    electrodes: &[ElectrodeSpec],
    program: &PulseProgram,
    t: f64,
    opts: &KernelOptions,
) -> Result<RateTensor> {
    let mut parts = Vec::with_capacity(electrodes.len());
    for el in electrodes {
        let f = program.drive_factor(el.drive_amplitude, t)?;
        parts.push(electrode_rate_tensor(basis, el, opts)?.scaled(f * f));
    }
    Ok(RateTensor::sum(basis.dim(), parts.iter()))
}

/// `K_ab = Σ_v Γ_{av,vb}`.
fn loss_matrix(tensor: &RateTensor) -> CMat {
    let mut k = CMat::zeros(tensor.dim, tensor.dim);
    for ([a, v1, v2, b], g) in tensor.entries() {
        if v1 == v2 {
            k[(*a, *b)] += g;
        }
    }
    k
}

/// Dissipative part of the right-hand side, without the 2π factor.
fn dissipator(rho: &CMat, tensor: &RateTensor) -> CMat {
    let n = tensor.dim;
    let mut out = CMat::zeros(n, n);
    for ([v, l, j, u], g) in tensor.entries() {
        // Γ_{vl,ju} ρ_vu → (l, j)
        out[(*l, *j)] += g * rho[(*v, *u)];
        // Γ*_{uj,lv} ρ_vu: relabel (a,b,c,d) = (u,j,l,v) → (c, b) from ρ_{d a}
        out[(*j, *l)] += g.conj() * rho[(*u, *v)];
    }
    let k = loss_matrix(tensor);
    out -= rho * k.transpose();
    out -= k.conjugate() * rho;
    out
}

/// Time derivative of `rho` (1/ns) for the eigenbasis Hamiltonian plus the
/// tensor.
pub fn qme_rhs(rho: &CMat, tensor: &RateTensor, basis: &EigenBasis) -> Result<CMat> {
    let n = basis.dim();
    if rho.nrows() != n || rho.ncols() != n || tensor.dim != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: rho.nrows(),
        });
    }
    let tr = rho.trace();
    if (tr - C64::new(1.0, 0.0)).norm() > TRACE_TOLERANCE {
        return Err(Error::Integrity(format!("trace of rho is {tr}, expected 1")));
    }
    let mut out = dissipator(rho, tensor);
    for l in 0..n {
        for j in 0..n {
            out[(l, j)] -= C64::new(0.0, basis.gap(l, j)) * rho[(l, j)];
        }
    }
    Ok(out * C64::new(TWO_PI, 0.0))
}

/// Sparse complex matrix in compressed-row form.
#[derive(Debug, Clone, Default)]
pub struct SparseMatrix {
    pub dim: usize,
    row_start: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl SparseMatrix {
    pub fn from_triplets(dim: usize, triplets: BTreeMap<(usize, usize), C64>) -> Self {
        let mut row_start = vec![0; dim + 1];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for ((r, c), v) in triplets {
            if v.norm() == 0.0 {
                continue;
            }
            row_start[r + 1] += 1;
            cols.push(c);
            vals.push(v);
        }
        for r in 0..dim {
            row_start[r + 1] += row_start[r];
        }
        SparseMatrix {
            dim,
            row_start,
            cols,
            vals,
        }
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// `out += factor · M x`.
    pub fn mul_add(&self, factor: C64, x: &[C64], out: &mut [C64]) {
        for r in 0..self.dim {
            let mut acc = ZERO;
            for k in self.row_start[r]..self.row_start[r + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            out[r] += factor * acc;
        }
    }

    /// `Σ_r w_r (M x)_r` for a row functional `w`.
    pub fn row_functional(&self, weights: &[C64]) -> Vec<C64> {
        let mut out = vec![ZERO; self.dim];
        for r in 0..self.dim {
            if weights[r] == ZERO {
                continue;
            }
            for k in self.row_start[r]..self.row_start[r + 1] {
                out[self.cols[k]] += weights[r] * self.vals[k];
            }
        }
        out
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        for k in self.row_start[r]..self.row_start[r + 1] {
            if self.cols[k] == c {
                return self.vals[k];
            }
        }
        ZERO
    }
}

/// Density-matrix entries `(l, j)` with equal charge, which are the only
/// ones the master equation couples to a charge-diagonal initial state.
#[derive(Debug, Clone)]
pub struct PairSpace {
    pub pairs: Vec<(usize, usize)>,
    index: Vec<Option<usize>>,
    pub dim: usize,
}

impl PairSpace {
    pub fn new(basis: &EigenBasis) -> Self {
        let n = basis.dim();
        let mut pairs = Vec::new();
        let mut index = vec![None; n * n];
        for l in 0..n {
            for j in 0..n {
                if basis.charge_of_state[l] == basis.charge_of_state[j] {
                    index[l * n + j] = Some(pairs.len());
                    pairs.push((l, j));
                }
            }
        }
        PairSpace { pairs, index, dim: n }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn index(&self, l: usize, j: usize) -> Option<usize> {
        self.index[l * self.dim + j]
    }

    pub fn gather(&self, rho: &CMat) -> Vec<C64> {
        self.pairs.iter().map(|&(l, j)| rho[(l, j)]).collect()
    }

    pub fn scatter(&self, x: &[C64]) -> CMat {
        let mut rho = CMat::zeros(self.dim, self.dim);
        for (k, &(l, j)) in self.pairs.iter().enumerate() {
            rho[(l, j)] = x[k];
        }
        rho
    }

    /// Largest modulus of an entry of `rho` outside the pair space.
    pub fn outside_weight(&self, rho: &CMat) -> f64 {
        let mut worst: f64 = 0.0;
        for l in 0..self.dim {
            for j in 0..self.dim {
                if self.index(l, j).is_none() {
                    worst = worst.max(rho[(l, j)].norm());
                }
            }
        }
        worst
    }
}

/// Dissipator of `tensor` restricted to the pair space, including the 2π
/// factor.
pub fn liouvillian(space: &PairSpace, tensor: &RateTensor) -> SparseMatrix {
    let mut trip: BTreeMap<(usize, usize), C64> = BTreeMap::new();
    let mut add = |row: Option<usize>, col: Option<usize>, v: C64| {
        if let (Some(r), Some(c)) = (row, col) {
            *trip.entry((r, c)).or_insert(ZERO) += v * TWO_PI;
        }
    };
    for ([v, l, j, u], g) in tensor.entries() {
        add(space.index(*l, *j), space.index(*v, *u), *g);
        add(space.index(*j, *l), space.index(*u, *v), g.conj());
    }
    let k = loss_matrix(tensor);
    let n = tensor.dim;
    for a in 0..n {
        for b in 0..n {
            let kab = k[(a, b)];
            if kab == ZERO {
                continue;
            }
            for x in 0..n {
                // −ρ_{x b} K_{a b} → (x, a);  −K*_{a b} ρ_{b x} → (a, x)
                add(space.index(x, a), space.index(x, b), -kab);
                add(space.index(a, x), space.index(b, x), -kab.conj());
            }
        }
    }
    SparseMatrix::from_triplets(space.len(), trip)
}
