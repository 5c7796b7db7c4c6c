//! Quantum-impurity model: one transport orbital plus localized spin sites.
//!
//! The many-body product basis orders the transport occupation
//! `{0, ↑, ↓, ↑↓}` slowest, followed by each site's projection `m` from `+S`
//! to `−S`. The doubly occupied state is `|↑↓⟩ = d†↑ d†↓ |0⟩`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, hermiticity_deviation, identity, kron, max_abs, CMat};
use crate::stevens::{multiplicity, spin_matrices, stevens_operator};
use crate::units::{mev_to_ghz, tesla_to_ghz};

pub const DEFAULT_BASIS_CAP: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportOrbitalSpec {
    /// meV
    pub epsilon_up: f64,
    /// meV
    pub epsilon_down: f64,
    /// Onsite repulsion, meV.
    pub coulomb_u: f64,
    pub g_factors: [f64; 3],
    /// Tesla.
    pub b_field: [f64; 3],
}

/// Stevens anisotropy coefficients in meV; absent terms are zero.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StevensCoefficients {
    pub b20: f64,
    pub b22: f64,
    pub b40: f64,
    pub b44: f64,
}

impl StevensCoefficients {
    pub fn terms(&self) -> [((u32, u32), f64); 4] {
        [
            ((2, 0), self.b20),
            ((2, 2), self.b22),
            ((4, 0), self.b40),
            ((4, 4), self.b44),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinSiteSpec {
    pub spin_magnitude: f64,
    pub g_factors: [f64; 3],
    /// Tesla.
    pub b_field: [f64; 3],
    pub stevens: StevensCoefficients,
}

/// Anisotropic exchange `Σ_χ J^χ S_a^χ S_b^χ`. Site 0 is the transport
/// orbital, spin sites are numbered from 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExchangeCoupling {
    pub site_a: usize,
    pub site_b: usize,
    /// GHz.
    pub j_vector: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantumImpurityModel {
    pub transport: TransportOrbitalSpec,
    pub sites: Vec<SpinSiteSpec>,
    pub exchanges: Vec<ExchangeCoupling>,
}

/// Occupation of the transport orbital.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Occupation {
    Empty,
    Up,
    Down,
    Double,
}

impl Occupation {
    pub const ALL: [Occupation; 4] = [
        Occupation::Empty,
        Occupation::Up,
        Occupation::Down,
        Occupation::Double,
    ];

    pub fn charge(self) -> u8 {
        match self {
            Occupation::Empty => 0,
            Occupation::Up | Occupation::Down => 1,
            Occupation::Double => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasisState {
    pub occupation: Occupation,
    /// Projection of each spin site, in site order.
    pub projections: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasisCatalog {
    /// Local dimensions: 4 for the transport orbital, then `2S + 1` per site.
    pub local_dims: Vec<usize>,
    pub states: Vec<BasisState>,
}

impl BasisCatalog {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn charges(&self) -> Vec<u8> {
        self.states.iter().map(|s| s.occupation.charge()).collect()
    }
}

fn finite3(v: &[f64; 3]) -> bool {
    v.iter().all(|x| x.is_finite())
}

impl QuantumImpurityModel {
    pub fn validate(&self) -> Result<()> {
        let t = &self.transport;
        if !(t.coulomb_u >= 0.0) || !t.coulomb_u.is_finite() {
            return Err(Error::validation("coulomb_u must be finite and >= 0"));
        }
        if !t.epsilon_up.is_finite() || !t.epsilon_down.is_finite() {
            return Err(Error::validation("orbital energies must be finite"));
        }
        if !finite3(&t.g_factors) || !finite3(&t.b_field) {
            return Err(Error::validation("transport g-factors and field must be finite"));
        }
        for (i, s) in self.sites.iter().enumerate() {
            multiplicity(s.spin_magnitude)
                .map_err(|e| Error::validation(format!("site {}: {e}", i + 1)))?;
            if !finite3(&s.g_factors) || !finite3(&s.b_field) {
                return Err(Error::validation(format!(
                    "site {}: g-factors and field must be finite",
                    i + 1
                )));
            }
            let st = s.stevens;
            if ![st.b20, st.b22, st.b40, st.b44].iter().all(|x| x.is_finite()) {
                return Err(Error::validation(format!(
                    "site {}: Stevens coefficients must be finite",
                    i + 1
                )));
            }
        }
        let mut seen = Vec::new();
        for (k, x) in self.exchanges.iter().enumerate() {
            if x.site_a == x.site_b {
                return Err(Error::validation(format!("exchange {k}: site_a equals site_b")));
            }
            if x.site_a > self.sites.len() || x.site_b > self.sites.len() {
                return Err(Error::validation(format!(
                    "exchange {k}: site index out of range (0..={})",
                    self.sites.len()
                )));
            }
            if !finite3(&x.j_vector) {
                return Err(Error::validation(format!("exchange {k}: J must be finite")));
            }
            let key = (x.site_a.min(x.site_b), x.site_a.max(x.site_b));
            if seen.contains(&key) {
                return Err(Error::validation(format!(
                    "exchange {k}: pair ({}, {}) listed twice",
                    key.0, key.1
                )));
            }
            seen.push(key);
        }
        Ok(())
    }

    /// Local dimensions, transport orbital first.
    pub fn local_dims(&self) -> Result<Vec<usize>> {
        let mut dims = vec![4];
        for s in &self.sites {
            dims.push(multiplicity(s.spin_magnitude)?);
        }
        Ok(dims)
    }

    /// Number of spin-carrying sites including the transport orbital.
    pub fn spin_site_count(&self) -> usize {
        self.sites.len() + 1
    }
}

pub fn build_basis(model: &QuantumImpurityModel) -> Result<BasisCatalog> {
    build_basis_with_cap(model, DEFAULT_BASIS_CAP)
}

pub fn build_basis_with_cap(model: &QuantumImpurityModel, cap: usize) -> Result<BasisCatalog> {
    model.validate()?;
    let local_dims = model.local_dims()?;
    let dimension = local_dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .unwrap_or(usize::MAX);
    if dimension > cap {
        return Err(Error::Capacity { dimension, cap });
    }
    let site_ms: Vec<Vec<f64>> = model
        .sites
        .iter()
        .map(|s| crate::stevens::projections(s.spin_magnitude))
        .collect::<Result<_>>()?;
    let site_block = dimension / 4;
    let mut states = Vec::with_capacity(dimension);
    for occupation in Occupation::ALL {
        for flat in 0..site_block {
            let mut rest = flat;
            let mut projections = vec![0.0; site_ms.len()];
            for (k, ms) in site_ms.iter().enumerate().rev() {
                projections[k] = ms[rest % ms.len()];
                rest /= ms.len();
            }
            states.push(BasisState {
                occupation,
                projections,
            });
        }
    }
    debug_assert_eq!(states.len(), dimension);
    Ok(BasisCatalog { local_dims, states })
}

/// Transport annihilation operators `[d↑, d↓]` on the 4-state orbital space.
pub fn transport_annihilators() -> [CMat; 2] {
    let mut up = CMat::zeros(4, 4);
    let mut dn = CMat::zeros(4, 4);
    up[(0, 1)] = c(1.0, 0.0);
    dn[(0, 2)] = c(1.0, 0.0);
    // d↑ d†↑ d†↓ |0⟩ = d†↓ |0⟩
    up[(2, 3)] = c(1.0, 0.0);
    // d↓ d†↑ d†↓ |0⟩ = −d†↑ |0⟩
    dn[(1, 3)] = c(-1.0, 0.0);
    [up, dn]
}

/// Transport spin `s = ½ Σ d†_σ σ_σσ' d_σ'` on the 4-state orbital space.
pub fn transport_spin() -> [CMat; 3] {
    let d = transport_annihilators();
    let pauli = crate::stevens::spin_matrices(0.5).expect("spin one half");
    let mut out = [CMat::zeros(4, 4), CMat::zeros(4, 4), CMat::zeros(4, 4)];
    for (axis, p) in pauli.iter().enumerate() {
        for a in 0..2 {
            for b in 0..2 {
                // pauli holds σ/2 already
                out[axis] += (d[a].adjoint() * &d[b]).map(|z| z * p[(a, b)]);
            }
        }
    }
    out
}

/// Operators of the model embedded in the full product space.
#[derive(Debug, Clone)]
pub struct ModelOperators {
    /// `[d↑, d↓]`.
    pub d: [CMat; 2],
    /// `[n↑, n↓]`.
    pub n: [CMat; 2],
    /// Spin operators `[S^x, S^y, S^z]`; index 0 is the transport spin.
    pub spins: Vec<[CMat; 3]>,
}

fn embed(local: &CMat, position: usize, dims: &[usize]) -> CMat {
    let mut out = CMat::identity(1, 1);
    for (k, &d) in dims.iter().enumerate() {
        out = if k == position {
            kron(&out, local)
        } else {
            kron(&out, &identity(d))
        };
    }
    out
}

impl ModelOperators {
    pub fn new(model: &QuantumImpurityModel) -> Result<Self> {
        let dims = model.local_dims()?;
        let d_local = transport_annihilators();
        let d = [embed(&d_local[0], 0, &dims), embed(&d_local[1], 0, &dims)];
        let n = [d[0].adjoint() * &d[0], d[1].adjoint() * &d[1]];
        let mut spins = Vec::with_capacity(dims.len());
        let ts = transport_spin();
        spins.push([embed(&ts[0], 0, &dims), embed(&ts[1], 0, &dims), embed(&ts[2], 0, &dims)]);
        for (i, site) in model.sites.iter().enumerate() {
            let [sx, sy, sz] = spin_matrices(site.spin_magnitude)?;
            spins.push([
                embed(&sx, i + 1, &dims),
                embed(&sy, i + 1, &dims),
                embed(&sz, i + 1, &dims),
            ]);
        }
        Ok(ModelOperators { d, n, spins })
    }

    pub fn dimension(&self) -> usize {
        self.d[0].nrows()
    }

    /// Total transport-orbital occupation `n↑ + n↓`.
    pub fn number(&self) -> CMat {
        &self.n[0] + &self.n[1]
    }
}

/// Impurity Hamiltonian in GHz on the product basis.
pub fn assemble_hamiltonian(model: &QuantumImpurityModel) -> Result<CMat> {
    build_basis(model)?;
    let ops = ModelOperators::new(model)?;
    Ok(hamiltonian_from_operators(model, &ops))
}

pub(crate) fn hamiltonian_from_operators(model: &QuantumImpurityModel, ops: &ModelOperators) -> CMat {
    let dim = ops.dimension();
    let t = &model.transport;
    let mut h = CMat::zeros(dim, dim);
    h += ops.n[0].scale(mev_to_ghz(t.epsilon_up));
    h += ops.n[1].scale(mev_to_ghz(t.epsilon_down));
    h += (&ops.n[0] * &ops.n[1]).scale(mev_to_ghz(t.coulomb_u));
    for axis in 0..3 {
        let zeeman = tesla_to_ghz(t.b_field[axis]) * t.g_factors[axis];
        if zeeman != 0.0 {
            h += ops.spins[0][axis].scale(zeeman);
        }
    }
    let dims = model.local_dims().expect("validated model");
    for (i, site) in model.sites.iter().enumerate() {
        let idx = i + 1;
        for axis in 0..3 {
            let zeeman = tesla_to_ghz(site.b_field[axis]) * site.g_factors[axis];
            if zeeman != 0.0 {
                h += ops.spins[idx][axis].scale(zeeman);
            }
        }
        for ((k, q), coeff) in site.stevens.terms() {
            if coeff != 0.0 {
                let local = stevens_operator(k, q, site.spin_magnitude).expect("supported order");
                h += embed(&local, idx, &dims).scale(mev_to_ghz(coeff));
            }
        }
    }
    for x in &model.exchanges {
        for axis in 0..3 {
            let j = x.j_vector[axis];
            if j != 0.0 {
                h += (&ops.spins[x.site_a][axis] * &ops.spins[x.site_b][axis]).scale(j);
            }
        }
    }
    // symmetrize away rounding asymmetry
    let h = (&h + h.adjoint()).scale(0.5);
    debug_assert!(hermiticity_deviation(&h) <= 1e-12 * max_abs(&h).max(1.0));
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn spin_half_site(bx: f64) -> SpinSiteSpec {
        SpinSiteSpec {
            spin_magnitude: 0.5,
            g_factors: [2.0; 3],
            b_field: [bx, 0.0, 0.0],
            stevens: StevensCoefficients::default(),
        }
    }

    fn bare(sites: Vec<SpinSiteSpec>) -> QuantumImpurityModel {
        QuantumImpurityModel {
            transport: TransportOrbitalSpec {
                epsilon_up: -5.0,
                epsilon_down: -5.0,
                coulomb_u: 50.0,
                g_factors: [2.0; 3],
                b_field: [0.0; 3],
            },
            sites,
            exchanges: vec![],
        }
    }

    #[test]
    fn basis_sizes() {
        assert_eq!(build_basis(&bare(vec![])).unwrap().len(), 4);
        assert_eq!(build_basis(&bare(vec![spin_half_site(0.0)])).unwrap().len(), 8);
        let mut one = spin_half_site(0.0);
        one.spin_magnitude = 1.0;
        assert_eq!(build_basis(&bare(vec![one])).unwrap().len(), 12);
    }

    #[test]
    fn basis_ordering_transport_slowest() {
        let mut s1 = spin_half_site(0.0);
        s1.spin_magnitude = 1.0;
        let cat = build_basis(&bare(vec![s1, spin_half_site(0.0)])).unwrap();
        assert_eq!(cat.len(), 24);
        assert_eq!(cat.states[0].occupation, Occupation::Empty);
        assert_eq!(cat.states[0].projections, vec![1.0, 0.5]);
        assert_eq!(cat.states[1].projections, vec![1.0, -0.5]);
        assert_eq!(cat.states[2].projections, vec![0.0, 0.5]);
        assert_eq!(cat.states[6].occupation, Occupation::Up);
        assert_eq!(cat.states[23].occupation, Occupation::Double);
        assert_eq!(cat.states[23].projections, vec![-1.0, -0.5]);
    }

    #[test]
    fn capacity_error() {
        let mut big = spin_half_site(0.0);
        big.spin_magnitude = 7.5;
        let model = bare(vec![big.clone(), big.clone(), big]);
        match build_basis(&model) {
            Err(Error::Capacity { dimension, cap }) => {
                assert_eq!(dimension, 4 * 16 * 16 * 16);
                assert_eq!(cap, 4096);
                assert!(dimension > cap);
            }
            other => panic!("expected capacity error, got {other:?}"),
        }
        assert!(build_basis_with_cap(&bare(vec![spin_half_site(0.0)]), 7).is_err());
    }

    #[test]
    fn fermion_algebra() {
        let model = bare(vec![spin_half_site(0.0)]);
        let ops = ModelOperators::new(&model).unwrap();
        let dim = ops.dimension();
        let one = CMat::identity(dim, dim);
        for a in 0..2 {
            for b in 0..2 {
                let anti = &ops.d[a] * ops.d[b].adjoint() + ops.d[b].adjoint() * &ops.d[a];
                let expect = if a == b { one.clone() } else { CMat::zeros(dim, dim) };
                assert!(max_abs(&(anti - expect)) < 1e-14);
                let anti2 = &ops.d[a] * &ops.d[b] + &ops.d[b] * &ops.d[a];
                assert!(max_abs(&anti2) < 1e-14);
            }
        }
    }

    #[test]
    fn transport_spin_only_on_single_occupation() {
        let s = transport_spin();
        assert!((s[2][(1, 1)].re - 0.5).abs() < 1e-15);
        assert!((s[2][(2, 2)].re + 0.5).abs() < 1e-15);
        assert!(s[2][(3, 3)].norm() < 1e-15);
        assert!((s[0][(1, 2)].re - 0.5).abs() < 1e-15);
    }

    #[test]
    fn hamiltonian_commutes_with_charge() {
        let mut model = bare(vec![spin_half_site(0.3)]);
        model.transport.b_field = [0.1, 0.2, 0.3];
        model.exchanges.push(ExchangeCoupling {
            site_a: 0,
            site_b: 1,
            j_vector: [0.1, -0.2, 0.3],
        });
        let ops = ModelOperators::new(&model).unwrap();
        let h = assemble_hamiltonian(&model).unwrap();
        let n = ops.number();
        assert_eq!(max_abs(&(&h * &n - &n * &h)), 0.0);
        assert!(hermiticity_deviation(&h) < 1e-12 * max_abs(&h));
    }

    #[test]
    fn exchange_validation() {
        let mut model = bare(vec![spin_half_site(0.0)]);
        model.exchanges.push(ExchangeCoupling {
            site_a: 1,
            site_b: 1,
            j_vector: [1.0; 3],
        });
        assert!(model.validate().is_err());
        model.exchanges[0].site_a = 0;
        model.exchanges.push(ExchangeCoupling {
            site_a: 1,
            site_b: 0,
            j_vector: [1.0; 3],
        });
        assert!(model.validate().is_err());
        model.exchanges.pop();
        model.exchanges[0].site_b = 2;
        assert!(model.validate().is_err());
    }
}
