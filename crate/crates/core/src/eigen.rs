//! Diagonalization of the impurity Hamiltonian and operators in its
//! eigenbasis.

use crate::error::{Error, Result};
use crate::linalg::{c, eigh, hermiticity_deviation, max_abs, unitarity_deviation, unitary_exp, CMat, CVec};
use crate::model::{build_basis, hamiltonian_from_operators, BasisCatalog, ModelOperators, QuantumImpurityModel};
use crate::stevens::spin_matrices;

/// Relative hermiticity tolerance accepted by [`diagonalize`].
pub const HERMITICITY_TOLERANCE: f64 = 1e-9;

/// Plain eigen-decomposition result.
#[derive(Debug, Clone)]
pub struct Spectrum {
    /// Ascending, shifted so the lowest is zero (GHz).
    pub energies: Vec<f64>,
    /// Lowest eigenvalue before the shift.
    pub ground_energy: f64,
    /// Eigenvectors as columns.
    pub vectors: CMat,
    /// For each eigenstate, the input basis index carrying the largest weight.
    pub permutation: Vec<usize>,
}

fn check_hermitian(h: &CMat) -> Result<()> {
    if h.nrows() != h.ncols() {
        return Err(Error::DimensionMismatch {
            expected: h.nrows(),
            found: h.ncols(),
        });
    }
    let scale = max_abs(h).max(f64::MIN_POSITIVE);
    let dev = hermiticity_deviation(h);
    if dev > HERMITICITY_TOLERANCE * scale {
        return Err(Error::validation(format!(
            "matrix is not Hermitian: max |H - H†| = {dev:e} relative to {scale:e}"
        )));
    }
    Ok(())
}

fn dominant_index(v: &CMat, col: usize) -> usize {
    (0..v.nrows())
        .max_by(|&a, &b| v[(a, col)].norm_sqr().total_cmp(&v[(b, col)].norm_sqr()))
        .unwrap_or(0)
}

pub fn diagonalize(h: &CMat) -> Result<Spectrum> {
    check_hermitian(h)?;
    let (values, vectors) = eigh(h);
    let ground_energy = values.first().copied().unwrap_or(0.0);
    let permutation = (0..values.len()).map(|k| dominant_index(&vectors, k)).collect();
    Ok(Spectrum {
        energies: values.iter().map(|e| e - ground_energy).collect(),
        ground_energy,
        vectors,
        permutation,
    })
}

/// Unitary mapping each single-site `S^z` eigenstate onto the corresponding
/// eigenstate along `axis`: a rotation taking ẑ onto `axis`.
fn site_label_rotation(spin: f64, axis: [f64; 3]) -> Result<CMat> {
    let [sx, sy, sz] = spin_matrices(spin)?;
    let norm = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::validation("label axis must be a non-zero vector"));
    }
    let a = [axis[0] / norm, axis[1] / norm, axis[2] / norm];
    // n = ẑ × a
    let (nx, ny) = (-a[1], a[0]);
    let sin = (nx * nx + ny * ny).sqrt();
    let angle = a[2].clamp(-1.0, 1.0).acos();
    let generator = if sin > 1e-12 {
        (sx.scale(nx / sin)) + sy.scale(ny / sin)
    } else if a[2] > 0.0 {
        return Ok(CMat::identity(sz.nrows(), sz.nrows()));
    } else {
        sx
    };
    Ok(unitary_exp(&generator, angle))
}

/// Product states along the label axis, as columns in the product basis and
/// in catalog order.
pub fn label_product_states(model: &QuantumImpurityModel, axis: [f64; 3]) -> Result<CMat> {
    let half = site_label_rotation(0.5, axis)?;
    let mut transport = CMat::identity(4, 4);
    for i in 0..2 {
        for j in 0..2 {
            transport[(1 + i, 1 + j)] = half[(i, j)];
        }
    }
    let mut out = transport;
    for site in &model.sites {
        out = out.kronecker(&site_label_rotation(site.spin_magnitude, axis)?);
    }
    Ok(out)
}

/// Eigenstates of the impurity Hamiltonian with the matrix elements the
/// master equation needs.
#[derive(Debug, Clone)]
pub struct EigenBasis {
    /// Ascending, ground state at zero (GHz).
    pub energies: Vec<f64>,
    /// Absolute lowest eigenvalue (GHz).
    pub ground_energy: f64,
    /// Transport-orbital occupation of each eigenstate.
    pub charge_of_state: Vec<u8>,
    /// Eigenvectors as columns of the product basis.
    pub vectors: CMat,
    /// `⟨l| d_σ |j⟩` for `σ = ↑, ↓`.
    pub d_matrix: [CMat; 2],
    /// `⟨l| S_i^χ |j⟩`; site 0 is the transport spin.
    pub spin_matrices: Vec<[CMat; 3]>,
    /// Label-axis product states, columns in the product basis.
    pub label_states: CMat,
    pub label_axis: [f64; 3],
    pub catalog: BasisCatalog,
}

impl EigenBasis {
    /// Builds the eigenbasis with digital labels quantized along `label_axis`.
    pub fn new(model: &QuantumImpurityModel, label_axis: [f64; 3]) -> Result<Self> {
        let catalog = build_basis(model)?;
        let ops = ModelOperators::new(model)?;
        let h = hamiltonian_from_operators(model, &ops);
        check_hermitian(&h)?;
        let labels = label_product_states(model, label_axis)?;
        let charges = catalog.charges();
        let dim = catalog.len();
        let scale = max_abs(&h).max(1.0);
        let degeneracy_tol = 1e-9 * scale;

        // (energy, charge, column in product basis)
        let mut pairs: Vec<(f64, u8, CVec)> = Vec::with_capacity(dim);
        for q in 0u8..=2 {
            let idx: Vec<usize> = (0..dim).filter(|&k| charges[k] == q).collect();
            if idx.is_empty() {
                continue;
            }
            let block = CMat::from_fn(idx.len(), idx.len(), |a, b| h[(idx[a], idx[b])]);
            let (vals, mut vecs) = eigh(&block);
            let label_block = labels.select_rows(idx.iter()).select_columns(idx.iter());
            resolve_degeneracies(&vals, &mut vecs, &label_block, degeneracy_tol);
            for (k, &e) in vals.iter().enumerate() {
                let mut col = CVec::zeros(dim);
                for (a, &row) in idx.iter().enumerate() {
                    col[row] = vecs[(a, k)];
                }
                fix_phase(&mut col, &labels);
                pairs.push((e, q, col));
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let ground_energy = pairs[0].0;
        let mut vectors = CMat::zeros(dim, dim);
        for (k, p) in pairs.iter().enumerate() {
            vectors.set_column(k, &p.2);
        }
        let dev = unitarity_deviation(&vectors);
        if dev > 1e-10 {
            return Err(Error::Integrity(format!(
                "eigenvectors not orthonormal: Gram deviation {dev:e}"
            )));
        }
        let vd = vectors.adjoint();
        let rotate = |op: &CMat| &vd * op * &vectors;
        Ok(EigenBasis {
            energies: pairs.iter().map(|p| p.0 - ground_energy).collect(),
            ground_energy,
            charge_of_state: pairs.iter().map(|p| p.1).collect(),
            d_matrix: [rotate(&ops.d[0]), rotate(&ops.d[1])],
            spin_matrices: ops
                .spins
                .iter()
                .map(|s| [rotate(&s[0]), rotate(&s[1]), rotate(&s[2])])
                .collect(),
            vectors,
            label_states: labels,
            label_axis,
            catalog,
        })
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    /// `Δ_lj = E_l − E_j` in GHz.
    pub fn gap(&self, l: usize, j: usize) -> f64 {
        self.energies[l] - self.energies[j]
    }

    /// Eigenstate indices with the given charge, ascending in energy.
    pub fn states_with_charge(&self, q: u8) -> Vec<usize> {
        (0..self.dim()).filter(|&k| self.charge_of_state[k] == q).collect()
    }

    /// `V† op V` for an operator given in the product basis.
    pub fn operator_in_eigenbasis(&self, op: &CMat) -> Result<CMat> {
        if op.nrows() != self.dim() || op.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: op.nrows(),
            });
        }
        let dev = unitarity_deviation(&self.vectors);
        if dev > 1e-10 {
            return Err(Error::Integrity(format!("eigenvector matrix not unitary ({dev:e})")));
        }
        Ok(self.vectors.adjoint() * op * &self.vectors)
    }

    /// Label product states expressed in the eigenbasis.
    pub fn label_states_in_eigenbasis(&self) -> CMat {
        self.vectors.adjoint() * &self.label_states
    }

    /// Total occupation operator, diagonal in the eigenbasis.
    pub fn number_diagonal(&self) -> Vec<f64> {
        self.charge_of_state.iter().map(|&q| q as f64).collect()
    }

    /// Largest `|Δ_lj|` among pairs of equal charge.
    pub fn max_same_charge_gap(&self) -> f64 {
        let mut best: f64 = 0.0;
        for l in 0..self.dim() {
            for j in 0..self.dim() {
                if self.charge_of_state[l] == self.charge_of_state[j] {
                    best = best.max(self.gap(l, j).abs());
                }
            }
        }
        best
    }
}

/// Inside each degenerate group, replaces the eigenvectors by the sequential
/// projections of label product states, re-orthonormalized.
fn resolve_degeneracies(vals: &[f64], vecs: &mut CMat, labels: &CMat, tol: f64) {
    let n = vals.len();
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && (vals[end] - vals[start]).abs() <= tol {
            end += 1;
        }
        if end - start > 1 {
            let sub = vecs.columns(start, end - start).into_owned();
            let projector = &sub * sub.adjoint();
            let mut chosen: Vec<CVec> = Vec::new();
            for k in 0..labels.ncols() {
                if chosen.len() == end - start {
                    break;
                }
                let mut v: CVec = &projector * labels.column(k);
                for u in &chosen {
                    let overlap = u.dotc(&v);
                    v -= u * overlap;
                }
                let norm = v.norm();
                if norm > 1e-6 {
                    chosen.push(v / c(norm, 0.0));
                }
            }
            if chosen.len() == end - start {
                for (k, v) in chosen.into_iter().enumerate() {
                    vecs.set_column(start + k, &v);
                }
            }
        }
        start = end;
    }
}

/// Rotates the global phase of `v` so its largest overlap with a label
/// product state is real and positive.
fn fix_phase(v: &mut CVec, labels: &CMat) {
    let overlaps = labels.adjoint() * &*v;
    let best = (0..overlaps.len())
        .max_by(|&a, &b| overlaps[a].norm_sqr().total_cmp(&overlaps[b].norm_sqr()))
        .unwrap_or(0);
    let o = overlaps[best];
    if o.norm() > 0.0 {
        *v *= o.conj() / o.norm();
    }
}
