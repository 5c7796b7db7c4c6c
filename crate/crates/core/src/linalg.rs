//! Small dense complex linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn zeros(n: usize) -> CMat {
    CMat::zeros(n, n)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn dagger(m: &CMat) -> CMat {
    m.adjoint()
}

/// Largest entry modulus.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// `max |M − M†|`.
pub fn hermiticity_deviation(m: &CMat) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn trace(m: &CMat) -> C64 {
    m.trace()
}

/// `Tr(ρ A)` without forming the product.
pub fn expectation(rho: &CMat, op: &CMat) -> C64 {
    let n = rho.nrows();
    let mut acc = ZERO;
    for i in 0..n {
        for k in 0..n {
            acc += rho[(i, k)] * op[(k, i)];
        }
    }
    acc
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues ascending and
/// eigenvectors as columns in the same order.
pub fn eigh(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), CMat::zeros(0, 0));
    }
    let sym = (m + m.adjoint()).scale(0.5);
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = CMat::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(k));
    }
    (values, vectors)
}

pub fn eigvalsh(m: &CMat) -> Vec<f64> {
    eigh(m).0
}

/// Principal square root of a Hermitian positive semidefinite matrix.
/// Slightly negative eigenvalues from rounding are clamped to zero.
pub fn hermitian_sqrt(m: &CMat) -> CMat {
    let (values, vectors) = eigh(m);
    let n = values.len();
    let mut scaled = vectors.clone();
    for (k, &v) in values.iter().enumerate() {
        let s = v.max(0.0).sqrt();
        for i in 0..n {
            scaled[(i, k)] *= s;
        }
    }
    &scaled * vectors.adjoint()
}

/// `exp(-i θ A)` for Hermitian `A`.
pub fn unitary_exp(a: &CMat, theta: f64) -> CMat {
    let (values, vectors) = eigh(a);
    let n = values.len();
    let mut scaled = vectors.clone();
    for (k, &v) in values.iter().enumerate() {
        let phase = C64::from_polar(1.0, -theta * v);
        for i in 0..n {
            scaled[(i, k)] *= phase;
        }
    }
    &scaled * vectors.adjoint()
}

/// `max |V†V − 1|`.
pub fn unitarity_deviation(v: &CMat) -> f64 {
    let g = v.adjoint() * v;
    max_abs(&(g - identity(v.ncols())))
}

/// Smallest `max |A − e^{iφ} B|` over global phases φ, with φ taken from the
/// largest entry of `B`.
pub fn phase_distance(a: &CMat, b: &CMat) -> f64 {
    let (mut best, mut idx) = (0.0, (0, 0));
    for i in 0..b.nrows() {
        for j in 0..b.ncols() {
            if b[(i, j)].norm() > best {
                best = b[(i, j)].norm();
                idx = (i, j);
            }
        }
    }
    if best == 0.0 {
        return max_abs(a);
    }
    let ratio = a[idx] / b[idx];
    let phase = if ratio.norm() > 0.0 {
        ratio / ratio.norm()
    } else {
        ONE
    };
    max_abs(&(a - b.map(|z| z * phase)))
}
