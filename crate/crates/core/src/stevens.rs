//! Spin matrices and Stevens operators in the `S^z` eigenbasis, with the
//! projection ordered from `m = +S` down to `m = −S`.

use crate::error::{Error, Result};
use crate::linalg::{c, CMat};

/// Checks that `s` is a non-negative half-integer and returns `2S + 1`.
pub fn multiplicity(s: f64) -> Result<usize> {
    let two_s = 2.0 * s;
    if !two_s.is_finite() || two_s < 0.0 || (two_s - two_s.round()).abs() > 1e-9 {
        return Err(Error::validation(format!(
            "spin magnitude {s} is not a non-negative half-integer"
        )));
    }
    Ok(two_s.round() as usize + 1)
}

/// Projections `m` in basis order.
pub fn projections(s: f64) -> Result<Vec<f64>> {
    let n = multiplicity(s)?;
    Ok((0..n).map(|k| s - k as f64).collect())
}

/// Raising operator `S⁺`.
pub fn s_plus(s: f64) -> Result<CMat> {
    let ms = projections(s)?;
    let n = ms.len();
    let mut m = CMat::zeros(n, n);
    for k in 1..n {
        let mk = ms[k];
        m[(k - 1, k)] = c((s * (s + 1.0) - mk * (mk + 1.0)).sqrt(), 0.0);
    }
    Ok(m)
}

pub fn s_minus(s: f64) -> Result<CMat> {
    Ok(s_plus(s)?.adjoint())
}

/// `[S^x, S^y, S^z]`.
pub fn spin_matrices(s: f64) -> Result<[CMat; 3]> {
    let sp = s_plus(s)?;
    let sm = sp.adjoint();
    let sx = (&sp + &sm).scale(0.5);
    let sy = (&sp - &sm).map(|z| z * c(0.0, -0.5));
    let ms = projections(s)?;
    let sz = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
        ms.len(),
        ms.iter().map(|&m| c(m, 0.0)),
    ));
    Ok([sx, sy, sz])
}

/// Supported Stevens operators `O_k^q`.
pub const SUPPORTED: [(u32, u32); 4] = [(2, 0), (2, 2), (4, 0), (4, 4)];

/// Stevens operator `O_k^q` for spin `s`.
///
/// `O₂⁰ = 3S_z² − S(S+1)`, `O₂² = ½(S₊² + S₋²)`,
/// `O₄⁰ = 35S_z⁴ − 30S(S+1)S_z² + 25S_z² − 6S(S+1) + 3S²(S+1)²`,
/// `O₄⁴ = ½(S₊⁴ + S₋⁴)`.
pub fn stevens_operator(k: u32, q: u32, s: f64) -> Result<CMat> {
    let ms = projections(s)?;
    let n = ms.len();
    let ss = s * (s + 1.0);
    let diag = |f: &dyn Fn(f64) -> f64| {
        let mut m = CMat::zeros(n, n);
        for (i, &mz) in ms.iter().enumerate() {
            m[(i, i)] = c(f(mz), 0.0);
        }
        m
    };
    match (k, q) {
        (2, 0) => Ok(diag(&|m| 3.0 * m * m - ss)),
        (4, 0) => Ok(diag(&|m| {
            let m2 = m * m;
            35.0 * m2 * m2 - 30.0 * ss * m2 + 25.0 * m2 - 6.0 * ss + 3.0 * ss * ss
        })),
        (2, 2) | (4, 4) => {
            let sp = s_plus(s)?;
            let mut power = sp.clone();
            for _ in 1..q {
                power = &power * &sp;
            }
            Ok((&power + power.adjoint()).scale(0.5))
        }
        _ => Err(Error::InvalidArgument(format!(
            "unsupported Stevens operator O_{k}^{q}"
        ))),
    }
}
