//! Unit conventions.
//!
//! Energies are carried as frequencies in GHz (E/h), times in ns. A rate or
//! energy `x` in GHz therefore advances phases at `2π·x` radians per ns.

use std::f64::consts::PI;

/// Bohr magneton over Planck's constant, GHz/T.
pub const MU_B_GHZ_PER_T: f64 = 13.996245;
/// Boltzmann constant over Planck's constant, GHz/K.
pub const K_B_GHZ_PER_K: f64 = 20.836619;
/// GHz per meV.
pub const GHZ_PER_MEV: f64 = 241.79893;
/// GHz per µeV.
pub const GHZ_PER_UEV: f64 = GHZ_PER_MEV * 1e-3;
/// Elementary charge in C.
pub const ELEMENTARY_CHARGE: f64 = 1.602176634e-19;
/// Current in pA carried by one electron per ns.
pub const PA_PER_ELECTRON_PER_NS: f64 = ELEMENTARY_CHARGE * 1e9 * 1e12;

pub const TWO_PI: f64 = 2.0 * PI;

pub fn mev_to_ghz(mev: f64) -> f64 {
    mev * GHZ_PER_MEV
}

pub fn uev_to_ghz(uev: f64) -> f64 {
    uev * GHZ_PER_UEV
}

pub fn kelvin_to_ghz(kelvin: f64) -> f64 {
    kelvin * K_B_GHZ_PER_K
}

/// Zeeman energy scale μ_B·B for a field in tesla, GHz.
pub fn tesla_to_ghz(tesla: f64) -> f64 {
    tesla * MU_B_GHZ_PER_T
}
