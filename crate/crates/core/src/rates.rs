//! Electrode reservoirs and the energy kernels entering the tunneling rates.
//!
//! Each electrode is a thermal, wide-band reservoir. For an electron
//! entering the impurity at transition energy `E` the kernel is
//!
//! `Q⁺(E) = f̃(E) − (i/π) PV∫ f(ε) (ε−E) / ((ε−E)² + η²) dε`
//!
//! and for an electron leaving
//!
//! `Q⁻(E) = 1 − f̃(E) + (i/π) PV∫ (1 − f(ε)) (ε−E) / ((ε−E)² + η²) dε`,
//!
//! where `f̃` is the Fermi function convolved with a Lorentzian of
//! half-width `η` (exactly `f` when `η = 0`) and the integrals run over the
//! band `[−W, W]`. The imaginary parts are energy shifts and are only
//! included when requested.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::units::{kelvin_to_ghz, mev_to_ghz, uev_to_ghz};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ElectrodeLabel {
    Tip,
    Substrate,
}

impl ElectrodeLabel {
    pub fn name(self) -> &'static str {
        match self {
            ElectrodeLabel::Tip => "tip",
            ElectrodeLabel::Substrate => "substrate",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElectrodeSpec {
    pub label: ElectrodeLabel,
    /// Kelvin.
    pub temperature: f64,
    /// meV.
    pub chemical_potential: f64,
    /// Wide-band coupling `γ⁰`, µeV.
    pub base_rate: f64,
    /// Spin polarization vector, magnitude at most 1.
    pub spin_polarization: [f64; 3],
    /// Modulation depth `A` of the tunneling amplitude.
    pub drive_amplitude: f64,
}

impl ElectrodeSpec {
    pub fn validate(&self) -> Result<()> {
        let name = self.label.name();
        if !(self.temperature > 0.0) || !self.temperature.is_finite() {
            return Err(Error::validation(format!("{name}: temperature must be > 0")));
        }
        if !(self.base_rate >= 0.0) || !self.base_rate.is_finite() {
            return Err(Error::validation(format!("{name}: base rate must be >= 0")));
        }
        let p = self.spin_polarization;
        let norm = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        if !(norm <= 1.0 + 1e-12) {
            return Err(Error::validation(format!("{name}: |spin polarization| must be <= 1")));
        }
        if !self.chemical_potential.is_finite() || !self.drive_amplitude.is_finite() {
            return Err(Error::validation(format!("{name}: non-finite parameter")));
        }
        Ok(())
    }

    /// `k_B T` in GHz.
    pub fn thermal_energy(&self) -> f64 {
        kelvin_to_ghz(self.temperature)
    }

    /// Chemical potential in GHz.
    pub fn mu(&self) -> f64 {
        mev_to_ghz(self.chemical_potential)
    }

    /// `γ⁰` in GHz.
    pub fn gamma(&self) -> f64 {
        uev_to_ghz(self.base_rate)
    }

    /// Spin matrix `P = ½(1 + p·σ)` indexed `[σ][σ']` with `σ = ↑, ↓`.
    pub fn polarization_matrix(&self) -> [[C64; 2]; 2] {
        let [px, py, pz] = self.spin_polarization;
        [
            [C64::new(0.5 * (1.0 + pz), 0.0), C64::new(0.5 * px, -0.5 * py)],
            [C64::new(0.5 * px, 0.5 * py), C64::new(0.5 * (1.0 - pz), 0.0)],
        ]
    }
}

/// Where the kernel energy of a rate-tensor element is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelEnergy {
    /// At the transition energy of the `(j, u)` pair.
    Transition,
    /// At the mean of the `(v, l)` and `(j, u)` transition energies.
    Symmetrized,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelOptions {
    /// Include the principal-value energy shifts.
    pub principal_value: bool,
    /// Half-bandwidth `W`, meV.
    pub bandwidth: f64,
    /// Lorentzian half-width `η`, µeV.
    pub broadening: f64,
    pub kernel_energy: KernelEnergy,
}

impl Default for KernelOptions {
    fn default() -> Self {
        KernelOptions {
            principal_value: false,
            bandwidth: 500.0,
            broadening: 0.0,
            kernel_energy: KernelEnergy::Transition,
        }
    }
}

impl KernelOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth > 0.0) || !self.bandwidth.is_finite() {
            return Err(Error::validation("bandwidth must be > 0"));
        }
        if !(self.broadening >= 0.0) || !self.broadening.is_finite() {
            return Err(Error::validation("broadening must be >= 0"));
        }
        Ok(())
    }
}

/// `1 / (e^x + 1)` without overflow.
pub fn fermi(x: f64) -> f64 {
    if x > 0.0 {
        let e = (-x).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + x.exp())
    }
}

/// Fermi occupation of `electrode` at `energy` (GHz).
pub fn fermi_occupation(energy: f64, electrode: &ElectrodeSpec) -> f64 {
    fermi((energy - electrode.mu()) / electrode.thermal_energy())
}

/// Digamma function for `Re z > 0`.
pub fn digamma(mut z: C64) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    while z.re < 12.0 {
        acc -= z.inv();
        z += 1.0;
    }
    let w = z.inv();
    let w2 = w * w;
    // Bernoulli series: −Σ B_2k / (2k z^2k)
    let series = w2
        * (-1.0 / 12.0
            + w2 * (1.0 / 120.0
                + w2 * (-1.0 / 252.0
                    + w2 * (1.0 / 240.0 + w2 * (-1.0 / 132.0 + w2 * (691.0 / 32760.0 + w2 * (-1.0 / 12.0)))))));
    acc + z.ln() - w * 0.5 + series
}

/// Fermi function convolved with a Lorentzian of half-width `eta`, all
/// energies in the same unit.
pub fn smeared_occupation(e: f64, mu: f64, kt: f64, eta: f64) -> f64 {
    if eta == 0.0 {
        return fermi((e - mu) / kt);
    }
    let z = C64::new(0.5 + eta / (2.0 * PI * kt), (e - mu) / (2.0 * PI * kt));
    (0.5 - digamma(z).im / PI).clamp(0.0, 1.0)
}

/// Gauss–Legendre nodes and weights on [−1, 1], 10 points.
const GL_NODES: [f64; 5] = [
    0.148_874_338_981_631_2,
    0.433_395_394_129_247_2,
    0.679_409_568_299_024_4,
    0.865_063_366_688_984_5,
    0.973_906_528_517_171_7,
];
const GL_WEIGHTS: [f64; 5] = [
    0.295_524_224_714_752_9,
    0.269_266_719_309_996_4,
    0.219_086_362_515_982_0,
    0.149_451_349_150_580_6,
    0.066_671_344_308_688_1,
];

fn gauss_legendre(a: f64, b: f64, f: &dyn Fn(f64) -> f64) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut s = 0.0;
    for k in 0..5 {
        let dx = half * GL_NODES[k];
        s += GL_WEIGHTS[k] * (f(mid - dx) + f(mid + dx));
    }
    s * half
}

/// Half-width of the window around `μ` that is integrated numerically, in
/// units of `k_B T`.
const WINDOW_KT: f64 = 40.0;

/// `∫_a^b (ε−E)/((ε−E)² + η²) dε`.
fn kernel_antiderivative(a: f64, b: f64, e: f64, eta: f64) -> f64 {
    0.5 * (((b - e).powi(2) + eta * eta) / ((a - e).powi(2) + eta * eta)).ln()
}

/// `PV∫_{−W}^{W} f(ε) (ε−E)/((ε−E)² + η²) dε` with all energies in GHz.
pub fn principal_value_occupied(e: f64, mu: f64, kt: f64, eta: f64, w: f64) -> Result<f64> {
    let a = mu - WINDOW_KT * kt;
    let b = mu + WINDOW_KT * kt;
    if !(a > -w && b < w && e.abs() < w) {
        return Err(Error::validation(format!(
            "band half-width {w} GHz does not contain the transition energy {e} GHz and the thermal window around {mu} GHz"
        )));
    }
    let fe = fermi((e - mu) / kt);
    let integrand = |x: f64| {
        let d = x - e;
        let den = d * d + eta * eta;
        if den == 0.0 {
            // removable point of (f(ε) − f(E))/(ε − E) at η = 0
            -fe * (1.0 - fe) / kt
        } else {
            (fermi((x - mu) / kt) - fe) * d / den
        }
    };
    // panels of about kT/2, split at E when E is inside the window
    let panels = (2.0 * (b - a) / kt).ceil() as usize;
    let mut edges: Vec<f64> = (0..=panels).map(|k| a + (b - a) * k as f64 / panels as f64).collect();
    if e > a && e < b {
        edges.push(e);
        edges.sort_by(f64::total_cmp);
    }
    let mut inside = 0.0;
    for pair in edges.windows(2) {
        inside += gauss_legendre(pair[0], pair[1], &integrand);
    }
    inside += fe * kernel_antiderivative(a, b, e, eta);
    // below the window f = 1, above it f = 0
    let below = kernel_antiderivative(-w, a, e, eta);
    Ok(inside + below)
}

/// `PV∫_{−W}^{W} (1 − f(ε)) (ε−E)/((ε−E)² + η²) dε`.
pub fn principal_value_empty(e: f64, mu: f64, kt: f64, eta: f64, w: f64) -> Result<f64> {
    let occupied = principal_value_occupied(e, mu, kt, eta, w)?;
    Ok(kernel_antiderivative(-w, w, e, eta) - occupied)
}

/// Kernel for an electron entering the impurity from `electrode` at
/// transition energy `e` (GHz).
pub fn addition_kernel(e: f64, electrode: &ElectrodeSpec, opts: &KernelOptions) -> Result<C64> {
    let (mu, kt, eta) = (electrode.mu(), electrode.thermal_energy(), uev_to_ghz(opts.broadening));
    let re = smeared_occupation(e, mu, kt, eta);
    let im = if opts.principal_value {
        -principal_value_occupied(e, mu, kt, eta, mev_to_ghz(opts.bandwidth))? / PI
    } else {
        0.0
    };
    Ok(C64::new(re, im))
}

/// Kernel for an electron leaving the impurity into `electrode` at
/// transition energy `e` (GHz).
pub fn removal_kernel(e: f64, electrode: &ElectrodeSpec, opts: &KernelOptions) -> Result<C64> {
    let (mu, kt, eta) = (electrode.mu(), electrode.thermal_energy(), uev_to_ghz(opts.broadening));
    let re = 1.0 - smeared_occupation(e, mu, kt, eta);
    let im = if opts.principal_value {
        principal_value_empty(e, mu, kt, eta, mev_to_ghz(opts.bandwidth))? / PI
    } else {
        0.0
    };
    Ok(C64::new(re, im))
}
