//! Microscopic TLS picture: susceptibilities of individual defects, their
//! continuum limit, saturation, phonon-mediated relaxation and the
//! population kinetics of a single TLS.

pub mod kinetic;
pub mod relaxation;
pub mod variance;

pub use kinetic::{evolve_kinetic, stationary_rho22, KineticState};
pub use relaxation::{
    gamma1_phonon, regime_crossover, q_relaxation_inv, q_relaxation_inv_closed_d3, relaxation_freq_shift,
    relaxation_freq_shift_closed_d3,
};
pub use variance::{predicted_ratio, variance_mc, VarianceMcConfig, VarianceMcResult};

use crate::consts::{HBAR, K_B};
use crate::error::{invalid, Result};
use crate::special::digamma;
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// A single two-level defect in the `(Delta, Delta0)` basis. Energies in J,
/// rates in rad/s.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tls {
    pub delta: f64,
    pub delta0: f64,
    /// Deformation potential (J per unit strain).
    pub gamma_z: f64,
    /// Population relaxation rate.
    pub gamma1: f64,
    /// Coherence decay rate.
    pub gamma2: f64,
}

impl Tls {
    pub fn new(delta: f64, delta0: f64, gamma_z: f64, gamma1: f64, gamma2: f64) -> Result<Self> {
        if !(delta0 >= 0.0 && gamma1 > 0.0 && gamma2 > 0.0) {
            return invalid("TLS needs delta0 >= 0 and positive rates");
        }
        if gamma2 < 0.5 * gamma1 * (1.0 - 1e-12) {
            return invalid("gamma2 must be at least gamma1 / 2");
        }
        Ok(Tls { delta, delta0, gamma_z, gamma1, gamma2 })
    }

    pub fn energy(&self) -> f64 {
        self.delta.hypot(self.delta0)
    }

    /// Transverse coupling `g_x` (rad/s) for zero-point strain `xi`.
    pub fn g_x(&self, xi: f64) -> f64 {
        self.gamma_z / HBAR * self.delta0 / self.energy() * xi
    }

    /// Longitudinal coupling `g_z` (rad/s) for zero-point strain `xi`.
    pub fn g_z(&self, xi: f64) -> f64 {
        self.gamma_z / HBAR * self.delta / self.energy() * xi
    }

    /// Transverse matrix element `hbar g_x / xi` (J).
    pub fn m_x(&self) -> f64 {
        self.gamma_z * self.delta0 / self.energy()
    }
}

/// Host material and mode geometry.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    /// Mass density (kg/m^3).
    pub rho: f64,
    /// Mean sound velocity (m/s).
    pub v_bar: f64,
    /// Mode volume (m^3).
    pub volume: f64,
    /// Volume of the TLS host (m^3).
    pub host_volume: f64,
    /// TLS density of states per unit energy and volume (1/(J m^3)).
    pub dos_p: f64,
    /// Mean transverse deformation potential (J).
    pub m_bar: f64,
    /// Mean longitudinal deformation potential (J).
    pub d_bar: f64,
    /// Upper cutoff of the TLS spectrum (rad/s).
    pub omega_max: f64,
    /// Phonon-bath cross-section `S_{3-d}` (m^(3-d)); 1 for `d = 3`.
    pub cross_section: f64,
    /// Dimension of the phonon bath.
    pub dim: u32,
}

impl MaterialParams {
    /// Crystalline-quartz-like values with 1 eV deformation potentials.
    pub fn quartz(dos_p: f64) -> Self {
        MaterialParams {
            rho: 2650.0,
            v_bar: 4250.0,
            volume: 1e-9,
            host_volume: 1e-9,
            dos_p,
            m_bar: crate::consts::EV,
            d_bar: crate::consts::EV,
            omega_max: 2.0 * PI * 1e13,
            cross_section: 1.0,
            dim: 3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = [self.rho, self.v_bar, self.volume, self.host_volume, self.dos_p, self.omega_max, self.cross_section];
        if pos.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
            return invalid("material parameters must be positive and finite");
        }
        if self.host_volume > self.volume * (1.0 + 1e-12) {
            return invalid("host volume cannot exceed mode volume");
        }
        if !(1..=3).contains(&self.dim) {
            return invalid("bath dimension must be 1, 2 or 3");
        }
        Ok(())
    }

    /// Filling factor `F = V_h / V`.
    pub fn filling(&self) -> f64 {
        self.host_volume / self.volume
    }

    /// Intrinsic loss tangent `delta0 = pi P M^2 / (rho v^2)`.
    pub fn delta0(&self) -> f64 {
        PI * self.dos_p * self.m_bar * self.m_bar / (self.rho * self.v_bar * self.v_bar)
    }

    pub fn f_delta0(&self) -> f64 {
        self.filling() * self.delta0()
    }

    /// Zero-point strain of the mode at `omega`.
    pub fn xi_vac(&self, omega: f64) -> f64 {
        (HBAR * omega / (2.0 * self.rho * self.v_bar * self.v_bar * self.volume)).sqrt()
    }

    /// Mean transverse coupling `g_x` (rad/s) at mode frequency `omega`.
    pub fn g_bar_x(&self, omega: f64) -> f64 {
        self.m_bar / HBAR * self.xi_vac(omega)
    }
}

/// Susceptibility contributions of an ensemble, in J.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Susceptibility {
    /// Curvature (adiabatic) term.
    pub chi_c: Complex64,
    /// Diagonal (relaxation) term.
    pub chi_d: Complex64,
    /// Non-diagonal (resonant) term including the static `2/E` piece.
    pub chi_nd: Complex64,
}

impl Susceptibility {
    pub fn total(&self) -> Complex64 {
        self.chi_c + self.chi_d + self.chi_nd
    }

    /// Resonant response once the curvature term has cancelled the static
    /// part of `chi_nd`; this is what the continuum digamma form describes.
    pub fn resonant(&self) -> Complex64 {
        self.chi_c + self.chi_nd
    }
}

fn tls_chi(t: &Tls, omega: f64, temp: f64) -> Susceptibility {
    let e = t.energy();
    let th = (e / (2.0 * K_B * temp)).tanh();
    let m2 = t.m_x().powi(2);
    let hw = HBAR * omega;
    let hg = HBAR * t.gamma2;
    let res = Complex64::new(e - hw, -hg).inv() + Complex64::new(e + hw, hg).inv();
    let chi_nd = m2 * th * (res - 2.0 / e);
    // d^2E/dxi^2 = 4 gamma_z^2 delta0^2 / E^3 when d^2 Delta / d xi^2 = 0
    let chi_c = Complex64::new(0.5 * th * 4.0 * m2 / e, 0.0);
    let sech = 1.0 / (e / (2.0 * K_B * temp)).cosh();
    let chi_d_static = t.gamma_z.powi(2) / (K_B * temp) * (t.delta / e).powi(2) * sech * sech;
    let chi_d = chi_d_static / Complex64::new(1.0, -omega / t.gamma1);
    Susceptibility { chi_c, chi_d, chi_nd }
}

/// Summed susceptibility of a discrete ensemble at drive frequency `omega`.
pub fn susceptibility_discrete(ensemble: &[Tls], omega: f64, temp_k: f64) -> Result<Susceptibility> {
    if !(temp_k > 0.0 && omega > 0.0) {
        return invalid("temperature and frequency must be positive");
    }
    if ensemble.is_empty() {
        return invalid("ensemble is empty");
    }
    if ensemble.iter().any(|t| !(t.gamma2 > 0.0 && t.gamma1 > 0.0)) {
        return invalid("every TLS needs positive gamma1 and gamma2");
    }
    let parts: Vec<Susceptibility> = ensemble
        .par_chunks(4096)
        .map(|chunk| {
            chunk.iter().fold(Susceptibility::default(), |mut acc, t| {
                let c = tls_chi(t, omega, temp_k);
                acc.chi_c += c.chi_c;
                acc.chi_d += c.chi_d;
                acc.chi_nd += c.chi_nd;
                acc
            })
        })
        .collect();
    Ok(parts.into_iter().fold(Susceptibility::default(), |mut a, c| {
        a.chi_c += c.chi_c;
        a.chi_d += c.chi_d;
        a.chi_nd += c.chi_nd;
        a
    }))
}

/// Continuum (uniform density of states) resonant susceptibility
/// `-2 P V_h M^2 [Psi(1/2 + hbar w / 2 pi i k T) - ln(hbar w_max / 2 pi k T)]`.
pub fn susceptibility_continuum(host: &MaterialParams, omega: f64, temp_k: f64) -> Complex64 {
    let a = 2.0 * PI * K_B * temp_k / HBAR;
    let z = Complex64::new(0.5, -omega / a);
    let pref = -2.0 * host.dos_p * host.host_volume * host.m_bar * host.m_bar;
    pref * (digamma(z) - (host.omega_max / a).ln())
}

/// Frequency shift and damping rate `(delta omega_r, kappa_r)` produced by
/// a susceptibility `chi` on the mode at `omega_r`.
pub fn linear_response(chi: Complex64, host: &MaterialParams, omega_r: f64) -> (f64, f64) {
    let xi2 = host.xi_vac(omega_r).powi(2);
    (-xi2 / HBAR * chi.re, 2.0 * xi2 / HBAR * chi.im)
}

/// Unsaturated resonant loss `F delta0 tanh(hbar w / 2 k T)`.
pub fn q_resonant_inv(host: &MaterialParams, omega: f64, temp_k: f64) -> f64 {
    host.f_delta0() * (HBAR * omega / (2.0 * K_B * temp_k)).tanh()
}

/// Critical phonon number `1 / ((2 g_x)^2 T1 T2)`.
pub fn critical_number(host: &MaterialParams, omega: f64, t1: f64, t2: f64) -> f64 {
    1.0 / ((2.0 * host.g_bar_x(omega)).powi(2) * t1 * t2)
}

/// Saturated resonant loss `F delta0 tanh / sqrt(1 + nbar / n_c)`.
pub fn q_saturated_inv(host: &MaterialParams, nbar: f64, omega: f64, temp_k: f64, t1: f64, t2: f64) -> f64 {
    q_resonant_inv(host, omega, temp_k) / (1.0 + nbar / critical_number(host, omega, t1, t2)).sqrt()
}

/// Excited-state population of a driven TLS in steady state.
///
/// `omega_rabi` is the Rabi frequency and `detuning` the TLS-drive detuning,
/// both in rad/s.
pub fn saturated_population(t: &Tls, omega_rabi: f64, detuning: f64, temp_k: f64) -> f64 {
    let pe_th = 1.0 / ((t.energy() / (K_B * temp_k)).exp() + 1.0);
    let u = (detuning / t.gamma2).powi(2);
    let s = omega_rabi * omega_rabi / (t.gamma1 * t.gamma2);
    0.5 - (0.5 - pe_th) * (1.0 + u) / (1.0 + u + s)
}

/// Absorptive (imaginary) part of the resonant susceptibility with the
/// thermal polarisation replaced by the driven one.
pub fn resonant_absorption_driven(ensemble: &[Tls], omega: f64, temp_k: f64, omega_rabi: f64) -> f64 {
    ensemble
        .par_iter()
        .map(|t| {
            let e = t.energy();
            let det = e / HBAR - omega;
            let dp = 1.0 - 2.0 * saturated_population(t, omega_rabi, det, temp_k);
            let hg = HBAR * t.gamma2;
            t.m_x().powi(2) * dp * hg / ((e - HBAR * omega).powi(2) + hg * hg)
        })
        .sum()
}

/// Distribution of sampled defects.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum EnsembleMeasure {
    /// Standard tunnelling model: `Delta` uniform in `[-delta_max, delta_max]`,
    /// `Delta0` log-uniform in `[delta0_min, delta0_max]`.
    StandardTunneling { delta_max: f64, delta0_min: f64, delta0_max: f64 },
    /// Symmetric defects with energy uniform in `[e_min, e_max]`.
    UniformEnergy { e_min: f64, e_max: f64 },
}

/// Draw `n` defects with shared deformation potential and rates.
pub fn sample_ensemble(
    n: usize,
    measure: EnsembleMeasure,
    gamma_z: f64,
    gamma1: f64,
    gamma2: f64,
    seed: u64,
) -> Vec<Tls> {
    let mut r = crate::synth::rng(seed, 7);
    (0..n)
        .map(|_| {
            let (delta, delta0) = match measure {
                EnsembleMeasure::StandardTunneling { delta_max, delta0_min, delta0_max } => {
                    let d = delta_max * (2.0 * r.random::<f64>() - 1.0);
                    let l = delta0_min.ln() + (delta0_max / delta0_min).ln() * r.random::<f64>();
                    (d, l.exp())
                }
                EnsembleMeasure::UniformEnergy { e_min, e_max } => (0.0, e_min + (e_max - e_min) * r.random::<f64>()),
            };
            Tls { delta, delta0, gamma_z, gamma1, gamma2 }
        })
        .collect()
}

/// Symmetric defects on the midpoints of a uniform energy grid over
/// `(0, e_max]`; the matching density of states is `n / (e_max V_h)`.
pub fn uniform_grid(n: usize, e_max: f64, m_bar: f64, gamma1: f64, gamma2: f64) -> Vec<Tls> {
    let de = e_max / n as f64;
    (0..n)
        .map(|k| Tls { delta: 0.0, delta0: (k as f64 + 0.5) * de, gamma_z: m_bar, gamma1, gamma2 })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coupling_components_add_in_quadrature() {
        let t = Tls::new(3e-25, 4e-25, 1.6e-19, 1e3, 1e4).unwrap();
        let xi = 1e-18;
        let g = t.gamma_z / HBAR * xi;
        assert!((t.g_x(xi).hypot(t.g_z(xi)) - g).abs() / g < 1e-14);
    }

    #[test]
    fn critical_number_one_hertz() {
        // g_x / 2 pi = 1 Hz, T1 T2 = 1e-6 s^2
        let mut h = MaterialParams::quartz(1e45);
        let target = 2.0 * PI;
        h.m_bar = target * HBAR / h.xi_vac(2.0 * PI * 5e8);
        let nc = critical_number(&h, 2.0 * PI * 5e8, 1e-3, 1e-3);
        assert!((nc - 1.0 / (16.0 * PI * PI * 1e-6)).abs() / nc < 1e-12);
    }

    #[test]
    fn rejects_short_gamma2() {
        assert!(Tls::new(0.0, 1e-24, 1e-19, 10.0, 4.0).is_err());
    }

    #[test]
    fn diagonal_term_high_frequency_tail() {
        let t = Tls::new(2e-25, 1e-25, 1.6e-19, 1e2, 1e4).unwrap();
        let a = tls_chi(&t, 1e6, 0.05).chi_d.im;
        let b = tls_chi(&t, 1e7, 0.05).chi_d.im;
        assert!(((a / b) - 10.0).abs() < 1e-6);
    }
}
