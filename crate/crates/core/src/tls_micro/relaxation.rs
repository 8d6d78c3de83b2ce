//! One-phonon relaxation of TLS into a `d`-dimensional Debye bath and the
//! resulting relaxation loss and frequency shift of the mode.

use super::MaterialParams;
use crate::consts::{HBAR, K_B};
use crate::error::{Error, Result};
use crate::quad::{integrate, x_pow_csch, x_pow_csch2_half};
use crate::special::gamma_half;
use std::f64::consts::PI;

const X_CAP: f64 = 700.0;
const REGIME_RATIO: f64 = 0.1;

fn a_d(d: u32) -> f64 {
    2f64.powi(2 - d as i32) * PI.powf(1.0 - d as f64 / 2.0) / gamma_half(d)
}

/// Energy decay rate `Gamma_1` (rad/s) of a TLS at `omega_tls`.
pub fn gamma1_phonon(omega_tls: f64, temp_k: f64, host: &MaterialParams) -> f64 {
    let d = host.dim;
    let pref = 2f64.powi(1 - d as i32) * PI.powf(1.0 - d as f64 / 2.0) / gamma_half(d);
    let x = HBAR * omega_tls / (2.0 * K_B * temp_k);
    let coth = if x > 350.0 { 1.0 } else { 1.0 / x.tanh() };
    pref * host.m_bar.powi(2) * omega_tls.powi(d as i32)
        / (HBAR * host.rho * host.v_bar.powi(d as i32 + 2) * host.cross_section)
        * coth
}

/// Temperature at which thermal TLS relax at `REGIME_RATIO * omega_r`.
pub fn regime_crossover(host: &MaterialParams, omega_r: f64) -> f64 {
    let g = |t: f64| gamma1_phonon(K_B * t / HBAR, t, host) - REGIME_RATIO * omega_r;
    let (mut a, mut b) = (1e-6f64.ln(), 1e4f64.ln());
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if g(m.exp()) < 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    (0.5 * (a + b)).exp()
}

fn check_regime(host: &MaterialParams, omega_r: f64, temp_k: f64) -> Result<()> {
    host.validate()?;
    if !(temp_k > 0.0 && omega_r > 0.0) {
        return Err(Error::InvalidInput("temperature and frequency must be positive".into()));
    }
    if gamma1_phonon(K_B * temp_k / HBAR, temp_k, host) >= REGIME_RATIO * omega_r {
        return Err(Error::Regime(format!(
            "thermal TLS relax faster than 0.1 omega_r above {:.4} K",
            regime_crossover(host, omega_r)
        )));
    }
    Ok(())
}

fn x_max(host: &MaterialParams, temp_k: f64) -> f64 {
    (HBAR * host.omega_max / (K_B * temp_k)).min(X_CAP)
}

/// Relaxation loss `Q_rel^-1` from the bath integral.
pub fn q_relaxation_inv(host: &MaterialParams, omega_r: f64, temp_k: f64) -> Result<f64> {
    check_regime(host, omega_r, temp_k)?;
    let d = host.dim;
    let integral = integrate(|x| x_pow_csch(x, d as f64), 0.0, x_max(host, temp_k), 0.0, 1e-12)?;
    let pref = a_d(d) * host.d_bar.powi(2) * host.m_bar.powi(2) * host.dos_p
        / (HBAR * host.rho.powi(2) * host.v_bar.powi(d as i32 + 4) * host.cross_section)
        * (K_B * temp_k / HBAR).powi(d as i32);
    Ok(host.filling() * pref * integral / omega_r)
}

/// Closed form of [`q_relaxation_inv`] for a three-dimensional bath.
pub fn q_relaxation_inv_closed_d3(host: &MaterialParams, omega_r: f64, temp_k: f64) -> f64 {
    PI * PI / 8.0 * host.f_delta0() / (host.rho * omega_r * HBAR.powi(4)) * host.d_bar.powi(2)
        / host.v_bar.powi(5)
        * (K_B * temp_k).powi(3)
}

/// Fractional frequency shift `delta omega_r / omega_r` from relaxation.
pub fn relaxation_freq_shift(host: &MaterialParams, omega_r: f64, temp_k: f64) -> Result<f64> {
    check_regime(host, omega_r, temp_k)?;
    let d = host.dim;
    let integral = integrate(|x| x_pow_csch2_half(x, 2.0 * d as f64), 0.0, x_max(host, temp_k), 0.0, 1e-12)?;
    let pref = a_d(d).powi(2) * host.d_bar.powi(2) * host.m_bar.powi(4) * host.dos_p
        / (8.0
            * HBAR.powi(2)
            * host.rho.powi(3)
            * host.v_bar.powi(2 * d as i32 + 6)
            * omega_r.powi(2)
            * host.cross_section.powi(2))
        * (K_B * temp_k / HBAR).powi(2 * d as i32);
    Ok(-host.filling() * pref * integral)
}

/// Closed form of [`relaxation_freq_shift`] for a three-dimensional bath.
pub fn relaxation_freq_shift_closed_d3(host: &MaterialParams, omega_r: f64, temp_k: f64) -> f64 {
    -8.0 * PI.powi(3) / 21.0 * host.f_delta0() / (host.rho * HBAR * omega_r).powi(2) * host.m_bar.powi(2)
        / host.v_bar.powi(5)
        * host.d_bar.powi(2)
        / host.v_bar.powi(5)
        * (K_B * temp_k / HBAR).powi(6)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn a3_is_one_over_pi() {
        assert!((a_d(3) - 1.0 / PI).abs() < 1e-15);
    }

    #[test]
    fn crossover_is_consistent() {
        let h = MaterialParams::quartz(1e45);
        let w = 2.0 * PI * 5e8;
        let tc = regime_crossover(&h, w);
        assert!(q_relaxation_inv(&h, w, 0.99 * tc).is_ok());
        match q_relaxation_inv(&h, w, 1.01 * tc) {
            Err(Error::Regime(m)) => assert!(m.contains("K")),
            other => panic!("{other:?}"),
        }
    }
}
