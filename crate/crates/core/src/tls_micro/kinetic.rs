//! Dissipative Bloch (kinetic) equations of a single TLS coupled to a
//! thermal phonon bath.

use super::Tls;
use crate::consts::K_B;
use crate::error::{invalid, Result};
use crate::ode;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KineticState {
    pub rho11: f64,
    pub rho22: f64,
    pub rho12: Complex64,
}

impl KineticState {
    pub fn ground() -> Self {
        KineticState { rho11: 1.0, rho22: 0.0, rho12: Complex64::new(0.0, 0.0) }
    }

    pub fn new(rho11: f64, rho22: f64, rho12: Complex64) -> Result<Self> {
        let s = KineticState { rho11, rho22, rho12 };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let tol = 1e-12;
        if (self.rho11 + self.rho22 - 1.0).abs() > tol {
            return invalid("populations must sum to one");
        }
        if !(-tol..=1.0 + tol).contains(&self.rho11) || !(-tol..=1.0 + tol).contains(&self.rho22) {
            return invalid("populations must lie in [0, 1]");
        }
        if self.rho12.norm_sqr() > self.rho11 * self.rho22 + tol {
            return invalid("coherence exceeds the population bound");
        }
        Ok(())
    }
}

/// Thermal phonon occupation `N(E)` at the TLS energy.
fn planck(tls: &Tls, temp_k: f64) -> f64 {
    let x = tls.energy() / (K_B * temp_k);
    if x > 700.0 {
        0.0
    } else {
        1.0 / x.exp_m1()
    }
}

/// Stationary excited population `N / (2N + 1)`.
pub fn stationary_rho22(tls: &Tls, temp_k: f64) -> f64 {
    let n = planck(tls, temp_k);
    n / (2.0 * n + 1.0)
}

/// Evolve `state` for `duration` seconds. Emission and absorption rates are
/// `(N+1) Gamma` and `N Gamma` with `Gamma_1 = (2N+1) Gamma`; the coherence
/// decays at the TLS's `gamma2`.
pub fn evolve_kinetic(state: KineticState, tls: &Tls, temp_k: f64, duration: f64) -> Result<KineticState> {
    state.validate()?;
    if !(temp_k > 0.0 && duration >= 0.0) {
        return invalid("temperature must be positive and duration non-negative");
    }
    let n = planck(tls, temp_k);
    let g = tls.gamma1 / (2.0 * n + 1.0);
    let (gm, gp, g2) = ((n + 1.0) * g, n * g, tls.gamma2);
    let y0 = [state.rho11, state.rho22, state.rho12.re, state.rho12.im];
    let y = ode::integrate(
        |_, y, dy| {
            let flow = gm * y[1] - gp * y[0];
            dy[0] = flow;
            dy[1] = -flow;
            dy[2] = -g2 * y[2];
            dy[3] = -g2 * y[3];
        },
        0.0,
        duration,
        &y0,
        1e-10,
        1e-14,
    )?;
    Ok(KineticState { rho11: y[0], rho22: y[1], rho12: Complex64::new(y[2], y[3]) })
}
