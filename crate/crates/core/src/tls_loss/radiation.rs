//! Radiation leakage through a finite phononic mirror:
//! `1/Q_i = L exp(-beta N) + 1/Q_TLS`, where `L = 1/Q_mirr0` is the
//! leakage prefactor and `N` the number of mirror periods.

use crate::error::{invalid, Error, Result};
use crate::fit::{fit, propagate, Estimate, FitProblem, FitResult, ParamSpec};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadiationPoint {
    pub n_mirr: u32,
    pub q_i: f64,
    /// Optional one-sigma error on `q_i`; relative weighting when absent.
    #[serde(default)]
    pub q_i_sigma: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadiationLeakParams {
    /// Leakage prefactor `1/Q_mirr0`.
    pub leak: f64,
    pub beta: f64,
    pub q_tls: f64,
}

impl RadiationLeakParams {
    pub fn reference() -> Self {
        RadiationLeakParams { leak: 4.1e-3, beta: 1.71, q_tls: 4.9e5 }
    }

    /// Radiation-limited quality factor `exp(beta N) / L`.
    pub fn q_rad(&self, n: f64) -> f64 {
        (self.beta * n).exp() / self.leak
    }

    pub fn q_inv(&self, n: f64) -> f64 {
        self.leak * (-self.beta * n).exp() + 1.0 / self.q_tls
    }
}

#[derive(Clone, Debug)]
pub struct RadiationFit {
    pub params: RadiationLeakParams,
    pub leak: Estimate,
    pub beta: Estimate,
    pub q_tls: Estimate,
    pub fit: FitResult,
}

impl RadiationFit {
    /// Extrapolated radiation-limited Q at `n` periods with propagated error.
    pub fn q_rad(&self, n: f64) -> Estimate {
        let q = self.params.q_rad(n);
        // d q / d leak = -q / leak, d q / d beta = n q
        let cov = self.fit.covariance.view((0, 0), (2, 2)).into_owned();
        Estimate::new(q, propagate(&cov, &[-q / self.params.leak, n * q]))
    }
}

pub fn fit_radiation(points: &[RadiationPoint]) -> Result<RadiationFit> {
    let mut ns: Vec<u32> = points.iter().map(|p| p.n_mirr).collect();
    ns.sort();
    ns.dedup();
    if ns.len() < 4 {
        return invalid("radiation fit needs at least four distinct mirror counts");
    }
    if points.iter().any(|p| !(p.q_i > 0.0 && p.q_i.is_finite())) {
        return invalid("quality factors must be positive");
    }
    let mut sorted = points.to_vec();
    sorted.sort_by_key(|p| p.n_mirr);
    let first = sorted[0];
    let last = sorted[sorted.len() - 1];
    let q_tls0 = last.q_i;
    let second = sorted.iter().find(|p| p.n_mirr > first.n_mirr).copied().unwrap_or(last);
    let excess = |p: &RadiationPoint| (1.0 / p.q_i - 1.0 / q_tls0).max(0.1 / p.q_i);
    let beta0 = ((excess(&first) / excess(&second)).ln() / (second.n_mirr - first.n_mirr) as f64).max(0.1);
    let leak0 = excess(&first) * (beta0 * first.n_mirr as f64).exp();
    let specs = vec![
        ParamSpec::log("leak", leak0),
        ParamSpec::log("beta", beta0),
        ParamSpec::log("q_tls", q_tls0),
    ];
    let residual = |p: &[f64]| -> Vec<f64> {
        let m = RadiationLeakParams { leak: p[0], beta: p[1], q_tls: p[2] };
        sorted
            .iter()
            .map(|pt| {
                let obs = 1.0 / pt.q_i;
                let sig = match pt.q_i_sigma {
                    Some(s) if s > 0.0 => s / (pt.q_i * pt.q_i),
                    _ => obs,
                };
                (m.q_inv(pt.n_mirr as f64) - obs) / sig
            })
            .collect()
    };
    let res = fit(&FitProblem::new(residual, specs))?;
    let beta_resolved = res.sigma[1].is_finite() && res.sigma[1] < res.values[1];
    if !beta_resolved {
        return Err(Error::Regime("no decay above the plateau; beta is unidentifiable".into()));
    }
    if !res.converged() {
        return Err(Error::NotConverged("radiation fit did not converge".into()));
    }
    let params = RadiationLeakParams { leak: res.values[0], beta: res.values[1], q_tls: res.values[2] };
    Ok(RadiationFit {
        params,
        leak: Estimate::new(res.values[0], res.sigma[0]),
        beta: Estimate::new(res.values[1], res.sigma[1]),
        q_tls: Estimate::new(res.values[2], res.sigma[2]),
        fit: res,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extrapolation_at_seven_periods() {
        let q = RadiationLeakParams::reference().q_rad(7.0);
        assert!((q - 3.852_308_79e7).abs() / q < 1e-8);
    }

    #[test]
    fn too_few_counts() {
        let pts = vec![
            RadiationPoint { n_mirr: 2, q_i: 1e4, q_i_sigma: None },
            RadiationPoint { n_mirr: 3, q_i: 5e4, q_i_sigma: None },
            RadiationPoint { n_mirr: 4, q_i: 1e5, q_i_sigma: None },
        ];
        assert!(fit_radiation(&pts).is_err());
    }
}
