//! Self-heating: effective defect temperature under drive and the loss
//! model evaluated at that temperature.

use crate::consts::{H, HBAR, K_B};
use crate::error::{invalid, Error, Result};
use crate::fit::{fit, Estimate, FitProblem, FitResult, ParamSpec};
use crate::tls_loss::{fit_tls_loss, JointFitOptions, LossDataset, LossPoint, TlsLossFit, TlsLossParams};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Quantum of thermal conductance `g0(T) = pi^2 k_B^2 T / (3 h)` (W/K).
pub fn g0(temp_k: f64) -> f64 {
    PI * PI * K_B * K_B * temp_k / (3.0 * H)
}

/// Power dissipated in the resonator, `nbar hbar omega_r^2 / Q_i`.
pub fn dissipated_power(nbar: f64, omega_r: f64, q_i: f64) -> f64 {
    nbar * HBAR * omega_r * omega_r / q_i
}

/// Power-law thermal link `G_th(T) = G_th(T0) (T / T0)^gamma`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThermalModel {
    pub gamma_exp: f64,
    /// `G_th(T0)` in W/K.
    pub g_th_t0: f64,
    pub t0: f64,
}

impl ThermalModel {
    pub fn from_channels(gamma_exp: f64, channels: f64, t0: f64) -> Self {
        ThermalModel { gamma_exp, g_th_t0: channels * g0(t0), t0 }
    }

    pub fn n_channels(&self) -> f64 {
        self.g_th_t0 / g0(self.t0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.5..=4.0).contains(&self.gamma_exp) {
            return invalid("thermal exponent must lie in [0.5, 4]");
        }
        if !(self.g_th_t0 > 0.0 && self.t0 > 0.0) {
            return invalid("G_th(T0) and T0 must be positive");
        }
        Ok(())
    }
}

/// Steady-state temperature `T0 (1 + (1+gamma) P / (T0 G_th(T0)))^(1/(1+gamma))`.
pub fn effective_temperature(model: &ThermalModel, p_in: f64) -> f64 {
    let g = model.gamma_exp + 1.0;
    model.t0 * (1.0 + g * p_in / (model.t0 * model.g_th_t0)).powf(1.0 / g)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThermalPoint {
    pub p_in: f64,
    pub t_eff: f64,
    /// Optional one-sigma uncertainty on `t_eff`.
    pub sigma: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct ThermalFit {
    pub model: ThermalModel,
    pub gamma_exp: Estimate,
    pub g_th_t0: Estimate,
    pub n_channels: Estimate,
    pub fit: FitResult,
}

/// Fit `gamma` and `G_th(T0)` to `(P_in, T_eff)` pairs with `T0` held fixed.
pub fn fit_thermal_model(points: &[ThermalPoint], t0: f64) -> Result<ThermalFit> {
    if points.len() < 4 {
        return invalid("thermal fit needs at least four points");
    }
    if !(t0 > 0.0) || points.iter().any(|p| !(p.p_in >= 0.0 && p.t_eff > 0.0 && p.p_in.is_finite())) {
        return invalid("powers must be non-negative and temperatures positive");
    }
    let pos: Vec<f64> = points.iter().map(|p| p.p_in).filter(|p| *p > 0.0).collect();
    let (lo, hi) = pos.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &p| (a.min(p), b.max(p)));
    if pos.is_empty() || hi / lo < 10.0 {
        return invalid("powers must span at least a decade");
    }
    let (tmin, tmax) = points.iter().fold((f64::INFINITY, 0.0f64), |(a, b), p| (a.min(p.t_eff), b.max(p.t_eff)));
    let sig: Vec<f64> = points.iter().map(|p| p.sigma.unwrap_or(1.0)).collect();
    let noise = points.iter().filter_map(|p| p.sigma).fold(0.0f64, f64::max);
    if tmax - tmin <= (3.0 * noise).max(1e-9 * tmax) {
        return invalid("T_eff is flat; gamma and G_th are not identifiable");
    }

    // seed: per-point G_th for each trial gamma, keep the best median
    let cost = |m: &ThermalModel| -> f64 {
        points.iter().zip(&sig).map(|(p, s)| ((effective_temperature(m, p.p_in) - p.t_eff) / s).powi(2)).sum()
    };
    let mut best: Option<(f64, ThermalModel)> = None;
    for k in 0..=14 {
        let gamma = 0.5 + 0.25 * k as f64;
        let mut gs: Vec<f64> = points
            .iter()
            .filter(|p| p.p_in > 0.0 && p.t_eff > t0 * (1.0 + 1e-6))
            .map(|p| (1.0 + gamma) * p.p_in / (t0 * ((p.t_eff / t0).powf(1.0 + gamma) - 1.0)))
            .collect();
        if gs.is_empty() {
            continue;
        }
        gs.sort_by(f64::total_cmp);
        let m = ThermalModel { gamma_exp: gamma, g_th_t0: gs[gs.len() / 2], t0 };
        let c = cost(&m);
        if best.map_or(true, |(b, _)| c < b) {
            best = Some((c, m));
        }
    }
    let Some((_, seed)) = best else {
        return invalid("no point lies above T0");
    };
    let specs = vec![
        ParamSpec::linear("gamma_exp", seed.gamma_exp).bounds(0.5, 4.0),
        ParamSpec::log("g_th_t0", seed.g_th_t0),
    ];
    let residual = |p: &[f64]| -> Vec<f64> {
        let m = ThermalModel { gamma_exp: p[0], g_th_t0: p[1], t0 };
        points.iter().zip(&sig).map(|(pt, s)| (effective_temperature(&m, pt.p_in) - pt.t_eff) / s).collect()
    };
    let mut problem = FitProblem::new(residual, specs);
    problem.options.absolute_sigma = points.iter().all(|p| p.sigma.is_some());
    let res = fit(&problem)?;
    if !res.converged() {
        return Err(Error::NotConverged("thermal model fit did not converge".into()));
    }
    let model = ThermalModel { gamma_exp: res.values[0], g_th_t0: res.values[1], t0 };
    let g0t = g0(t0);
    Ok(ThermalFit {
        model,
        gamma_exp: Estimate::new(res.values[0], res.sigma[0]),
        g_th_t0: Estimate::new(res.values[1], res.sigma[1]),
        n_channels: Estimate::new(res.values[1] / g0t, res.sigma[1] / g0t),
        fit: res,
    })
}

/// Relaxation parameters and resonant loss tangent held fixed in
/// [`fit_ringdown_loss`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RingdownLossFixed {
    pub f_delta0_diss: f64,
    pub d: f64,
    pub q_rel_t0: f64,
    pub t0: f64,
}

/// Fit `n_c`, `beta` and a constant `Q_rad` to ringdown `Q_i` evaluated at
/// the effective temperatures in `points[..].temp_k`.
pub fn fit_ringdown_loss(points: &[LossPoint], fixed: RingdownLossFixed) -> Result<TlsLossFit> {
    let ds = LossDataset { points: points.to_vec() };
    ds.validate()?;
    if points.len() < 4 {
        return invalid("ringdown loss fit needs at least four points");
    }
    let q_max = points.iter().map(|p| p.q_i).fold(0.0, f64::max);
    let cost = |m: &TlsLossParams| -> f64 {
        points
            .iter()
            .map(|p| {
                let s = p.q_i_sigma / (p.q_i * p.q_i);
                ((m.q_inv(p.nbar, p.temp_k, p.freq_hz) - 1.0 / p.q_i) / s).powi(2)
            })
            .sum()
    };
    let mut best: Option<(f64, TlsLossParams)> = None;
    for beta in [0.3, 0.5, 0.8, 1.2] {
        for ln in -2..=8 {
            for qf in [1.0, 2.0, 5.0, 20.0] {
                let m = TlsLossParams {
                    f_delta0_diss: fixed.f_delta0_diss,
                    beta,
                    n_c: 10f64.powi(ln),
                    d: fixed.d,
                    q_rel_t0: fixed.q_rel_t0,
                    t0: fixed.t0,
                    q_bkg: qf * q_max,
                };
                let c = cost(&m);
                if c.is_finite() && best.is_none_or(|(b, _)| c < b) {
                    best = Some((c, m));
                }
            }
        }
    }
    let opts = JointFitOptions {
        fixed: vec!["f_delta0_diss".into(), "d".into(), "q_rel_t0".into()],
        fit_background: true,
        initial: best.map(|b| b.1),
        t0: Some(fixed.t0),
    };
    fit_tls_loss(&ds, &opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_power_is_base_temperature() {
        let m = ThermalModel::from_channels(2.6, 1.6, 0.025);
        assert_eq!(effective_temperature(&m, 0.0), 0.025);
        assert!((m.n_channels() - 1.6).abs() < 1e-12);
    }

    #[test]
    fn small_power_is_linear() {
        let m = ThermalModel::from_channels(2.6, 1.6, 0.025);
        let p = 1e-4 * m.t0 * m.g_th_t0;
        let lin = m.t0 + p / m.g_th_t0;
        let x = p / (m.t0 * m.g_th_t0);
        // second-order term is -(gamma/2) x^2 relative to T0
        let err = (lin - effective_temperature(&m, p)) / m.t0;
        assert!((err / (x * x) - m.gamma_exp / 2.0).abs() < 1e-3);
    }
}
