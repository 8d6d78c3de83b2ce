//! Monte Carlo comparison of the trial-to-trial scatter of dissipative and
//! reactive loss tangents for randomly placed TLS frequencies.

use crate::error::{invalid, Result};
use crate::synth::rng;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceMcConfig {
    /// Mode frequency (rad/s, any consistent unit).
    pub omega_r: f64,
    /// Upper edge of the uniform TLS spectrum.
    pub omega_max: f64,
    /// Coherence decay rate, same unit as `omega_r`.
    pub gamma2: f64,
    pub n_tls: usize,
    pub trials: usize,
    pub bootstrap: usize,
    pub seed: u64,
}

impl Default for VarianceMcConfig {
    fn default() -> Self {
        VarianceMcConfig {
            omega_r: 1.0,
            omega_max: 100.0,
            gamma2: 1e-2,
            n_tls: 1000,
            trials: 10_000,
            bootstrap: 200,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceMcResult {
    /// `Var[F delta0_diss] / Var[F delta0_reac]` over the trials.
    pub ratio: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// `(4 / pi^2) ln^2(omega_max / omega_r)`.
    pub predicted: f64,
    /// `predicted` including the first-order `Gamma_2` correction.
    pub predicted_first_order: f64,
    pub seed: u64,
    pub trials: usize,
}

pub fn predicted_ratio(omega_r: f64, omega_max: f64) -> f64 {
    4.0 / (PI * PI) * (omega_max / omega_r).ln().powi(2)
}

/// First-order correction factor to `Var[Im chi0] / Var[Re chi0]`.
pub fn gamma2_correction(omega_r: f64, omega_max: f64, gamma2: f64) -> f64 {
    let l = (omega_r / omega_max).ln();
    1.0 + (8.0 - 2.0 * PI * PI + 8.0 * l * l) / (PI * omega_max) * gamma2
}

fn sample_var(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)
}

fn trial(cfg: &VarianceMcConfig, k: u64) -> (f64, f64) {
    let mut r = rng(cfg.seed, k);
    let (w, g) = (cfg.omega_r, cfg.gamma2);
    let (mut im, mut re) = (0.0, 0.0);
    for _ in 0..cfg.n_tls {
        let d = cfg.omega_max * r.random::<f64>() - w;
        let a = d * d + g * g;
        let b = (d + 2.0 * w).powi(2) + g * g;
        // 1/(d - i g) + 1/(d + 2w + i g)
        re += d / a + (d + 2.0 * w) / b;
        im += g / a - g / b;
    }
    let diss = 2.0 * im;
    let reac = PI * re / (cfg.omega_max / w).ln();
    (diss, reac)
}

pub fn variance_mc(cfg: &VarianceMcConfig) -> Result<VarianceMcResult> {
    if !(cfg.omega_r > 0.0 && cfg.omega_max > cfg.omega_r) {
        return invalid("omega_max must exceed omega_r > 0");
    }
    if cfg.trials < 100 || cfg.n_tls == 0 {
        return invalid("variance Monte Carlo needs at least 100 trials and one TLS");
    }
    if !(cfg.gamma2 > 0.0) {
        return invalid("gamma2 must be positive");
    }
    let samples: Vec<(f64, f64)> = (0..cfg.trials as u64).into_par_iter().map(|k| trial(cfg, k)).collect();
    let diss: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let reac: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let ratio = sample_var(&diss) / sample_var(&reac);

    let b = cfg.bootstrap.max(1);
    let mut boots: Vec<f64> = (0..b as u64)
        .into_par_iter()
        .map(|j| {
            let mut r = rng(cfg.seed ^ 0x5eed_b007, j);
            let n = cfg.trials;
            let (mut d, mut e) = (Vec::with_capacity(n), Vec::with_capacity(n));
            for _ in 0..n {
                let i = r.random_range(0..n);
                d.push(diss[i]);
                e.push(reac[i]);
            }
            sample_var(&d) / sample_var(&e)
        })
        .collect();
    boots.sort_by(f64::total_cmp);
    let q = |p: f64| boots[((p * (b - 1) as f64).round() as usize).min(b - 1)];
    let predicted = predicted_ratio(cfg.omega_r, cfg.omega_max);
    Ok(VarianceMcResult {
        ratio,
        ci_low: q(0.025),
        ci_high: q(0.975),
        predicted,
        predicted_first_order: predicted * gamma2_correction(cfg.omega_r, cfg.omega_max, cfg.gamma2),
        seed: cfg.seed,
        trials: cfg.trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_ratio_point() {
        assert!((predicted_ratio(1.0, (PI / 2.0).exp()) - 1.0).abs() < 1e-14);
        assert!((predicted_ratio(1.0, 100.0) - 8.595113473675928).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_range() {
        let cfg = VarianceMcConfig { omega_max: 0.5, ..Default::default() };
        assert!(variance_mc(&cfg).is_err());
    }
}
