//! Temperature-dependent resonant frequency shift from the digamma model.

use crate::consts::{H, K_B};
use crate::error::{invalid, Error, Result};
use crate::fit::{fit, Estimate, FitProblem, FitResult, ParamSpec};
use crate::special::freq_shift_kernel;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FreqShiftPoint {
    pub temp_k: f64,
    pub f_r_hz: f64,
}

/// Fractional shift `delta f / f0` at temperature `temp_k` for a resonance
/// probed at `f_probe` (Hz).
pub fn freq_shift_model(f_delta0_reac: f64, f_probe: f64, temp_k: f64) -> f64 {
    let x = H * f_probe / (K_B * temp_k);
    f_delta0_reac / PI * freq_shift_kernel(x)
}

/// Temperature of the minimum of the shift curve. Above it the shift
/// increases monotonically with temperature.
pub fn knee_temperature(f_probe: f64) -> f64 {
    let scale = H * f_probe / K_B;
    let g = |lt: f64| freq_shift_kernel(scale / lt.exp());
    let (mut a, mut b) = ((0.05 * scale).ln(), (5.0 * scale).ln());
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    while (b - a).abs() > 1e-12 {
        if g(c) < g(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - r * (b - a);
        d = a + r * (b - a);
    }
    (0.5 * (a + b)).exp()
}

#[derive(Clone, Debug)]
pub struct FreqShiftFit {
    pub f0_hz: Estimate,
    pub f_delta0_reac: Estimate,
    pub f_probe_hz: f64,
    /// True when `f_r` trends downward, by more than three sigma of the
    /// residual scatter, on the branch where the model can only rise.
    pub monotonic_violation: bool,
    pub fit: FitResult,
}

impl FreqShiftFit {
    pub fn model(&self, temp_k: f64) -> f64 {
        self.f0_hz.value * (1.0 + freq_shift_model(self.f_delta0_reac.value, self.f_probe_hz, temp_k))
    }
}

/// Fit `f_r(T) = f0 (1 + delta f / f0)` for `f0` and `F delta0_reac`.
/// Without `f_probe` the kernel is evaluated at the fitted `f0`.
pub fn fit_freq_shift(series: &[FreqShiftPoint], f_probe: Option<f64>) -> Result<FreqShiftFit> {
    if series.len() < 3 {
        return invalid("frequency-shift fit needs at least three points");
    }
    if series.iter().any(|p| !(p.temp_k > 0.0 && p.f_r_hz > 0.0 && p.f_r_hz.is_finite())) {
        return invalid("temperatures and frequencies must be positive and finite");
    }
    let mut pts = series.to_vec();
    pts.sort_by(|a, b| a.temp_k.total_cmp(&b.temp_k));
    let f_probe = match f_probe {
        Some(f) => f,
        None => {
            // probe at the fitted f0, starting from the median frequency
            let mut f: Vec<f64> = pts.iter().map(|p| p.f_r_hz).collect();
            f.sort_by(f64::total_cmp);
            let mut probe = f[f.len() / 2];
            for _ in 0..3 {
                probe = fit_freq_shift(&pts, Some(probe))?.f0_hz.value;
            }
            probe
        }
    };
    let g: Vec<f64> = pts.iter().map(|p| freq_shift_model(1.0, f_probe, p.temp_k)).collect();
    // linear seed: f = f0 + (f0 F delta) g
    let n = pts.len() as f64;
    let sg: f64 = g.iter().sum();
    let sgg: f64 = g.iter().map(|x| x * x).sum();
    let sf: f64 = pts.iter().map(|p| p.f_r_hz).sum();
    let sgf: f64 = g.iter().zip(&pts).map(|(g, p)| g * p.f_r_hz).sum();
    let det = n * sgg - sg * sg;
    if det.abs() <= 1e-15 * n * sgg {
        return invalid("temperatures do not separate the model terms");
    }
    let f0_seed = (sf * sgg - sg * sgf) / det;
    let slope = (n * sgf - sg * sf) / det;
    let fd_seed = (slope / f0_seed).max(0.0);
    let scale = f0_seed;
    let specs = vec![
        ParamSpec::linear("f0_offset", 0.0).step(1e-9),
        ParamSpec::linear("f_delta0_reac", fd_seed).bounds(0.0, 1.0).step(1e-10),
    ];
    let residual = |p: &[f64]| -> Vec<f64> {
        pts.iter()
            .zip(&g)
            .map(|(pt, gk)| (scale * (1.0 + p[0]) * (1.0 + p[1] * gk) - pt.f_r_hz) / scale)
            .collect()
    };
    let res = fit(&FitProblem::new(residual, specs))?;
    if !res.converged() {
        return Err(Error::NotConverged("frequency-shift fit did not converge".into()));
    }
    let rms = (res.cost / res.n_data as f64).sqrt() * scale;
    let knee = knee_temperature(f_probe);
    let branch: Vec<&FreqShiftPoint> = pts.iter().filter(|p| p.temp_k >= knee).collect();
    let monotonic_violation = falling_trend(&branch, rms.max(1e-15 * scale));
    Ok(FreqShiftFit {
        f0_hz: Estimate::new(scale * (1.0 + res.values[0]), scale * res.sigma[0]),
        f_delta0_reac: Estimate::new(res.values[1], res.sigma[1]),
        f_probe_hz: f_probe,
        monotonic_violation,
        fit: res,
    })
}

/// Least-squares slope of `f_r` against `T` more than three sigma below zero.
fn falling_trend(branch: &[&FreqShiftPoint], rms: f64) -> bool {
    if branch.len() < 3 {
        return false;
    }
    let n = branch.len() as f64;
    let tm = branch.iter().map(|p| p.temp_k).sum::<f64>() / n;
    let fm = branch.iter().map(|p| p.f_r_hz).sum::<f64>() / n;
    let sxx: f64 = branch.iter().map(|p| (p.temp_k - tm).powi(2)).sum();
    if !(sxx > 0.0) {
        return false;
    }
    let slope = branch.iter().map(|p| (p.temp_k - tm) * (p.f_r_hz - fm)).sum::<f64>() / sxx;
    slope < -3.0 * rms / sxx.sqrt()
}

/// Temperature at which the model shift equals `target` (fractional).
///
/// The search runs on the rising branch above [`knee_temperature`] up to
/// `t_max`. Targets below the curve minimum have no solution there.
pub fn invert_freq_shift(target: f64, f_delta0_reac: f64, f_probe: f64, t_max: f64) -> Result<f64> {
    if !(f_delta0_reac > 0.0) {
        return invalid("F delta0_reac must be positive to invert the shift");
    }
    let lo = knee_temperature(f_probe);
    if t_max <= lo {
        return invalid("upper temperature bracket lies below the curve minimum");
    }
    let g = |t: f64| freq_shift_model(f_delta0_reac, f_probe, t) - target;
    if g(lo) > 0.0 {
        return Err(Error::InvalidInput(format!(
            "shift {target:.3e} is below the model minimum {:.3e}",
            target - g(lo)
        )));
    }
    if g(t_max) < 0.0 {
        return Err(Error::InvalidInput(format!("shift {target:.3e} exceeds the model at {t_max} K")));
    }
    let (mut a, mut b) = (lo.ln(), t_max.ln());
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if g(m.exp()) < 0.0 {
            a = m;
        } else {
            b = m;
        }
        if b - a < 1e-14 {
            break;
        }
    }
    Ok((0.5 * (a + b)).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn knee_near_model_minimum() {
        let f = 502.1e6;
        let tk = knee_temperature(f);
        let s = |t: f64| freq_shift_model(1.0, f, t);
        assert!(s(tk) < s(tk * 1.01) && s(tk) < s(tk * 0.99));
        assert!(tk > 5e-3 && tk < 15e-3);
    }

    #[test]
    fn inversion_roundtrip() {
        let f = 502.1e6;
        let fd = 1.14e-5;
        for t in [0.025, 0.065, 0.3, 2.0] {
            let target = freq_shift_model(fd, f, t);
            let back = invert_freq_shift(target, fd, f, 10.0).unwrap();
            assert!((back - t).abs() / t < 1e-10, "{t} -> {back}");
        }
    }
}
