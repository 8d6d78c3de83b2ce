//! Synthetic data with known ground truth.
//!
//! Every generator takes an explicit seed. Random streams are derived from
//! `(seed, stream)` pairs on a counter-based generator so that parallel
//! consumers stay reproducible regardless of scheduling.

pub mod presets;
mod spec;

pub use spec::*;

use crate::calib::{johnson_noise_power, NoiseForm, NoiseSweep};
use crate::circuit_id::BvdCircuit;
use crate::consts::H;
use crate::resonance::{eval_s11, Background, ComplexTrace, ResonanceParams};
use crate::tls_loss::{LossDataset, LossPoint, ParticipationPoint, TlsLossParams};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;

/// Generator for stream `stream` under master seed `seed`.
pub fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

pub fn normal(r: &mut ChaCha8Rng) -> f64 {
    r.sample(StandardNormal)
}

/// Reflection trace with additive complex Gaussian noise of standard
/// deviation `sigma` per quadrature.
pub fn reflection_trace(
    p: &ResonanceParams,
    bg: &Background,
    freqs: &[f64],
    sigma: f64,
    seed: u64,
) -> ComplexTrace {
    let mut r = rng(seed, 0);
    let s = freqs
        .iter()
        .map(|&f| {
            let z = bg.eval(f, p.f_r) * eval_s11(p, f);
            z + Complex64::new(sigma * normal(&mut r), sigma * normal(&mut r))
        })
        .collect();
    ComplexTrace { freq_hz: freqs.to_vec(), s }
}

/// Loss dataset on an `nbar x temperature` grid with fractional Gaussian
/// noise `frac` on `1/Q_i`. The reported `q_i_sigma` reflects the injected
/// noise level.
pub fn loss_grid(
    truth: &TlsLossParams,
    nbar: &[f64],
    temps: &[f64],
    freq_hz: f64,
    frac: f64,
    seed: u64,
) -> LossDataset {
    let mut r = rng(seed, 1);
    let mut points = Vec::with_capacity(nbar.len() * temps.len());
    for &t in temps {
        for &n in nbar {
            let inv = truth.q_inv(n, t, freq_hz);
            let obs = inv * (1.0 + frac * normal(&mut r));
            let q = 1.0 / obs;
            points.push(LossPoint {
                nbar: n,
                temp_k: t,
                q_i: q,
                q_i_sigma: frac * inv * q * q,
                freq_hz,
            });
        }
    }
    LossDataset { points }
}

/// `n` points log-spaced between `lo` and `hi` inclusive.
pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp()).collect()
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

/// Admittance of a set of BVD branches sharing one static capacitance,
/// with complex Gaussian noise of relative size `rel_noise` per sample.
pub fn admittance_spectrum(
    branches: &[BvdCircuit],
    c0_f: f64,
    freqs: &[f64],
    rel_noise: f64,
    seed: u64,
) -> Vec<Complex64> {
    let mut r = rng(seed, 2);
    freqs
        .iter()
        .map(|&f| {
            let s = Complex64::new(0.0, 2.0 * PI * f);
            let y = branches.iter().map(|b| b.motional(s) + b.vccs(s)).sum::<Complex64>() + c0_f * s;
            let n = Complex64::new(normal(&mut r), normal(&mut r)) * (rel_noise * y.norm() / 2f64.sqrt());
            y + n
        })
        .collect()
}

/// Frequency grid with `per_line` points across +-`half_width` linewidths of
/// each branch plus `background` log-spaced points over `[lo, hi]`.
pub fn admittance_grid(branches: &[BvdCircuit], per_line: usize, half_width: f64, lo: f64, hi: f64, background: usize) -> Vec<f64> {
    let mut f = logspace(lo, hi, background);
    for b in branches {
        let f_r = b.omega_r() / (2.0 * PI);
        let lw = b.r_ohm / (2.0 * PI * b.l_h);
        f.extend(linspace(f_r - half_width * lw, f_r + half_width * lw, per_line));
    }
    f.sort_by(|a, b| a.total_cmp(b));
    f.dedup();
    f
}

/// Seventeen BVD branches spread over 250-750 MHz with internal Q near
/// `1e4` and a shared `C0 = 1e-13` F.
pub fn seventeen_branches() -> (Vec<BvdCircuit>, f64) {
    let branches = linspace(250e6, 750e6, 17)
        .into_iter()
        .enumerate()
        .map(|(k, f)| {
            let f = f + 3.1e6 * ((k * 7 % 5) as f64 - 2.0);
            let w = 2.0 * PI * f;
            let c = 1e-15 * (1.0 + 0.05 * (k % 3) as f64);
            let l = 1.0 / (w * w * c);
            let q = 1e4 * (1.0 + 0.1 * ((k * 3 % 7) as f64 - 3.0) / 3.0);
            BvdCircuit::new(w * l / q, l, c, 0.0)
        })
        .collect();
    (branches, 1e-13)
}

/// Y-factor sweep with flat gain `gain_db`, added noise `n_sys` quanta and
/// fractional Gaussian noise `frac` on each output power.
pub fn noise_sweep(
    gain_db: f64,
    n_sys: f64,
    temps_k: &[f64],
    freqs_hz: &[f64],
    rbw_hz: f64,
    frac: f64,
    seed: u64,
) -> NoiseSweep {
    let mut r = rng(seed, 3);
    let g = crate::units::db_to_lin(gain_db);
    let p_out_w = temps_k
        .iter()
        .map(|&t| {
            freqs_hz
                .iter()
                .map(|&f| {
                    let pr = johnson_noise_power(t, rbw_hz, f, NoiseForm::Full);
                    g * (H * f * rbw_hz * n_sys + pr) * (1.0 + frac * normal(&mut r))
                })
                .collect()
        })
        .collect();
    NoiseSweep { temps_k: temps_k.to_vec(), freqs_hz: freqs_hz.to_vec(), p_out_w, rbw_hz }
}

/// Points on `F delta0 = delta_qz + F_Al (delta_Al - delta_qz)` with
/// Gaussian noise `sigma`.
pub fn participation_line(delta_qz: f64, delta_al: f64, f_al: &[f64], sigma: f64, seed: u64) -> Vec<ParticipationPoint> {
    let mut r = rng(seed, 7);
    f_al.iter()
        .map(|&x| ParticipationPoint {
            f_al: x,
            f_delta0: delta_qz + x * (delta_al - delta_qz) + sigma * normal(&mut r),
            sigma: if sigma > 0.0 { sigma } else { 1.0 },
        })
        .collect()
}
