//! Time-domain ringdown: pulse response simulation, shot averaging, decay
//! fits and pump-resonator detuning estimates.

pub mod thermal;

pub use thermal::{
    dissipated_power, effective_temperature, fit_ringdown_loss, fit_thermal_model, g0, RingdownLossFixed,
    ThermalFit, ThermalModel, ThermalPoint,
};

use crate::error::{invalid, Error, Result};
use crate::fit::{fit, Estimate, FitProblem, FitResult, ParamSpec};
use crate::synth::{normal, rng};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// One demodulated record sampled uniformly from `t_start` with step `dt`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RingdownShot {
    pub t_start: f64,
    pub dt: f64,
    pub i: Vec<f64>,
    pub q: Vec<f64>,
}

impl RingdownShot {
    pub fn new(time: &[f64], i: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        if time.len() != i.len() || time.len() != q.len() {
            return invalid("time, I and Q must have equal lengths");
        }
        if time.len() < 2 {
            return invalid("a shot needs at least two samples");
        }
        let dt = (time[time.len() - 1] - time[0]) / (time.len() - 1) as f64;
        if !(dt > 0.0) || time.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-6 * dt) {
            return invalid("shot must be uniformly sampled in increasing time");
        }
        Ok(RingdownShot { t_start: time[0], dt, i, q })
    }

    pub fn len(&self) -> usize {
        self.i.len()
    }

    pub fn is_empty(&self) -> bool {
        self.i.is_empty()
    }

    pub fn time(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.t_start + k as f64 * self.dt).collect()
    }

    pub fn amplitude(&self, k: usize) -> Complex64 {
        Complex64::new(self.i[k], self.q[k])
    }
}

/// Drive and acquisition settings for [`simulate_ringdown`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RingdownConfig {
    /// Total energy decay rate `kappa` (1/s).
    pub kappa: f64,
    /// External coupling rate `kappa_e` (1/s).
    pub kappa_e: f64,
    /// Pump-resonator detuning `omega_p - omega_r` (rad/s).
    pub delta: f64,
    pub a_p: f64,
    /// Pulse-on duration (s).
    pub t_on: f64,
    /// Record length (s).
    pub t_total: f64,
    pub sample_rate: f64,
    /// Noise standard deviation per quadrature.
    pub noise: f64,
    pub shots: usize,
    pub seed: u64,
    /// Standard deviation of a random global phase per shot (rad).
    pub phase_jitter: f64,
}

impl RingdownConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.kappa_e > 0.0 && self.kappa_e <= self.kappa) {
            return invalid("need 0 < kappa_e <= kappa");
        }
        if !(self.t_on > 0.0 && self.t_total > self.t_on && self.sample_rate > 0.0) {
            return invalid("need 0 < t_on < t_total and a positive sample rate");
        }
        if self.noise < 0.0 || self.shots == 0 {
            return invalid("noise must be non-negative and shots at least one");
        }
        let fastest = self.kappa.max(self.delta.abs());
        if 2.0 * PI * self.sample_rate < 10.0 * fastest {
            return Err(Error::InvalidInput(format!(
                "sample rate {:.3e} Hz does not resolve rates up to {fastest:.3e} rad/s",
                self.sample_rate
            )));
        }
        Ok(())
    }

    pub fn n_samples(&self) -> usize {
        (self.t_total * self.sample_rate).round() as usize
    }

    /// Steady-state reflected amplitude `A_S`.
    pub fn a_s(&self) -> Complex64 {
        self.a_p * (1.0 - self.coupling_factor())
    }

    /// Initial ringdown amplitude `A_R`.
    pub fn a_r(&self) -> Complex64 {
        self.a_p * self.coupling_factor()
    }

    fn coupling_factor(&self) -> Complex64 {
        Complex64::new(2.0 * self.kappa_e / self.kappa, 0.0) / Complex64::new(1.0, 2.0 * self.delta / self.kappa)
    }

    /// Noiseless output amplitude in the frame of the pump.
    pub fn a_out(&self, t: f64) -> Complex64 {
        if t < 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let c = self.coupling_factor();
        let rot = |tau: f64| Complex64::from_polar((-0.5 * self.kappa * tau).exp(), -self.delta * tau);
        if t < self.t_on {
            self.a_p * (1.0 - c * (1.0 - rot(t)))
        } else {
            -self.a_p * c * (1.0 - rot(self.t_on)) * rot(t - self.t_on)
        }
    }
}

/// Simulate `cfg.shots` demodulated records with additive Gaussian noise.
pub fn simulate_ringdown(cfg: &RingdownConfig) -> Result<Vec<RingdownShot>> {
    cfg.validate()?;
    let n = cfg.n_samples();
    let dt = 1.0 / cfg.sample_rate;
    let clean: Vec<Complex64> = (0..n).map(|k| cfg.a_out(k as f64 * dt)).collect();
    Ok((0..cfg.shots as u64)
        .into_par_iter()
        .map(|s| {
            let mut r = rng(cfg.seed, s);
            let ph = if cfg.phase_jitter > 0.0 {
                Complex64::from_polar(1.0, cfg.phase_jitter * normal(&mut r))
            } else {
                Complex64::new(1.0, 0.0)
            };
            let (mut i, mut q) = (Vec::with_capacity(n), Vec::with_capacity(n));
            for z in &clean {
                let v = z * ph;
                i.push(v.re + cfg.noise * normal(&mut r));
                q.push(v.im + cfg.noise * normal(&mut r));
            }
            RingdownShot { t_start: 0.0, dt, i, q }
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Averaging {
    /// `<I^2 + Q^2>`, insensitive to phase.
    Incoherent,
    /// `<I>^2 + <Q>^2`, sensitive to phase.
    Coherent,
}

fn check_shots(shots: &[RingdownShot]) -> Result<usize> {
    let Some(first) = shots.first() else {
        return invalid("no shots to average");
    };
    let n = first.len();
    if shots.iter().any(|s| s.len() != n || s.q.len() != n || (s.dt - first.dt).abs() > 1e-9 * first.dt) {
        return invalid("shots differ in length or sampling");
    }
    Ok(n)
}

/// Per-sample sum of `f(shot, k)` over shots. Partial sums over fixed
/// chunks are combined in order so the result does not depend on scheduling.
fn sum_over_shots<T, F>(shots: &[RingdownShot], n: usize, zero: T, f: F) -> Vec<T>
where
    T: Copy + Send + Sync + std::ops::AddAssign,
    F: Fn(&RingdownShot, usize) -> T + Sync,
{
    let parts: Vec<Vec<T>> = shots
        .par_chunks(16)
        .map(|chunk| {
            let mut acc = vec![zero; n];
            for s in chunk {
                for (k, a) in acc.iter_mut().enumerate() {
                    *a += f(s, k);
                }
            }
            acc
        })
        .collect();
    let mut total = vec![zero; n];
    for p in parts {
        for (t, v) in total.iter_mut().zip(p) {
            *t += v;
        }
    }
    total
}

/// Shot-averaged complex amplitude `<I> + i <Q>`.
pub fn mean_amplitude(shots: &[RingdownShot]) -> Result<Vec<Complex64>> {
    let n = check_shots(shots)?;
    let m = shots.len() as f64;
    let sum = sum_over_shots(shots, n, Complex64::new(0.0, 0.0), |s, k| s.amplitude(k));
    Ok(sum.into_iter().map(|z| z / m).collect())
}

/// Energy trace averaged over shots.
pub fn average_shots(shots: &[RingdownShot], mode: Averaging) -> Result<Vec<f64>> {
    let n = check_shots(shots)?;
    match mode {
        Averaging::Coherent => Ok(mean_amplitude(shots)?.into_iter().map(|z| z.norm_sqr()).collect()),
        Averaging::Incoherent => {
            let m = shots.len() as f64;
            let sum = sum_over_shots(shots, n, 0.0, |s, k| s.i[k] * s.i[k] + s.q[k] * s.q[k]);
            Ok(sum.into_iter().map(|e| e / m).collect())
        }
    }
}

#[derive(Clone, Debug)]
pub struct DecayFit {
    /// Energy decay time.
    pub tau: Estimate,
    /// Energy at the window start.
    pub amplitude: Estimate,
    pub offset: Estimate,
    /// False when the decay is not resolved above the offset.
    pub identifiable: bool,
    pub fit: FitResult,
}

/// Fit `A exp(-(t - t_a)/tau) + c` to `energy` over `t_a <= t <= t_b`.
pub fn fit_decay(time: &[f64], energy: &[f64], window: (f64, f64)) -> Result<DecayFit> {
    if time.len() != energy.len() {
        return invalid("time and energy lengths differ");
    }
    let (ta, tb) = window;
    let idx: Vec<usize> = (0..time.len()).filter(|&k| time[k] >= ta && time[k] <= tb).collect();
    if idx.len() < 8 {
        return invalid("fit window holds fewer than eight samples");
    }
    let t: Vec<f64> = idx.iter().map(|&k| time[k] - ta).collect();
    let e: Vec<f64> = idx.iter().map(|&k| energy[k]).collect();
    let m = e.len();
    let tail = &e[m - m / 10 - 1..];
    let c0 = tail.iter().sum::<f64>() / tail.len() as f64;
    let head = e[..(m / 20).max(2)].iter().sum::<f64>() / (m / 20).max(2) as f64;
    let span = (t[m - 1] - t[0]).max(f64::MIN_POSITIVE);
    let a0 = (head - c0).abs().max(1e-12 * head.abs().max(1e-300));
    // time at which the excess falls to 1/e of its start
    let half = c0 + a0 / std::f64::consts::E;
    let tau0 = t
        .iter()
        .zip(&e)
        .find(|(_, v)| **v <= half)
        .map(|(tt, _)| tt.max(span / m as f64))
        .unwrap_or(span);
    let scale = head.abs().max(c0.abs()).max(f64::MIN_POSITIVE);
    let specs = vec![
        ParamSpec::log("tau", tau0).bounds(1e-6 * span, 1e6 * span),
        ParamSpec::linear("amplitude", a0 / scale),
        ParamSpec::linear("offset", c0 / scale),
    ];
    let residual = |p: &[f64]| -> Vec<f64> {
        t.iter().zip(&e).map(|(tt, v)| p[1] * (-tt / p[0]).exp() + p[2] - v / scale).collect()
    };
    let res = fit(&FitProblem::new(residual, specs))?;
    let tau = Estimate::new(res.values[0], res.sigma[0]);
    let amplitude = Estimate::new(res.values[1] * scale, res.sigma[1] * scale);
    let offset = Estimate::new(res.values[2] * scale, res.sigma[2] * scale);
    let identifiable = tau.value > 0.0
        && tau.sigma.is_finite()
        && amplitude.value > 3.0 * amplitude.sigma
        && tau.sigma < tau.value
        && tau.value < 10.0 * span;
    Ok(DecayFit { tau, amplitude, offset, identifiable, fit: res })
}

/// `Q = 2 pi f0 tau`.
pub fn q_from_tau(f0: f64, tau: f64) -> f64 {
    2.0 * PI * f0 * tau
}

/// Internal quality factor from total `q` and external `q_e`.
pub fn q_internal(q: f64, q_e: f64) -> Result<f64> {
    let inv = 1.0 / q - 1.0 / q_e;
    if !(inv > 0.0) {
        return Err(Error::InvalidInput(format!("Q = {q:.4e} is not below Q_e = {q_e:.4e}")));
    }
    Ok(1.0 / inv)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetuningEstimate {
    /// Detuning in rad/s; zero when below resolution.
    pub delta: f64,
    pub below_resolution: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum DetuningSign {
    #[default]
    Plus,
    Minus,
}

impl DetuningSign {
    pub fn value(self) -> f64 {
        match self {
            DetuningSign::Plus => 1.0,
            DetuningSign::Minus => -1.0,
        }
    }
}

/// Detuning from the steady-state and ringdown amplitude ratio.
pub fn detuning_from_amplitudes(
    a_s: f64,
    a_r: f64,
    kappa_e: f64,
    kappa: f64,
    sign: DetuningSign,
) -> Result<DetuningEstimate> {
    if !(a_r > 0.0 && a_s >= 0.0 && kappa_e > 0.0 && kappa > 0.0) {
        return invalid("amplitudes and rates must be positive");
    }
    let disc = (a_s / a_r).powi(2) - (kappa / (2.0 * kappa_e) - 1.0).powi(2);
    if !(disc >= 0.0) {
        return Ok(DetuningEstimate { delta: 0.0, below_resolution: true });
    }
    Ok(DetuningEstimate { delta: sign.value() * kappa_e * disc.sqrt(), below_resolution: false })
}

/// Detuning from the dominant beat in the promptly reflected transient.
///
/// `segment` is the pump-frame amplitude from pulse start, `a_s` the
/// steady state removed before the transform. The sign follows the
/// `exp(-i delta t)` rotation of the transient.
pub fn detuning_from_fft(segment: &[Complex64], dt: f64, a_s: Complex64) -> Result<DetuningEstimate> {
    let n = segment.len();
    if n < 16 || !(dt > 0.0) {
        return invalid("transient segment too short");
    }
    let nfft = (16 * n).next_power_of_two();
    let mut buf: Vec<Complex64> = vec![Complex64::new(0.0, 0.0); nfft];
    for (k, z) in segment.iter().enumerate() {
        // trailing half-Hann: full weight at the pulse edge
        let w = 0.5 * (1.0 + (PI * k as f64 / n as f64).cos());
        buf[k] = (z - a_s) * w;
    }
    FftPlanner::new().plan_fft_forward(nfft).process(&mut buf);
    let mag: Vec<f64> = buf.iter().map(|z| z.norm()).collect();
    let (kmax, _) = mag.iter().enumerate().fold((0, -1.0), |b, (k, &m)| if m > b.1 { (k, m) } else { b });
    let at = |k: isize| mag[k.rem_euclid(nfft as isize) as usize];
    let (ym, y0, yp) = (at(kmax as isize - 1), at(kmax as isize), at(kmax as isize + 1));
    let denom = ym - 2.0 * y0 + yp;
    let frac = if denom.abs() > 0.0 { 0.5 * (ym - yp) / denom } else { 0.0 };
    let mut bin = kmax as f64 + frac;
    if bin > nfft as f64 / 2.0 {
        bin -= nfft as f64;
    }
    let f = bin / (nfft as f64 * dt);
    let resolution = 1.0 / (n as f64 * dt);
    if f.abs() < resolution {
        return Ok(DetuningEstimate { delta: 0.0, below_resolution: true });
    }
    Ok(DetuningEstimate { delta: -2.0 * PI * f, below_resolution: false })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RingdownOptions {
    /// Resonance frequency used to convert decay times to `Q` (Hz).
    pub f0: f64,
    /// External quality factor.
    pub q_e: f64,
    /// Drive-off time (s).
    pub t_on: f64,
    pub sign: DetuningSign,
    /// Decay samples earlier than this many `1/kappa` after drive-off are
    /// excluded from the fits.
    pub skip_kappa: f64,
}

impl RingdownOptions {
    pub fn new(f0: f64, q_e: f64, t_on: f64) -> Self {
        RingdownOptions { f0, q_e, t_on, sign: DetuningSign::Plus, skip_kappa: 3.0 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RingdownResult {
    pub t1: Estimate,
    pub t2: Estimate,
    pub q_i_t1: Estimate,
    pub q_i_t2: Estimate,
    pub a_s: Complex64,
    pub a_r: Complex64,
    pub delta_ra: DetuningEstimate,
    pub delta_fft: DetuningEstimate,
    pub t1_identifiable: bool,
    pub t2_identifiable: bool,
}

fn q_i_estimate(f0: f64, q_e: f64, tau: Estimate) -> Estimate {
    let q = q_from_tau(f0, tau.value);
    match q_internal(q, q_e) {
        Ok(qi) => {
            // d Q_i / d tau = (Q_i / Q)^2 dQ/dtau
            let s = (qi / q).powi(2) * 2.0 * PI * f0 * tau.sigma;
            Estimate::new(qi, s)
        }
        Err(_) => Estimate::new(f64::NAN, f64::INFINITY),
    }
}

/// Decay fit with the first `skip` decay times after drive-off excluded.
/// Returns the fit and the time of its first sample.
fn two_stage_decay(time: &[f64], energy: &[f64], t_on: f64, t_end: f64, skip: f64) -> Result<(DecayFit, f64)> {
    let first = fit_decay(time, energy, (t_on, t_end))?;
    let start = (t_on + skip * first.tau.value).clamp(t_on, t_on + 0.5 * (t_end - t_on));
    let fitted = fit_decay(time, energy, (start, t_end))?;
    let t_a = time.iter().copied().find(|&t| t >= start).unwrap_or(start);
    Ok((fitted, t_a))
}

/// Full analysis of a set of shots: `T1` from incoherent and `T2` from
/// coherent averages, amplitudes and both detuning estimates.
pub fn analyze_ringdown(shots: &[RingdownShot], opts: &RingdownOptions) -> Result<RingdownResult> {
    check_shots(shots)?;
    let time = shots[0].time();
    let t_end = *time.last().unwrap_or(&0.0);
    if !(opts.t_on > time[0] && opts.t_on < t_end) {
        return invalid("drive-off time lies outside the record");
    }
    let e_mag = average_shots(shots, Averaging::Incoherent)?;
    let mean = mean_amplitude(shots)?;
    let e_cpx: Vec<f64> = mean.iter().map(|z| z.norm_sqr()).collect();

    let (d1, s1) = two_stage_decay(&time, &e_mag, opts.t_on, t_end, opts.skip_kappa)?;
    let (d2, s2) = two_stage_decay(&time, &e_cpx, opts.t_on, t_end, opts.skip_kappa)?;
    // amplitudes come from whichever average resolves the decay better;
    // without dephasing the coherent one carries sqrt(N) more SNR
    let rel = |d: &DecayFit| if d.identifiable { d.tau.sigma / d.tau.value } else { f64::INFINITY };
    let (amp_fit, t_a) = if rel(&d1) <= rel(&d2) { (&d1, s1) } else { (&d2, s2) };
    if !amp_fit.identifiable {
        return Err(Error::NotConverged("decay is not resolved above the noise floor in either average".into()));
    }
    let kappa = 1.0 / amp_fit.tau.value;

    // rewind the fitted amplitude from the window start to drive-off
    let a_r_energy = amp_fit.amplitude.value * ((t_a - opts.t_on) / amp_fit.tau.value).exp();
    let a_r_mag = a_r_energy.max(0.0).sqrt();

    // steady state from the last fifth of the drive window, per shot
    let ss: Vec<usize> = (0..time.len()).filter(|&k| time[k] >= 0.8 * opts.t_on && time[k] < opts.t_on).collect();
    if ss.len() < 2 {
        return invalid("drive window too short to estimate the steady state");
    }
    let per_shot: Vec<Complex64> = shots
        .iter()
        .map(|s| ss.iter().map(|&k| s.amplitude(k)).sum::<Complex64>() / ss.len() as f64)
        .collect();
    let a_s_mag = per_shot.iter().map(|z| z.norm()).sum::<f64>() / per_shot.len() as f64;
    let a_s_cpx = ss.iter().map(|&k| mean[k]).sum::<Complex64>() / ss.len() as f64;
    let kappa_e = 2.0 * PI * opts.f0 / opts.q_e;
    let delta_ra = detuning_from_amplitudes(a_s_mag, a_r_mag.max(f64::MIN_POSITIVE), kappa_e, kappa, opts.sign)?;

    let dt = shots[0].dt;
    let seg_len = ((opts.t_on.min(20.0 / kappa)) / dt).floor().max(16.0) as usize;
    let seg_start = time.iter().position(|&t| t >= 0.0).unwrap_or(0);
    let seg_end = (seg_start + seg_len).min(time.len());
    let delta_fft = detuning_from_fft(&mean[seg_start..seg_end], dt, a_s_cpx)?;

    let off_idx = time.iter().position(|&t| t >= opts.t_on).unwrap_or(0);
    let phase = mean[off_idx].arg();
    Ok(RingdownResult {
        t1: d1.tau,
        t2: d2.tau,
        q_i_t1: q_i_estimate(opts.f0, opts.q_e, d1.tau),
        q_i_t2: q_i_estimate(opts.f0, opts.q_e, d2.tau),
        a_s: a_s_cpx,
        a_r: Complex64::from_polar(a_r_mag, phase),
        delta_ra,
        delta_fft,
        t1_identifiable: d1.identifiable,
        t2_identifiable: d2.identifiable,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> RingdownConfig {
        RingdownConfig {
            kappa: 370.0,
            kappa_e: 265.0,
            delta: 0.0,
            a_p: 1.0,
            t_on: 0.15,
            t_total: 0.18,
            sample_rate: 20e3,
            noise: 0.0,
            shots: 1,
            seed: 0,
            phase_jitter: 0.0,
        }
    }

    #[test]
    fn steady_state_and_turn_off_are_continuous() {
        let c = RingdownConfig { delta: 500.0, ..cfg() };
        let before = c.a_out(c.t_on - 1e-12);
        let after = c.a_out(c.t_on);
        assert!((before - c.a_p - after).norm() < 1e-9);
        assert!((before - c.a_s()).norm() < 1e-9);
        assert!((after.norm() - c.a_r().norm()).abs() < 1e-9);
    }

    #[test]
    fn undersampling_rejected() {
        let c = RingdownConfig { delta: 1e6, ..cfg() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn amplitude_detuning_zero_in_overcoupled_limit() {
        let d = detuning_from_amplitudes(1.0, 2.0, 100.0, 100.0, DetuningSign::Plus);
        assert_eq!(d.unwrap(), DetuningEstimate { delta: 0.0, below_resolution: false });
    }
}
