//! Reflection (S11) model of a single resonance and its fit.
//!
//! The diameter-correction form is used: the measured circle may be rotated
//! by an impedance-mismatch angle `phi`, with `Q_e = |Q_e_hat| / cos(phi)`.

use crate::consts::HBAR;
use crate::error::{invalid, Error, Result};
use crate::fit::{fit, propagate, Estimate, FitResult, ParamSpec, FitProblem};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

/// Complex reflection data on a frequency grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexTrace {
    pub freq_hz: Vec<f64>,
    pub s: Vec<Complex64>,
}

impl ComplexTrace {
    pub fn new(freq_hz: Vec<f64>, s: Vec<Complex64>) -> Result<Self> {
        let t = ComplexTrace { freq_hz, s };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.freq_hz.len() != self.s.len() {
            return invalid("frequency and data columns differ in length");
        }
        if self.freq_hz.len() < 8 {
            return invalid("trace needs at least 8 points");
        }
        if self.freq_hz.iter().any(|f| !f.is_finite() || *f <= 0.0) {
            return invalid("frequencies must be finite and positive");
        }
        if self.freq_hz.windows(2).any(|w| w[1] <= w[0]) {
            return invalid("frequencies must be strictly increasing");
        }
        if self.s.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return invalid("trace contains non-finite samples");
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.freq_hz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freq_hz.is_empty()
    }

    pub fn span(&self) -> f64 {
        self.freq_hz[self.len() - 1] - self.freq_hz[0]
    }

    /// Multiply every sample by a complex constant.
    pub fn scaled(&self, k: Complex64) -> ComplexTrace {
        ComplexTrace {
            freq_hz: self.freq_hz.clone(),
            s: self.s.iter().map(|z| z * k).collect(),
        }
    }
}

/// Intrinsic parameters of one resonance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResonanceParams {
    pub f_r: f64,
    pub q_i: f64,
    pub q_e_mag: f64,
    pub phi: f64,
}

impl ResonanceParams {
    pub fn new(f_r: f64, q_i: f64, q_e_mag: f64, phi: f64) -> Result<Self> {
        let p = ResonanceParams { f_r, q_i, q_e_mag, phi };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f_r > 0.0 && self.f_r.is_finite()) {
            return invalid("f_r must be positive");
        }
        if !(self.q_i > 0.0 && self.q_e_mag > 0.0) {
            return invalid("quality factors must be positive");
        }
        if !(self.phi.abs() < FRAC_PI_2) {
            return invalid("phi must lie in (-pi/2, pi/2)");
        }
        Ok(())
    }

    pub fn q_e(&self) -> f64 {
        self.q_e_mag / self.phi.cos()
    }

    pub fn q_total(&self) -> f64 {
        1.0 / (1.0 / self.q_i + 1.0 / self.q_e())
    }

    pub fn omega_r(&self) -> f64 {
        2.0 * PI * self.f_r
    }

    pub fn kappa(&self) -> f64 {
        self.omega_r() / self.q_total()
    }

    pub fn kappa_i(&self) -> f64 {
        self.omega_r() / self.q_i
    }

    pub fn kappa_e(&self) -> f64 {
        self.omega_r() / self.q_e()
    }

    /// Linewidth `kappa / 2 pi` in Hz.
    pub fn linewidth_hz(&self) -> f64 {
        self.f_r / self.q_total()
    }
}

/// Diameter-corrected reflection coefficient at frequency `f` (Hz).
pub fn eval_s11(p: &ResonanceParams, f: f64) -> Complex64 {
    let q = p.q_total();
    let x = (f - p.f_r) / p.f_r;
    let num = Complex64::from_polar(2.0 * q / p.q_e_mag, p.phi);
    Complex64::new(1.0, 0.0) - num / Complex64::new(1.0, 2.0 * q * x)
}

/// Complex baseline `(a + b (f - f_r)) e^{i theta}` multiplying the resonance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Background {
    pub a: f64,
    pub b: f64,
    pub theta: f64,
}

impl Background {
    pub const UNITY: Background = Background { a: 1.0, b: 0.0, theta: 0.0 };

    pub fn eval(&self, f: f64, f_r: f64) -> Complex64 {
        Complex64::from_polar(self.a + self.b * (f - f_r), self.theta)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ReflectionFitOptions {
    /// Co-fit the complex baseline instead of assuming a normalised trace.
    pub fit_background: bool,
}

impl Default for ReflectionFitOptions {
    fn default() -> Self {
        ReflectionFitOptions { fit_background: true }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResonanceEstimates {
    pub f_r_hz: Estimate,
    pub q_i: Estimate,
    pub q_e_mag: Estimate,
    pub phi_rad: Estimate,
    pub q_e_dcm: Estimate,
    pub kappa_i_rad_s: Estimate,
    pub kappa_e_rad_s: Estimate,
}

#[derive(Clone, Debug)]
pub struct ResonanceFit {
    pub params: ResonanceParams,
    pub estimates: ResonanceEstimates,
    pub background: Background,
    pub fit: FitResult,
}

impl ResonanceFit {
    /// Model evaluated on `freqs`, including the fitted baseline.
    pub fn model(&self, freqs: &[f64]) -> Vec<Complex64> {
        freqs
            .iter()
            .map(|&f| self.background.eval(f, self.params.f_r) * eval_s11(&self.params, f))
            .collect()
    }
}

struct Seed {
    params: ResonanceParams,
    background: Background,
}

fn second_difference_rms(z: &[Complex64]) -> f64 {
    let n = z.len();
    let s: f64 = (1..n - 1).map(|k| (z[k + 1] - 2.0 * z[k] + z[k - 1]).norm_sqr()).sum();
    (s / (6.0 * (n - 2) as f64)).sqrt()
}

fn seed(trace: &ComplexTrace, fit_background: bool) -> Result<Seed> {
    let n = trace.len();
    let f = &trace.freq_hz;
    let one = Complex64::new(1.0, 0.0);
    let (s0, s1) = if fit_background { (trace.s[0], trace.s[n - 1]) } else { (one, one) };
    if s0.norm() == 0.0 || s1.norm() == 0.0 {
        return Err(Error::NoResonance("baseline is zero".into()));
    }
    let line = |x: f64| s0 + (s1 - s0) * ((x - f[0]) / trace.span());
    let sn: Vec<Complex64> = trace.s.iter().zip(f).map(|(z, &x)| z / line(x)).collect();
    let dev: Vec<f64> = sn.iter().map(|z| (Complex64::new(1.0, 0.0) - z).norm()).collect();
    let (kmax, &depth) = dev.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).expect("non-empty");
    let noise = second_difference_rms(&sn);
    if depth <= 3.0 * noise || depth < 1e-12 {
        return Err(Error::NoResonance(format!(
            "dip depth {depth:.3e} is not above three times the noise rms {noise:.3e}"
        )));
    }
    let half = depth / 2f64.sqrt();
    let crossing = |k0: usize, step: isize| -> Option<f64> {
        let mut k = k0 as isize;
        loop {
            let next = k + step;
            if next < 0 || next >= n as isize {
                return None;
            }
            let (a, b) = (k as usize, next as usize);
            if dev[b] < half {
                let t = (dev[a] - half) / (dev[a] - dev[b]);
                return Some(f[a] + t * (f[b] - f[a]));
            }
            k = next;
        }
    };
    let f_r = f[kmax];
    let fwhm = match (crossing(kmax, -1), crossing(kmax, 1)) {
        (Some(lo), Some(hi)) if hi > lo => hi - lo,
        _ => trace.span() / 10.0,
    };
    let q = f_r / fwhm;
    let phi = (Complex64::new(1.0, 0.0) - sn[kmax]).arg().clamp(-1.4, 1.4);
    let q_e_mag = 2.0 * q / depth.min(1.99);
    let inv_qi = (1.0 / q - phi.cos() / q_e_mag).max(1e-3 / q);
    let params = ResonanceParams { f_r, q_i: 1.0 / inv_qi, q_e_mag, phi };
    let bg_r = line(f_r);
    let slope = ((s1 - s0) / trace.span() * Complex64::from_polar(1.0, -bg_r.arg())).re;
    let background = Background { a: bg_r.norm(), b: slope, theta: bg_r.arg() };
    Ok(Seed { params, background })
}

/// Fit the diameter-corrected model to a reflection trace.
pub fn fit_reflection(trace: &ComplexTrace, opts: ReflectionFitOptions) -> Result<ResonanceFit> {
    trace.validate()?;
    let sd = seed(trace, opts.fit_background)?;
    let f_lo = trace.freq_hz[0];
    let f_hi = trace.freq_hz[trace.len() - 1];
    let lw = sd.params.linewidth_hz();
    let f0 = sd.params.f_r;
    let span = trace.span();
    let mut specs = vec![
        ParamSpec::linear("f_r_offset", 0.0).bounds((f_lo - f0) / lw, (f_hi - f0) / lw),
        ParamSpec::log("q_i", sd.params.q_i),
        ParamSpec::log("q_e_mag", sd.params.q_e_mag),
        ParamSpec::linear("phi", sd.params.phi).bounds(-FRAC_PI_2 + 1e-9, FRAC_PI_2 - 1e-9).step(1e-6),
    ];
    if opts.fit_background {
        specs.push(ParamSpec::log("a", sd.background.a));
        specs.push(ParamSpec::linear("b_rel", sd.background.b * span / sd.background.a).step(1e-6));
        specs.push(ParamSpec::linear("theta", sd.background.theta).step(1e-6));
    }
    let fb = opts.fit_background;
    let unpack = move |p: &[f64]| -> (ResonanceParams, Background) {
        let rp = ResonanceParams { f_r: f0 + lw * p[0], q_i: p[1], q_e_mag: p[2], phi: p[3] };
        let bg = if fb {
            Background { a: p[4], b: p[4] * p[5] / span, theta: p[6] }
        } else {
            Background::UNITY
        };
        (rp, bg)
    };
    let residual = |p: &[f64]| -> Vec<f64> {
        let (rp, bg) = unpack(p);
        let mut r = Vec::with_capacity(2 * trace.len());
        for (&f, z) in trace.freq_hz.iter().zip(&trace.s) {
            let m = bg.eval(f, rp.f_r) * eval_s11(&rp, f);
            r.push(m.re - z.re);
            r.push(m.im - z.im);
        }
        r
    };
    let res = fit(&FitProblem::new(residual, specs))?;
    if !res.converged() {
        return Err(Error::NotConverged(format!("reflection fit stopped after {} iterations", res.iterations)));
    }
    let (params, background) = unpack(&res.values);
    let mut cov = res.covariance.view((0, 0), (4, 4)).into_owned();
    for k in 0..4 {
        cov[(0, k)] *= lw;
        cov[(k, 0)] *= lw;
    }
    let estimates = derived_estimates(&params, &cov);
    Ok(ResonanceFit { params, estimates, background, fit: res })
}

/// Uncertainties of derived quantities from the covariance of
/// `(f_r, q_i, q_e_mag, phi)`.
fn derived_estimates(p: &ResonanceParams, cov: &DMatrix<f64>) -> ResonanceEstimates {
    let sd = |i: usize| cov[(i, i)].max(0.0).sqrt();
    let c = p.phi.cos();
    let t = p.phi.tan();
    let qe = p.q_e();
    let w = p.omega_r();
    let g_qe = [0.0, 0.0, 1.0 / c, qe * t];
    let g_ki = [2.0 * PI / p.q_i, -w / (p.q_i * p.q_i), 0.0, 0.0];
    // kappa_e = w cos(phi) / q_e_mag
    let g_ke = [2.0 * PI * c / p.q_e_mag, 0.0, -w * c / (p.q_e_mag * p.q_e_mag), -w * p.phi.sin() / p.q_e_mag];
    ResonanceEstimates {
        f_r_hz: Estimate::new(p.f_r, sd(0)),
        q_i: Estimate::new(p.q_i, sd(1)),
        q_e_mag: Estimate::new(p.q_e_mag, sd(2)),
        phi_rad: Estimate::new(p.phi, sd(3)),
        q_e_dcm: Estimate::new(qe, propagate(cov, &g_qe)),
        kappa_i_rad_s: Estimate::new(p.kappa_i(), propagate(cov, &g_ki)),
        kappa_e_rad_s: Estimate::new(p.kappa_e(), propagate(cov, &g_ke)),
    }
}

/// Frequency grid whose points are equally spaced in phase around the
/// resonance circle.
///
/// `linewidth_hz` is the full linewidth `kappa / 2 pi` and `span_hz` the
/// total sweep width; their ratio `W` sets how far into the tails the sweep
/// reaches. The phase span is `2 atan(W)`, which stays regular at `W = 1`.
pub fn homophasal_sweep(f_r: f64, linewidth_hz: f64, span_hz: f64, n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return invalid("sweep needs at least two points");
    }
    if !(linewidth_hz > 0.0 && span_hz > 0.0 && f_r > 0.0) {
        return invalid("f_r, linewidth and span must be positive");
    }
    let w = span_hz / linewidth_hz;
    let dtheta = 2.0 * w.atan();
    let half = 0.5 * (n - 1) as f64;
    Ok((0..n)
        .map(|k| {
            let m = k as f64 - half;
            f_r + 0.5 * span_hz * (m * dtheta / (n - 1) as f64).tan() / w
        })
        .collect())
}

/// Mean intracavity phonon number for a drive of `power_w` at detuning
/// `detuning_rad_s` from the resonance.
pub fn phonon_number(p: &ResonanceParams, power_w: f64, detuning_rad_s: f64) -> f64 {
    let k = p.kappa();
    let ke = p.kappa_e();
    ke / (detuning_rad_s * detuning_rad_s + 0.25 * k * k) * power_w / (HBAR * p.omega_r())
}
