//! Amplifier-chain calibration from the Johnson-Nyquist noise of a
//! variable-temperature load (Y-factor method).
//!
//! The output noise in a resolution bandwidth `df` obeys
//! `P_out = G (h f df N_sys + P_R)` with `P_R` the noise delivered by the
//! matched load.

use crate::consts::{H, K_B};
use crate::error::{invalid, Error, Result};
use crate::units::{db_to_lin, lin_to_db};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseForm {
    /// `df (h f / 2) coth(h f / 2 k_B T)`, including zero-point noise.
    #[default]
    Full,
    /// `k_B T df`.
    Classical,
}

/// Matched-load noise power in bandwidth `df` at frequency `f`.
pub fn johnson_noise_power(temp_k: f64, df_hz: f64, f_hz: f64, form: NoiseForm) -> f64 {
    match form {
        NoiseForm::Classical => K_B * temp_k * df_hz,
        NoiseForm::Full => {
            let e = H * f_hz;
            if temp_k <= 0.0 {
                return df_hz * e / 2.0;
            }
            let x = e / (2.0 * K_B * temp_k);
            df_hz * e / 2.0 / x.tanh()
        }
    }
}

/// Output noise spectra: `p_out_w[i][j]` at `temps_k[i]`, `freqs_hz[j]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSweep {
    pub temps_k: Vec<f64>,
    pub freqs_hz: Vec<f64>,
    pub p_out_w: Vec<Vec<f64>>,
    pub rbw_hz: f64,
}

/// One row of the sweep CSV.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub temp_k: f64,
    pub freq_hz: f64,
    pub p_out_w: f64,
}

impl NoiseSweep {
    pub fn validate(&self) -> Result<()> {
        if self.temps_k.len() < 2 {
            return invalid("noise sweep needs at least two temperatures");
        }
        if self.freqs_hz.is_empty() {
            return invalid("noise sweep has no frequencies");
        }
        if !(self.rbw_hz > 0.0) {
            return invalid("resolution bandwidth must be positive");
        }
        if self.p_out_w.len() != self.temps_k.len() || self.p_out_w.iter().any(|r| r.len() != self.freqs_hz.len()) {
            return invalid("spectra do not match the temperature x frequency grid");
        }
        if self.p_out_w.iter().flatten().any(|p| !(*p > 0.0 && p.is_finite())) {
            return invalid("output powers must be positive");
        }
        if self.temps_k.iter().any(|t| !(*t >= 0.0)) {
            return invalid("temperatures must be non-negative");
        }
        Ok(())
    }

    /// Assemble a sweep from long-format records. Every temperature must
    /// carry the same set of frequencies.
    pub fn from_records(records: &[SweepRecord], rbw_hz: f64) -> Result<Self> {
        let mut temps: Vec<f64> = records.iter().map(|r| r.temp_k).collect();
        let mut freqs: Vec<f64> = records.iter().map(|r| r.freq_hz).collect();
        for v in [&mut temps, &mut freqs] {
            v.sort_by(|a, b| a.total_cmp(b));
            v.dedup();
        }
        let mut p = vec![vec![f64::NAN; freqs.len()]; temps.len()];
        for r in records {
            let i = temps.binary_search_by(|t| t.total_cmp(&r.temp_k)).unwrap();
            let j = freqs.binary_search_by(|f| f.total_cmp(&r.freq_hz)).unwrap();
            p[i][j] = r.p_out_w;
        }
        if p.iter().flatten().any(|v| v.is_nan()) {
            return invalid("sweep is missing some (temperature, frequency) combinations");
        }
        let s = NoiseSweep { temps_k: temps, freqs_hz: freqs, p_out_w: p, rbw_hz };
        s.validate()?;
        Ok(s)
    }

    pub fn records(&self) -> Vec<SweepRecord> {
        let mut out = Vec::with_capacity(self.temps_k.len() * self.freqs_hz.len());
        for (i, &t) in self.temps_k.iter().enumerate() {
            for (j, &f) in self.freqs_hz.iter().enumerate() {
                out.push(SweepRecord { temp_k: t, freq_hz: f, p_out_w: self.p_out_w[i][j] });
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GainResult {
    pub freq_hz: Vec<f64>,
    pub gain: Vec<f64>,
    pub gain_db: Vec<f64>,
    /// One-sigma error of `gain_db`.
    pub gain_db_sigma: Vec<f64>,
    /// Added noise in quanta.
    pub n_sys: Vec<f64>,
    /// Filled by [`GainResult::with_transmission`].
    pub atten_db: Option<Vec<f64>>,
}

impl GainResult {
    /// Attach the attenuation implied by a transmission measurement.
    pub fn with_transmission(mut self, s21_freq_hz: &[f64], s21_db: &[f64]) -> Result<Self> {
        let s21 = interpolate(s21_freq_hz, s21_db, &self.freq_hz)?;
        self.atten_db = Some(self.gain_db.iter().zip(&s21).map(|(g, s)| g - s).collect());
        Ok(self)
    }
}

/// Weighted line through `(x, y)` with relative errors on `y`.
/// Returns `(slope, intercept, slope_sigma)`.
fn line_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let (mut s, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&xi, &yi) in x.iter().zip(y) {
        let w = 1.0 / (yi * yi);
        s += w;
        sx += w * xi;
        sy += w * yi;
        sxx += w * xi * xi;
        sxy += w * xi * yi;
    }
    let det = s * sxx - sx * sx;
    let slope = (s * sxy - sx * sy) / det;
    let icept = (sxx * sy - sx * sxy) / det;
    let n = x.len();
    let sigma = if n > 2 {
        let chi2: f64 = x.iter().zip(y).map(|(&xi, &yi)| ((slope * xi + icept - yi) / yi).powi(2)).sum();
        (chi2 / (n - 2) as f64 * s / det).sqrt()
    } else {
        0.0
    };
    (slope, icept, sigma)
}

/// Per-frequency gain and added noise from a temperature sweep.
pub fn gain_from_noise_sweep(sweep: &NoiseSweep, form: NoiseForm) -> Result<GainResult> {
    sweep.validate()?;
    let fits: Vec<Result<(f64, f64, f64)>> = sweep
        .freqs_hz
        .par_iter()
        .enumerate()
        .map(|(j, &f)| {
            let pr: Vec<f64> = sweep.temps_k.iter().map(|&t| johnson_noise_power(t, sweep.rbw_hz, f, form)).collect();
            let (lo, hi) = pr.iter().fold((f64::MAX, 0.0f64), |(a, b), &p| (a.min(p), b.max(p)));
            if hi < 3.0 * lo {
                return invalid(format!("load noise spans only a factor {:.2} at {f:.4e} Hz; need 3", hi / lo));
            }
            let pout: Vec<f64> = sweep.p_out_w.iter().map(|row| row[j]).collect();
            let (g, icept, gs) = line_fit(&pr, &pout);
            if !(g > 0.0) {
                return Err(Error::InvalidInput(format!("fitted gain {g:.3e} is not positive at {f:.4e} Hz")));
            }
            Ok((g, icept / (g * H * f * sweep.rbw_hz), gs))
        })
        .collect();
    let mut out = GainResult {
        freq_hz: sweep.freqs_hz.clone(),
        gain: vec![],
        gain_db: vec![],
        gain_db_sigma: vec![],
        n_sys: vec![],
        atten_db: None,
    };
    for r in fits {
        let (g, n, gs) = r?;
        out.gain.push(g);
        out.gain_db.push(lin_to_db(g));
        out.gain_db_sigma.push(10.0 / std::f64::consts::LN_10 * gs / g);
        out.n_sys.push(n);
    }
    Ok(out)
}

/// Linear interpolation of `(xs, ys)` at `at`; `xs` ascending.
pub fn interpolate(xs: &[f64], ys: &[f64], at: &[f64]) -> Result<Vec<f64>> {
    if xs.len() != ys.len() || xs.is_empty() {
        return invalid("interpolation table is empty or ragged");
    }
    if xs.windows(2).any(|w| !(w[1] > w[0])) {
        return invalid("interpolation grid must be strictly increasing");
    }
    let (lo, hi) = (xs[0], xs[xs.len() - 1]);
    at.iter()
        .map(|&x| {
            if x < lo || x > hi {
                return invalid(format!("{x:.6e} lies outside the grid [{lo:.6e}, {hi:.6e}]"));
            }
            if xs.len() == 1 {
                return Ok(ys[0]);
            }
            let k = xs.partition_point(|&v| v <= x).clamp(1, xs.len() - 1);
            let (x0, x1) = (xs[k - 1], xs[k]);
            let t = (x - x0) / (x1 - x0);
            Ok(ys[k - 1] + t * (ys[k] - ys[k - 1]))
        })
        .collect()
}

/// Input-line attenuation `gain - s21` (dB) on the transmission grid, with
/// the gain interpolated linearly in frequency.
pub fn attenuation_from_transmission(
    s21_freq_hz: &[f64],
    s21_db: &[f64],
    gain_freq_hz: &[f64],
    gain_db: &[f64],
) -> Result<Vec<f64>> {
    if s21_freq_hz.len() != s21_db.len() {
        return invalid("transmission frequencies and values differ in length");
    }
    let g = interpolate(gain_freq_hz, gain_db, s21_freq_hz)?;
    Ok(g.iter().zip(s21_db).map(|(g, s)| g - s).collect())
}

/// Power at the device for a source power `p_source_dbm` behind
/// `atten_db` of input-line loss.
pub fn power_at_device(p_source_dbm: f64, atten_db: f64) -> f64 {
    1e-3 * db_to_lin(p_source_dbm - atten_db)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_point_limit() {
        let p = johnson_noise_power(0.0, 1.0, 5e8, NoiseForm::Full);
        assert!((p - H * 5e8 / 2.0).abs() < 1e-40);
        let q = johnson_noise_power(1e-4, 1.0, 5e8, NoiseForm::Full);
        assert!((q / p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn interpolation_endpoints() {
        let v = interpolate(&[1.0, 2.0, 4.0], &[0.0, 1.0, 5.0], &[1.0, 1.5, 3.0, 4.0]).unwrap();
        assert_eq!(v, vec![0.0, 0.5, 3.0, 5.0]);
        assert!(interpolate(&[1.0, 2.0], &[0.0, 1.0], &[2.5]).is_err());
    }
}
