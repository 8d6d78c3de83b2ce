//! Phenomenological TLS loss: saturable resonant absorption plus thermally
//! activated relaxation, fitted jointly across drive power and temperature.

pub mod freq_shift;
pub mod participation;
pub mod radiation;

pub use freq_shift::{fit_freq_shift, freq_shift_model, invert_freq_shift, FreqShiftFit, FreqShiftPoint};
pub use participation::{fit_participation, ParticipationFit, ParticipationPoint};
pub use radiation::{fit_radiation, RadiationFit, RadiationLeakParams, RadiationPoint};

use crate::consts::{H, K_B};
use crate::error::{invalid, Error, Result};
use crate::fit::{fit, Estimate, FitProblem, FitResult, ParamSpec};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Lower and upper fit bounds on the relaxation exponent `d`.
pub const D_BOUNDS: (f64, f64) = (0.5, 4.0);

/// Parameters of the joint loss model
/// `1/Q_i = 1/Q_res(nbar, T) + 1/Q_rel(T) + 1/Q_bkg`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TlsLossParams {
    pub f_delta0_diss: f64,
    pub beta: f64,
    pub n_c: f64,
    pub d: f64,
    pub q_rel_t0: f64,
    /// Reference temperature of the relaxation term (K). Never fitted.
    pub t0: f64,
    /// Background quality factor; infinite when absent.
    #[serde(default = "infinite", with = "inf_as_null")]
    pub q_bkg: f64,
}

fn infinite() -> f64 {
    f64::INFINITY
}

mod inf_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

impl TlsLossParams {
    /// Central values of the reference bulk-quartz fit.
    pub fn table1() -> Self {
        TlsLossParams {
            f_delta0_diss: 1.26e-5,
            beta: 0.56,
            n_c: 10.0,
            d: 1.9,
            q_rel_t0: 8.3e6,
            t0: 0.25,
            q_bkg: f64::INFINITY,
        }
    }

    /// Violated invariants, one message each. Empty when valid.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.f_delta0_diss > 0.0) {
            v.push("f_delta0_diss must be positive".to_string());
        }
        if !(self.beta > 0.0 && self.beta <= 2.0) {
            v.push("beta must lie in (0, 2]".to_string());
        }
        if !(self.n_c > 0.0) {
            v.push("n_c must be positive".to_string());
        }
        if !(self.q_rel_t0 > 0.0) {
            v.push("q_rel_t0 must be positive".to_string());
        }
        if !(self.t0 > 0.0) {
            v.push("t0 must be positive".to_string());
        }
        if !(self.q_bkg > 0.0) {
            v.push("q_bkg must be positive or absent".to_string());
        }
        if !self.d.is_finite() {
            v.push("d must be finite".to_string());
        }
        v
    }

    /// Soft warnings that do not make the parameters unusable.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.d < D_BOUNDS.0 || self.d > D_BOUNDS.1 {
            w.push(format!(
                "d = {} lies outside the fit bounds [{}, {}]",
                self.d, D_BOUNDS.0, D_BOUNDS.1
            ));
        }
        w
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            invalid(v.join("; "))
        }
    }

    /// Resonant (saturable) contribution `1/Q_res`.
    pub fn q_res_inv(&self, nbar: f64, temp_k: f64, freq_hz: f64) -> f64 {
        let th = thermal_tanh(freq_hz, temp_k);
        self.f_delta0_diss * th / (1.0 + (nbar / self.n_c).powf(self.beta) * th).sqrt()
    }

    /// Relaxation contribution `1/Q_rel`.
    pub fn q_rel_inv(&self, temp_k: f64) -> f64 {
        (temp_k / self.t0).powf(self.d) / self.q_rel_t0
    }

    pub fn q_inv(&self, nbar: f64, temp_k: f64, freq_hz: f64) -> f64 {
        self.q_res_inv(nbar, temp_k, freq_hz) + self.q_rel_inv(temp_k) + 1.0 / self.q_bkg
    }
}

/// `tanh(h f / 2 k T)`.
pub fn thermal_tanh(freq_hz: f64, temp_k: f64) -> f64 {
    (H * freq_hz / (2.0 * K_B * temp_k)).tanh()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossPoint {
    pub nbar: f64,
    pub temp_k: f64,
    pub q_i: f64,
    pub q_i_sigma: f64,
    pub freq_hz: f64,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct LossDataset {
    pub points: Vec<LossPoint>,
}

impl LossDataset {
    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return invalid("loss dataset is empty");
        }
        for (k, p) in self.points.iter().enumerate() {
            let ok = p.nbar >= 0.0
                && p.temp_k > 0.0
                && p.q_i > 0.0
                && p.q_i_sigma > 0.0
                && p.freq_hz > 0.0
                && [p.nbar, p.temp_k, p.q_i, p.q_i_sigma, p.freq_hz].iter().all(|x| x.is_finite());
            if !ok {
                return invalid(format!("loss point {k} has a non-positive or non-finite field"));
            }
        }
        Ok(())
    }

    pub fn distinct_temperatures(&self) -> usize {
        let mut t: Vec<f64> = self.points.iter().map(|p| p.temp_k).collect();
        t.sort_by(f64::total_cmp);
        t.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * b.abs());
        t.len()
    }

    /// Decades of `nbar` spanned by the positive entries.
    pub fn nbar_decades(&self) -> f64 {
        let pos = self.points.iter().map(|p| p.nbar).filter(|n| *n > 0.0);
        let (lo, hi) = pos.fold((f64::INFINITY, 0.0f64), |(lo, hi), n| (lo.min(n), hi.max(n)));
        if hi > 0.0 {
            (hi / lo).log10()
        } else {
            0.0
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct JointFitOptions {
    /// Parameters held at their initial value, by name.
    pub fixed: Vec<String>,
    /// Fit a finite background quality factor.
    pub fit_background: bool,
    /// Starting point; derived from the data when absent.
    pub initial: Option<TlsLossParams>,
    /// Reference temperature when no starting point is given.
    pub t0: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct TlsLossFit {
    pub params: TlsLossParams,
    pub estimates: BTreeMap<String, Estimate>,
    /// Names of parameters the data cannot constrain.
    pub unidentifiable: Vec<String>,
    pub fit: FitResult,
}

pub const TLS_PARAM_NAMES: [&str; 6] = ["f_delta0_diss", "beta", "n_c", "d", "q_rel_t0", "q_bkg"];

fn initial_guess(ds: &LossDataset, t0: f64) -> TlsLossParams {
    let mut pts = ds.points.clone();
    pts.sort_by(|a, b| a.temp_k.total_cmp(&b.temp_k).then(a.nbar.total_cmp(&b.nbar)));
    let coldest = pts[0];
    let fd = (1.0 / coldest.q_i) / thermal_tanh(coldest.freq_hz, coldest.temp_k);
    let hottest = pts.iter().max_by(|a, b| a.temp_k.total_cmp(&b.temp_k)).copied().unwrap_or(coldest);
    let rel_inv = (1.0 / hottest.q_i - fd * thermal_tanh(hottest.freq_hz, hottest.temp_k) * 0.5).max(1e-3 / hottest.q_i);
    let d0 = 2.0;
    let q_rel = (hottest.temp_k / t0).powf(d0) / rel_inv;
    let mut n: Vec<f64> = ds.points.iter().map(|p| p.nbar).filter(|n| *n > 0.0).collect();
    n.sort_by(f64::total_cmp);
    let n_c = if n.is_empty() { 10.0 } else { n[n.len() / 2] };
    TlsLossParams {
        f_delta0_diss: fd,
        beta: 0.5,
        n_c,
        d: d0,
        q_rel_t0: q_rel,
        t0,
        q_bkg: f64::INFINITY,
    }
}

/// Joint weighted fit of the loss model in `1/Q_i` space.
pub fn fit_tls_loss(ds: &LossDataset, opts: &JointFitOptions) -> Result<TlsLossFit> {
    ds.validate()?;
    let t0 = opts.initial.map(|p| p.t0).or(opts.t0).unwrap_or(0.25);
    let mut init = opts.initial.unwrap_or_else(|| initial_guess(ds, t0));
    init.t0 = t0;
    if opts.fit_background && !init.q_bkg.is_finite() {
        init.q_bkg = 1e3 * ds.points.iter().map(|p| p.q_i).fold(0.0, f64::max);
    }
    for name in &opts.fixed {
        if !TLS_PARAM_NAMES.contains(&name.as_str()) {
            return invalid(format!("unknown parameter to fix: {name}"));
        }
    }
    let is_fixed = |n: &str| opts.fixed.iter().any(|f| f == n);
    let mut specs = vec![
        ParamSpec::log("f_delta0_diss", init.f_delta0_diss).fixed(is_fixed("f_delta0_diss")),
        ParamSpec::log("beta", init.beta.min(2.0)).bounds(1e-3, 2.0).fixed(is_fixed("beta")),
        ParamSpec::log("n_c", init.n_c).bounds(1e-9, 1e15).fixed(is_fixed("n_c")),
        ParamSpec::linear("d", init.d.clamp(D_BOUNDS.0, D_BOUNDS.1))
            .bounds(D_BOUNDS.0, D_BOUNDS.1)
            .fixed(is_fixed("d")),
        ParamSpec::log("q_rel_t0", init.q_rel_t0).fixed(is_fixed("q_rel_t0")),
    ];
    let with_bkg = opts.fit_background || init.q_bkg.is_finite();
    if with_bkg {
        specs.push(ParamSpec::log("q_bkg", init.q_bkg).fixed(is_fixed("q_bkg") || !opts.fit_background));
    }
    let unpack = |p: &[f64]| TlsLossParams {
        f_delta0_diss: p[0],
        beta: p[1],
        n_c: p[2],
        d: p[3],
        q_rel_t0: p[4],
        t0,
        q_bkg: if with_bkg { p[5] } else { f64::INFINITY },
    };
    let residual = |p: &[f64]| -> Vec<f64> {
        let m = unpack(p);
        ds.points
            .iter()
            .map(|pt| {
                let obs = 1.0 / pt.q_i;
                let sig = pt.q_i_sigma / (pt.q_i * pt.q_i);
                (m.q_inv(pt.nbar, pt.temp_k, pt.freq_hz) - obs) / sig
            })
            .collect()
    };
    let res = fit(&FitProblem::new(residual, specs))?;
    if !res.converged() {
        return Err(Error::NotConverged(format!("joint loss fit stopped after {} iterations", res.iterations)));
    }
    let params = unpack(&res.values);
    let mut estimates = BTreeMap::new();
    let mut unidentifiable = Vec::new();
    for (k, name) in res.names.iter().enumerate() {
        estimates.insert(name.clone(), Estimate::new(res.values[k], res.sigma[k]));
        if !res.sigma[k].is_finite() {
            unidentifiable.push(name.clone());
        }
    }
    estimates.insert("t0".into(), Estimate::exact(t0));
    Ok(TlsLossFit { params, estimates, unidentifiable, fit: res })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn saturation_limits() {
        let p = TlsLossParams::table1();
        let f = 500e6;
        let t = 0.02;
        // nbar -> 0 gives the unsaturated loss
        let lo = p.q_res_inv(0.0, t, f);
        assert!((lo - p.f_delta0_diss * thermal_tanh(f, t)).abs() < 1e-20);
        // high nbar: decays as nbar^(-beta/2)
        let a = p.q_res_inv(1e8, t, f);
        let b = p.q_res_inv(1e10, t, f);
        let slope = (b / a).log10() / 2.0;
        assert!((slope + p.beta / 2.0).abs() < 1e-3);
    }

    #[test]
    fn relaxation_at_reference() {
        let p = TlsLossParams::table1();
        assert!((p.q_rel_inv(p.t0) - 1.0 / p.q_rel_t0).abs() < 1e-22);
    }

    #[test]
    fn validation_messages() {
        let mut p = TlsLossParams::table1();
        assert!(p.violations().is_empty());
        p.n_c = -1.0;
        assert!(p.violations().iter().any(|m| m.contains("n_c")));
        let mut q = TlsLossParams::table1();
        q.d = 5.0;
        assert!(q.violations().is_empty());
        assert!(q.warnings()[0].contains("[0.5, 4]"));
    }

    #[test]
    fn json_background_roundtrip() {
        let p = TlsLossParams::table1();
        let s = serde_json::to_string(&p).unwrap();
        assert!(s.contains("\"q_bkg\":null"));
        let back: TlsLossParams = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
    }
}
