//! Split of the reactive loss tangent into substrate and metal-film parts:
//! `F delta = delta_qz + F_Al (delta_Al - delta_qz)`.

use crate::error::{invalid, Result};
use crate::fit::Estimate;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticipationPoint {
    pub f_al: f64,
    pub f_delta0: f64,
    pub sigma: f64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ParticipationFit {
    pub delta_qz: Estimate,
    pub delta_al: Estimate,
    pub chi2: f64,
}

impl ParticipationFit {
    pub fn model(&self, f_al: f64) -> f64 {
        self.delta_qz.value + f_al * (self.delta_al.value - self.delta_qz.value)
    }
}

/// Weighted straight-line fit in the basis `(1 - F_Al, F_Al)`.
///
/// Uncertainties are scaled by the reduced chi-square, so a uniform
/// rescaling of the per-point sigmas leaves both estimates and errors
/// unchanged.
pub fn fit_participation(points: &[ParticipationPoint]) -> Result<ParticipationFit> {
    if points.len() < 3 {
        return invalid("participation fit needs at least three points");
    }
    for p in points {
        if !(p.f_al >= 0.0 && p.f_al <= 1.0) {
            return invalid(format!("participation ratio {} outside [0, 1]", p.f_al));
        }
        if !(p.sigma > 0.0 && p.f_delta0.is_finite()) {
            return invalid("each point needs a finite value and positive sigma");
        }
    }
    let (mut a11, mut a12, mut a22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for p in points {
        let w = 1.0 / (p.sigma * p.sigma);
        let (u, v) = (1.0 - p.f_al, p.f_al);
        a11 += w * u * u;
        a12 += w * u * v;
        a22 += w * v * v;
        b1 += w * u * p.f_delta0;
        b2 += w * v * p.f_delta0;
    }
    let det = a11 * a22 - a12 * a12;
    if det <= 1e-12 * a11 * a22 {
        return invalid("participation ratios are degenerate; need at least two distinct values");
    }
    let qz = (a22 * b1 - a12 * b2) / det;
    let al = (a11 * b2 - a12 * b1) / det;
    let chi2: f64 = points
        .iter()
        .map(|p| ((qz + p.f_al * (al - qz) - p.f_delta0) / p.sigma).powi(2))
        .sum();
    let s2 = chi2 / (points.len() - 2) as f64;
    Ok(ParticipationFit {
        delta_qz: Estimate::new(qz, (s2 * a22 / det).sqrt()),
        delta_al: Estimate::new(al, (s2 * a11 / det).sqrt()),
        chi2,
    })
}
