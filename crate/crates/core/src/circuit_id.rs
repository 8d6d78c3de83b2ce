//! Rational fits of one-port admittance data and their Butterworth-Van Dyke
//! (BVD) equivalent circuits.
//!
//! A fitted admittance is stored as pole/residue pairs
//! `Y(s) = sum_k [c_k/(s - p_k) + c_k*/(s - p_k*)] + e s` with `s = i omega`.
//! Each pair maps onto a series RLC branch plus a voltage-controlled current
//! source (VCCS) in parallel with a shared static capacitance `C0 = e`.

use crate::error::{invalid, Error, Result};
use crate::resonance::ResonanceParams;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// A conjugate pole pair, represented by its upper-half-plane member.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolePair {
    /// rad/s
    pub pole: Complex64,
    pub residue: Complex64,
}

impl PolePair {
    pub fn eval(&self, s: Complex64) -> Complex64 {
        self.residue / (s - self.pole) + self.residue.conj() / (s - self.pole.conj())
    }

    pub fn freq_hz(&self) -> f64 {
        self.pole.im / (2.0 * PI)
    }

    pub fn is_stable(&self) -> bool {
        self.pole.re < 0.0
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PoleResidueModel {
    pub pairs: Vec<PolePair>,
    /// Proportional term, farads.
    pub e: f64,
}

impl PoleResidueModel {
    pub fn eval_s(&self, s: Complex64) -> Complex64 {
        self.pairs.iter().map(|p| p.eval(s)).sum::<Complex64>() + self.e * s
    }
}

/// BVD branch with its VCCS shunt. JSON field names follow the circuit file
/// format.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BvdCircuit {
    pub r_ohm: f64,
    pub l_h: f64,
    pub c_f: f64,
    pub c0_f: f64,
    /// VCCS numerator, A rad^2/s^2 per volt.
    pub b: f64,
    /// VCCS control factor `b L C`.
    pub g: f64,
}

impl BvdCircuit {
    pub fn new(r_ohm: f64, l_h: f64, c_f: f64, c0_f: f64) -> Self {
        BvdCircuit { r_ohm, l_h, c_f, c0_f, b: 0.0, g: 0.0 }
    }

    /// Series RLC branch only.
    pub fn motional(&self, s: Complex64) -> Complex64 {
        1.0 / (self.r_ohm + s * self.l_h + 1.0 / (s * self.c_f))
    }

    pub fn vccs(&self, s: Complex64) -> Complex64 {
        self.b / (s * s + s * self.r_ohm / self.l_h + 1.0 / (self.l_h * self.c_f))
    }

    pub fn eval_s(&self, s: Complex64) -> Complex64 {
        let y = self.motional(s) + self.c0_f * s;
        if self.b != 0.0 {
            y + self.vccs(s)
        } else {
            y
        }
    }

    pub fn omega_r(&self) -> f64 {
        1.0 / (self.l_h * self.c_f).sqrt()
    }

    /// The pole/residue pair that reproduces this branch and its VCCS.
    pub fn pole_pair(&self) -> Result<PolePair> {
        let w0sq = 1.0 / (self.l_h * self.c_f);
        let half = self.r_ohm / (2.0 * self.l_h);
        if !(w0sq > half * half) {
            return invalid("branch is overdamped; poles are not a conjugate pair");
        }
        let pole = Complex64::new(-half, (w0sq - half * half).sqrt());
        let cr = 1.0 / (2.0 * self.l_h);
        let ci = -(self.b / 2.0 + cr * pole.re) / pole.im;
        Ok(PolePair { pole, residue: Complex64::new(cr, ci) })
    }
}

pub trait Admittance {
    fn eval_s(&self, s: Complex64) -> Complex64;
}

impl Admittance for PoleResidueModel {
    fn eval_s(&self, s: Complex64) -> Complex64 {
        PoleResidueModel::eval_s(self, s)
    }
}

impl Admittance for BvdCircuit {
    fn eval_s(&self, s: Complex64) -> Complex64 {
        BvdCircuit::eval_s(self, s)
    }
}

/// Admittance at angular frequency `omega` (rad/s).
pub fn eval_admittance<A: Admittance + ?Sized>(model: &A, omega: f64) -> Result<Complex64> {
    if !(omega > 0.0 && omega.is_finite()) {
        return invalid("angular frequency must be positive");
    }
    Ok(model.eval_s(I * omega))
}

#[derive(Clone, Copy, Debug)]
pub struct VectorFitOptions {
    pub n_pairs: usize,
    pub max_iter: usize,
    /// Relative pole movement below which relocation stops.
    pub tol: f64,
}

impl Default for VectorFitOptions {
    fn default() -> Self {
        VectorFitOptions { n_pairs: 1, max_iter: 50, tol: 1e-9 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VectorFit {
    pub model: PoleResidueModel,
    pub iterations: usize,
    pub converged: bool,
    /// Set when any final pole lies in the right half plane.
    pub unstable: bool,
    /// Largest `|Y_fit - Y| / |Y|` on the fit grid.
    pub max_rel_error: f64,
    pub rms_rel_error: f64,
}

struct Scaled {
    s: Vec<Complex64>,
    y: Vec<Complex64>,
    w: Vec<f64>,
}

fn basis(a: Complex64, s: Complex64) -> (Complex64, Complex64) {
    let u = 1.0 / (s - a);
    let v = 1.0 / (s - a.conj());
    (u + v, I * (u - v))
}

/// Column-normalised SVD least squares. Returns the solution and the
/// ratio of the smallest to largest singular value.
fn lstsq(mut a: DMatrix<f64>, b: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
    let n = a.ncols();
    let mut scale = vec![1.0; n];
    for j in 0..n {
        let norm = a.column(j).norm();
        if norm > 0.0 {
            scale[j] = 1.0 / norm;
            a.column_mut(j).scale_mut(scale[j]);
        }
    }
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let x = svd
        .solve(b, 1e-14 * smax)
        .map_err(|e| Error::NotConverged(format!("least-squares solve failed: {e}")))?;
    let x = DVector::from_iterator(n, x.iter().zip(&scale).map(|(v, s)| v * s));
    Ok((x, if smax > 0.0 { smin / smax } else { 0.0 }))
}

fn relocate(d: &Scaled, poles: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = poles.len();
    let ns = d.s.len();
    let cols = 4 * n + 2;
    let mut a = DMatrix::<f64>::zeros(2 * ns + 1, cols);
    let mut rhs = DVector::<f64>::zeros(2 * ns + 1);
    let mut sigma_row = vec![0.0; cols];
    for (k, (&s, (&y, &w))) in d.s.iter().zip(d.y.iter().zip(&d.w)).enumerate() {
        let mut row = vec![Complex64::new(0.0, 0.0); cols];
        for (j, &p) in poles.iter().enumerate() {
            let (f1, f2) = basis(p, s);
            row[2 * j] = f1 * w;
            row[2 * j + 1] = f2 * w;
            row[2 * n + 1 + 2 * j] = -f1 * y * w;
            row[2 * n + 2 + 2 * j] = -f2 * y * w;
            sigma_row[2 * n + 1 + 2 * j] += f1.re;
            sigma_row[2 * n + 2 + 2 * j] += f2.re;
        }
        row[2 * n] = s * w;
        row[4 * n + 1] = -y * w;
        for (c, v) in row.iter().enumerate() {
            a[(2 * k, c)] = v.re;
            a[(2 * k + 1, c)] = v.im;
        }
    }
    sigma_row[4 * n + 1] = ns as f64;
    let weight = d.y.iter().zip(&d.w).map(|(y, w)| (y * w).norm_sqr()).sum::<f64>().sqrt() / ns as f64;
    for (c, v) in sigma_row.iter().enumerate() {
        a[(2 * ns, c)] = weight * v;
    }
    rhs[2 * ns] = weight * ns as f64;
    let (x, _) = lstsq(a, &rhs)?;

    let mut dsig = x[4 * n + 1];
    if dsig.abs() < 1e-8 {
        dsig = 1e-8_f64.copysign(dsig);
    }
    let mut m = DMatrix::<f64>::zeros(2 * n, 2 * n);
    for (j, p) in poles.iter().enumerate() {
        let (r, c) = (2 * j, 2 * j);
        m[(r, c)] = p.re;
        m[(r, c + 1)] = p.im;
        m[(r + 1, c)] = -p.im;
        m[(r + 1, c + 1)] = p.re;
    }
    for i in 0..n {
        for j in 0..n {
            // b = [2, 0] per block, c = [sigma1, sigma2]
            m[(2 * i, 2 * j)] -= 2.0 * x[2 * n + 1 + 2 * j] / dsig;
            m[(2 * i, 2 * j + 1)] -= 2.0 * x[2 * n + 2 + 2 * j] / dsig;
        }
    }
    let eig = m.complex_eigenvalues();
    let mut upper: Vec<Complex64> = eig.iter().filter(|z| z.im > 0.0).copied().collect();
    let mut real: Vec<f64> = eig.iter().filter(|z| z.im == 0.0).map(|z| z.re).collect();
    real.sort_by(|a, b| a.total_cmp(b));
    for w in real.chunks(2) {
        if w.len() == 2 {
            upper.push(Complex64::new(0.5 * (w[0] + w[1]), 0.5 * (w[1] - w[0]).abs().max(1e-12)));
        }
    }
    for p in upper.iter_mut() {
        if p.re > 0.0 {
            p.re = -p.re;
        } else if p.re == 0.0 {
            p.re = -1e-12 * p.im;
        }
    }
    upper.sort_by(|a, b| a.im.total_cmp(&b.im));
    if upper.len() != n {
        return Err(Error::NotConverged("pole relocation lost a pole pair".into()));
    }
    Ok(upper)
}

fn residues(d: &Scaled, poles: &[Complex64]) -> Result<(Vec<Complex64>, f64)> {
    let n = poles.len();
    let ns = d.s.len();
    let mut a = DMatrix::<f64>::zeros(2 * ns, 2 * n + 1);
    let mut rhs = DVector::<f64>::zeros(2 * ns);
    for (k, (&s, (&y, &w))) in d.s.iter().zip(d.y.iter().zip(&d.w)).enumerate() {
        for (j, &p) in poles.iter().enumerate() {
            let (f1, f2) = basis(p, s);
            a[(2 * k, 2 * j)] = (f1 * w).re;
            a[(2 * k + 1, 2 * j)] = (f1 * w).im;
            a[(2 * k, 2 * j + 1)] = (f2 * w).re;
            a[(2 * k + 1, 2 * j + 1)] = (f2 * w).im;
        }
        a[(2 * k, 2 * n)] = (s * w).re;
        a[(2 * k + 1, 2 * n)] = (s * w).im;
        rhs[2 * k] = (y * w).re;
        rhs[2 * k + 1] = (y * w).im;
    }
    let (x, cond) = lstsq(a, &rhs)?;
    if cond < 1e-13 {
        return Err(Error::InvalidInput(format!(
            "residue system is rank deficient (condition {cond:.1e}); try fewer pole pairs"
        )));
    }
    let c = (0..n).map(|j| Complex64::new(x[2 * j], x[2 * j + 1])).collect();
    Ok((c, x[2 * n]))
}

/// Relaxed vector fit of admittance samples `y` at frequencies `freq_hz`.
pub fn vector_fit(freq_hz: &[f64], y: &[Complex64], opts: &VectorFitOptions) -> Result<VectorFit> {
    if freq_hz.len() != y.len() {
        return invalid("frequency and admittance lengths differ");
    }
    let n = opts.n_pairs;
    if freq_hz.len() < 2 * n + 1 {
        return invalid(format!("{} samples cannot determine {n} pole pairs", freq_hz.len()));
    }
    if freq_hz.iter().any(|f| !(*f > 0.0 && f.is_finite())) {
        return invalid("frequencies must be positive");
    }
    if y.iter().any(|v| !(v.norm() > 0.0 && v.re.is_finite() && v.im.is_finite())) {
        return invalid("admittance samples must be finite and nonzero");
    }
    let (fmin, fmax) = freq_hz.iter().fold((f64::MAX, 0.0f64), |(a, b), &f| (a.min(f), b.max(f)));
    let w0 = 2.0 * PI * (fmin * fmax).sqrt();
    let d = Scaled {
        s: freq_hz.iter().map(|f| I * (2.0 * PI * f / w0)).collect(),
        y: y.to_vec(),
        w: y.iter().map(|v| 1.0 / v.norm()).collect(),
    };

    let lo = 2.0 * PI * fmin / w0;
    let hi = 2.0 * PI * fmax / w0;
    let mut poles: Vec<Complex64> = (0..n)
        .map(|k| {
            let beta = if n == 1 { (lo * hi).sqrt() } else { lo * (hi / lo).powf(k as f64 / (n - 1) as f64) };
            Complex64::new(-beta / 100.0, beta)
        })
        .collect();

    let mut iterations = 0;
    let mut converged = n == 0;
    while !converged && iterations < opts.max_iter {
        let next = relocate(&d, &poles)?;
        iterations += 1;
        let moved = poles
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).norm() / b.norm())
            .fold(0.0, f64::max);
        poles = next;
        converged = moved < opts.tol;
    }

    let (c, e) = residues(&d, &poles)?;
    let model = PoleResidueModel {
        pairs: poles
            .iter()
            .zip(&c)
            .map(|(p, c)| PolePair { pole: p * w0, residue: c * w0 })
            .collect(),
        e: e / w0,
    };
    let rel: Vec<f64> = freq_hz
        .iter()
        .zip(y)
        .map(|(f, v)| (model.eval_s(I * 2.0 * PI * f) - v).norm() / v.norm())
        .collect();
    let max_rel_error = rel.iter().cloned().fold(0.0, f64::max);
    let rms_rel_error = (rel.iter().map(|r| r * r).sum::<f64>() / rel.len() as f64).sqrt();
    let unstable = model.pairs.iter().any(|p| !p.is_stable());
    Ok(VectorFit { model, iterations, converged, unstable, max_rel_error, rms_rel_error })
}

/// BVD element values for one pole pair and the shared proportional term.
pub fn to_equivalent_circuit(pair: &PolePair, e: f64) -> Result<BvdCircuit> {
    let (p, c) = (pair.pole, pair.residue);
    if !(c.re > 0.0) {
        return invalid(format!("residue real part {:.3e} is not positive; fit is not passive", c.re));
    }
    let l = 1.0 / (2.0 * c.re);
    let r = -p.re / c.re;
    let cap = 2.0 * c.re / p.norm_sqr();
    let b = -2.0 * (c.re * p.re + c.im * p.im);
    Ok(BvdCircuit { r_ohm: r, l_h: l, c_f: cap, c0_f: e, b, g: b * l * cap })
}

/// Resonance parameters of the motional branch seen from a `z0` port.
pub fn circuit_to_resonance(c: &BvdCircuit, z0: f64) -> Result<ResonanceParams> {
    if !(c.l_h > 0.0 && c.c_f > 0.0 && c.r_ohm >= 0.0 && z0 > 0.0) {
        return invalid("circuit is not passive");
    }
    let zc = (c.l_h / c.c_f).sqrt();
    ResonanceParams::new(c.omega_r() / (2.0 * PI), zc / c.r_ohm, zc / z0, 0.0)
}

/// `|Y_VCCS| / |Y_BVD|` of one pair at `omega`.
pub fn vccs_ratio(pair: &PolePair, omega: f64) -> Result<f64> {
    if !(omega > 0.0) {
        return invalid("angular frequency must be positive");
    }
    let (p, c) = (pair.pole, pair.residue);
    let num = c * p.conj() + c.conj() * p;
    Ok(num.re.abs() / (2.0 * c.re * omega).abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_branch_at_resonance_is_resistive() {
        let c = BvdCircuit::new(31.83, 1.0132e-4, 1e-15, 0.0);
        let y = c.motional(I * c.omega_r());
        assert!((y.re - 1.0 / 31.83).abs() < 1e-12 && y.im.abs() < 1e-12);
    }

    #[test]
    fn synthesis_inverts_mapping() {
        let c = BvdCircuit { b: 3e9, g: 0.0, ..BvdCircuit::new(31.83, 1.0132e-4, 1e-15, 1e-13) };
        let back = to_equivalent_circuit(&c.pole_pair().unwrap(), c.c0_f).unwrap();
        assert!((back.l_h / c.l_h - 1.0).abs() < 1e-12);
        assert!((back.r_ohm / c.r_ohm - 1.0).abs() < 1e-9);
        assert!((back.c_f / c.c_f - 1.0).abs() < 1e-12);
        assert!((back.b / c.b - 1.0).abs() < 1e-6);
    }
}
