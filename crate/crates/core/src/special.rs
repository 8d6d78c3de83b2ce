//! Complex digamma and a few small helpers built on it.

use num_complex::Complex64;
use std::f64::consts::PI;

// B_{2k} / (2k) for k = 1..8
const BERN: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
    -3617.0 / 8160.0,
];

/// Digamma function for complex argument.
///
/// Shifts the argument up to `Re z >= 8` with the recurrence, then sums the
/// asymptotic series. Arguments with `Re z < 1/2` go through the reflection
/// formula. Returns NaN at the poles (non-positive integers).
pub fn digamma(z: Complex64) -> Complex64 {
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Complex64::new(f64::NAN, f64::NAN);
    }
    if z.re < 0.5 {
        if z.im == 0.0 && z.re == z.re.floor() {
            return Complex64::new(f64::NAN, f64::NAN);
        }
        return digamma(Complex64::new(1.0, 0.0) - z) - PI * cot_pi(z);
    }
    let mut acc = Complex64::new(0.0, 0.0);
    let mut w = z;
    while w.re < 8.0 {
        acc -= w.inv();
        w += 1.0;
    }
    let w2 = (w * w).inv();
    let mut series = Complex64::new(0.0, 0.0);
    let mut p = w2;
    for b in BERN {
        series += p * b;
        p *= w2;
    }
    acc + w.ln() - 0.5 * w.inv() - series
}

/// Real digamma, a thin wrapper over the complex routine.
pub fn digamma_real(x: f64) -> f64 {
    digamma(Complex64::new(x, 0.0)).re
}

/// cot(pi z), stable for large |Im z|.
fn cot_pi(z: Complex64) -> Complex64 {
    let i = Complex64::i();
    let w = PI * z;
    if w.im >= 0.0 {
        let e = (2.0 * i * w).exp();
        i * (e + 1.0) / (e - 1.0)
    } else {
        let e = (-2.0 * i * w).exp();
        i * (1.0 + e) / (1.0 - e)
    }
}

/// The bracket `Re Psi(1/2 + x/(2 pi i)) - ln(x/(2 pi))` with `x = h f / (k T)`.
///
/// This is the temperature dependence of the resonant TLS frequency shift.
pub fn freq_shift_kernel(x: f64) -> f64 {
    let z = Complex64::new(0.5, -x / (2.0 * PI));
    digamma(z).re - (x / (2.0 * PI)).ln()
}

/// Gamma function at half-integer or integer argument `d/2`, `d` in 1..=6.
pub fn gamma_half(d: u32) -> f64 {
    match d {
        1 => PI.sqrt(),
        2 => 1.0,
        3 => 0.5 * PI.sqrt(),
        4 => 1.0,
        5 => 0.75 * PI.sqrt(),
        6 => 2.0,
        _ => f64::NAN,
    }
}
