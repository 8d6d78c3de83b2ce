//! Physical constants (SI, exact 2019 definitions where applicable).

use std::f64::consts::PI;

pub const H: f64 = 6.626_070_15e-34;
pub const HBAR: f64 = H / (2.0 * PI);
pub const K_B: f64 = 1.380_649e-23;
pub const E_CHARGE: f64 = 1.602_176_634e-19;

/// One electron-volt in joules.
pub const EV: f64 = E_CHARGE;

/// Characteristic line impedance used throughout (ohm).
pub const Z0: f64 = 50.0;
