//! Unit helpers: decibels, dBm, angular frequency.

use std::f64::consts::PI;

pub fn db_to_lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn lin_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn dbm_to_watt(dbm: f64) -> f64 {
    1e-3 * db_to_lin(dbm)
}

pub fn watt_to_dbm(w: f64) -> f64 {
    lin_to_db(w / 1e-3)
}

pub fn hz_to_rad(f: f64) -> f64 {
    2.0 * PI * f
}

pub fn rad_to_hz(w: f64) -> f64 {
    w / (2.0 * PI)
}

/// Mean Bose occupation at energy `e` (J) and temperature `t` (K).
pub fn bose(e: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    1.0 / (e / (crate::consts::K_B * t)).exp_m1()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dbm_reference_points() {
        assert!((dbm_to_watt(0.0) - 1e-3).abs() < 1e-18);
        assert!((dbm_to_watt(-30.0) - 1e-6).abs() < 1e-21);
        assert!((watt_to_dbm(1.0) - 30.0).abs() < 1e-12);
    }

    #[test]
    fn bose_limits() {
        let e = crate::consts::H * 5e8;
        assert_eq!(bose(e, 0.0), 0.0);
        // high temperature: n ~ kT/E - 1/2
        let t = 100.0;
        let x = crate::consts::K_B * t / e;
        assert!((bose(e, t) - (x - 0.5)).abs() / x < 1e-6);
    }
}
