use phonoq::calib::*;
use phonoq::consts::{H, K_B};
use phonoq::resonance::{phonon_number, ResonanceParams};
use phonoq::synth::{linspace, noise_sweep};
use phonoq::units::{db_to_lin, dbm_to_watt, lin_to_db};
use proptest::prelude::*;

fn temps() -> Vec<f64> {
    (0..23).map(|k| 0.5 + 0.25 * k as f64).collect()
}

fn n_sys_1p1k(f: f64) -> f64 {
    K_B * 1.1 / (H * f)
}

#[test]
fn classical_noise_power_value() {
    let p = johnson_noise_power(1.0, 1e6, 5e8, NoiseForm::Classical);
    assert!((p - 1.380649e-17).abs() < 1e-22);
    assert!((p / 1.381e-17 - 1.0).abs() < 1e-3);
}

#[test]
fn full_form_zero_point() {
    let p = johnson_noise_power(0.0, 1e6, 5e8, NoiseForm::Full);
    assert_eq!(p, 1e6 * H * 5e8 / 2.0);
}

#[test]
fn added_noise_of_a_1p1_kelvin_amplifier() {
    assert!((n_sys_1p1k(5e8) - 45.8).abs() < 0.05);
}

#[test]
fn y_factor_recovers_gain() {
    let f = linspace(4e8, 6e8, 21);
    let sweep = noise_sweep(57.4, n_sys_1p1k(5e8), &temps(), &f, 1e6, 1e-3, 1);
    let res = gain_from_noise_sweep(&sweep, NoiseForm::Full).unwrap();
    for (k, g) in res.gain_db.iter().enumerate() {
        assert!((g - 57.4).abs() < 0.05, "{g}");
        assert!((g - 57.4).abs() < 4.0 * res.gain_db_sigma[k]);
        assert!((res.n_sys[k] / n_sys_1p1k(5e8) - 1.0).abs() < 0.05, "{}", res.n_sys[k]);
    }
}

#[test]
fn two_exact_points_give_exact_slope() {
    let f = [5e8];
    let sweep = noise_sweep(40.0, 10.0, &[0.5, 4.0], &f, 1e5, 0.0, 0);
    let res = gain_from_noise_sweep(&sweep, NoiseForm::Full).unwrap();
    assert!((res.gain[0] / 1e4 - 1.0).abs() < 1e-12);
    assert!((res.n_sys[0] - 10.0).abs() < 1e-9);
}

#[test]
fn offsets_change_noise_not_gain() {
    let f = linspace(4e8, 6e8, 5);
    let sweep = noise_sweep(57.4, 45.8, &temps(), &f, 1e6, 0.0, 0);
    let base = gain_from_noise_sweep(&sweep, NoiseForm::Full).unwrap();
    let mut shifted = sweep.clone();
    let offset = 0.3 * sweep.p_out_w[0][0];
    for row in shifted.p_out_w.iter_mut() {
        for p in row.iter_mut() {
            *p += offset;
        }
    }
    let moved = gain_from_noise_sweep(&shifted, NoiseForm::Full).unwrap();
    for k in 0..f.len() {
        assert!((moved.gain[k] / base.gain[k] - 1.0).abs() < 1e-9);
        assert!(moved.n_sys[k] > base.n_sys[k] + 1.0);
    }
}

#[test]
fn negative_slope_is_rejected() {
    let mut sweep = noise_sweep(30.0, 5.0, &temps(), &[5e8], 1e6, 0.0, 0);
    sweep.p_out_w.reverse();
    assert!(gain_from_noise_sweep(&sweep, NoiseForm::Full).is_err());
}

#[test]
fn narrow_temperature_span_is_rejected() {
    let sweep = noise_sweep(30.0, 5.0, &[1.0, 1.5, 2.0], &[5e8], 1e6, 0.0, 0);
    let err = gain_from_noise_sweep(&sweep, NoiseForm::Full).unwrap_err().to_string();
    assert!(err.contains("factor"), "{err}");
}

#[test]
fn records_roundtrip() {
    let sweep = noise_sweep(57.4, 45.8, &temps()[..4], &[4e8, 5e8], 1e6, 1e-3, 2);
    let back = NoiseSweep::from_records(&sweep.records(), 1e6).unwrap();
    assert_eq!(back, sweep);
    let mut recs = sweep.records();
    recs.pop();
    assert!(NoiseSweep::from_records(&recs, 1e6).is_err());
}

#[test]
fn attenuation_examples() {
    let a = attenuation_from_transmission(&[5e8], &[0.0], &[4e8, 6e8], &[57.4, 57.4]).unwrap();
    assert!((a[0] - 57.4).abs() < 1e-12);
    // two amplifiers of 23 and 37 dB behind 2.6 dB of insertion loss
    let gain = 23.0 + 37.0 - 2.6;
    let f = linspace(4e8, 6e8, 11);
    let res = gain_from_noise_sweep(&noise_sweep(gain, 45.8, &temps(), &f, 1e6, 0.0, 0), NoiseForm::Full).unwrap();
    let s21: Vec<f64> = f.iter().map(|_| gain - 70.0).collect();
    let res = res.with_transmission(&f, &s21).unwrap();
    for (k, a) in res.atten_db.unwrap().iter().enumerate() {
        assert!((a - 70.0).abs() < 1e-9);
        assert!((60.0 - res.gain_db[k] - 2.6).abs() < 1e-9);
    }
    assert!(attenuation_from_transmission(&[7e8], &[0.0], &[4e8, 6e8], &[57.4, 57.4]).is_err());
}

#[test]
fn attenuation_feeds_phonon_number() {
    let p = ResonanceParams::new(502.1e6, 2.9e7, 1.19e7, 0.0).unwrap();
    let (vna_dbm, atten) = (-20.0, 72.3);
    let via_chain = phonon_number(&p, power_at_device(vna_dbm, atten), 0.0);
    let direct = phonon_number(&p, dbm_to_watt(vna_dbm - atten), 0.0);
    assert!((via_chain / direct - 1.0).abs() < 1e-12);
    let w = p.omega_r();
    let want = 4.0 * dbm_to_watt(-92.3) * p.kappa_e() / (p.kappa().powi(2) * H / (2.0 * std::f64::consts::PI) * w);
    assert!((direct / want - 1.0).abs() < 1e-9, "{direct} vs {want}");
}

proptest! {
    #[test]
    fn db_roundtrip(db in -200.0f64..200.0) {
        prop_assert!((lin_to_db(db_to_lin(db)) - db).abs() <= 1e-12 * db.abs().max(1.0));
    }

    #[test]
    fn classical_limit(t in 0.25f64..10.0, f in 1e8f64..1e9) {
        prop_assume!(K_B * t > 10.0 * H * f);
        let full = johnson_noise_power(t, 1.0, f, NoiseForm::Full);
        let cl = johnson_noise_power(t, 1.0, f, NoiseForm::Classical);
        let x = H * f / (K_B * t);
        prop_assert!((full / cl - 1.0).abs() < 1e-3);
        prop_assert!((full / cl - 1.0).abs() <= x * x / 12.0 * (1.0 + 1e-6));
    }
}
