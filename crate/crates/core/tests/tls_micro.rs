use approx::assert_relative_eq;
use num_complex::Complex64;
use phonoq::consts::{HBAR, K_B};
use phonoq::quad::{integrate, x_pow_csch, x_pow_csch2_half};
use phonoq::tls_micro::*;
use proptest::prelude::*;
use std::f64::consts::PI;

const W_R: f64 = 2.0 * PI * 5e8;

fn host_for_grid(n: usize, e_max: f64, m_bar: f64) -> MaterialParams {
    let mut h = MaterialParams::quartz(1.0);
    h.m_bar = m_bar;
    h.dos_p = n as f64 / (e_max * h.host_volume);
    h.omega_max = e_max / HBAR;
    h
}

fn sym(e: f64, m: f64, g1: f64, g2: f64) -> Tls {
    Tls::new(0.0, e, m, g1, g2).unwrap()
}

#[test]
fn chi_nd_single_tls_two_term_form() {
    let m = 1e-19;
    let g2 = 1e3;
    let t = sym(2.0 * HBAR * W_R, m, 1e3, g2);
    let temp = 0.01;
    let chi = susceptibility_discrete(&[t], W_R, temp).unwrap();
    let th = (HBAR * W_R / (K_B * temp)).tanh();
    // 2/E - 1/(E - hw) - 1/(E + hw) at E = 2 hw is -1/(3 hw)
    let re = m * m * th / (3.0 * HBAR * W_R);
    let im = m * m * th * g2 / (HBAR * W_R * W_R) * (1.0 - 1.0 / 9.0);
    assert_relative_eq!(chi.chi_nd.re, re, max_relative = 1e-9);
    assert_relative_eq!(chi.chi_nd.im, im, max_relative = 1e-6);
}

#[test]
fn chi_nd_vanishes_at_high_temperature() {
    let t = sym(HBAR * W_R * 1.3, 1e-19, 1e4, 1e4);
    let cold = susceptibility_discrete(&[t], W_R, 0.01).unwrap().chi_nd.norm();
    let hot = susceptibility_discrete(&[t], W_R, 1e6).unwrap().chi_nd.norm();
    assert!(hot < 1e-6 * cold);
}

#[test]
fn chi_d_high_frequency_tail_over_three_decades() {
    let t = Tls::new(2e-25, 1e-25, 1.6e-19, 50.0, 1e4).unwrap();
    let ws = [1e4, 1e5, 1e6, 1e7];
    let ims: Vec<f64> = ws.iter().map(|&w| susceptibility_discrete(&[t], w, 0.05).unwrap().chi_d.im).collect();
    let slope = (ims[3] / ims[0]).ln() / (ws[3] / ws[0]).ln();
    assert!((slope + 1.0).abs() < 1e-4, "slope {slope}");
}

#[test]
fn curvature_term_cancels_static_piece() {
    let t = Tls::new(1e-25, 3e-25, 1.6e-19, 1e4, 1e4).unwrap();
    let c = susceptibility_discrete(&[t], W_R, 0.03).unwrap();
    let e = t.energy();
    let hw = HBAR * W_R;
    let th = (e / (2.0 * K_B * 0.03)).tanh();
    let want = t.m_x().powi(2) * th * (Complex64::new(e - hw, -HBAR * 1e4).inv() + Complex64::new(e + hw, HBAR * 1e4).inv());
    assert_relative_eq!(c.resonant().re, want.re, max_relative = 1e-9);
    assert_relative_eq!(c.resonant().im, want.im, max_relative = 1e-9);
}

#[test]
fn continuum_loss_is_resonant_q() {
    let h = MaterialParams::quartz(1e45);
    for t in [0.01, 0.05, 0.3, 2.0] {
        let chi = susceptibility_continuum(&h, W_R, t);
        let (_, kappa) = linear_response(chi, &h, W_R);
        assert_relative_eq!(kappa / W_R, q_resonant_inv(&h, W_R, t), max_relative = 1e-10);
        assert_relative_eq!(q_saturated_inv(&h, 0.0, W_R, t, 1e-3, 1e-3), q_resonant_inv(&h, W_R, t));
    }
}

#[test]
fn continuum_shift_vanishes_at_zero_temperature_reference() {
    let h = MaterialParams::quartz(1e45);
    let shift = |t: f64| linear_response(susceptibility_continuum(&h, W_R, t), &h, W_R).0;
    let d = shift(1e-4) - shift(5e-5);
    assert!(d.abs() < 1e-4 * (shift(0.2) - shift(1e-4)).abs());
}

#[test]
fn discrete_sum_approaches_continuum_with_density() {
    let temp = 0.05;
    let e_max = 40.0 * HBAR * (2.0 * PI * K_B * temp / HBAR).max(W_R);
    let err = |n: usize| {
        let spacing = e_max / n as f64 / HBAR;
        let ens = uniform_grid(n, e_max, 1e-19, 30.0 * spacing, 30.0 * spacing);
        let h = host_for_grid(n, e_max, 1e-19);
        let d = susceptibility_discrete(&ens, W_R, temp).unwrap().resonant();
        let c = susceptibility_continuum(&h, W_R, temp);
        ((d.im - c.im) / c.im).abs()
    };
    let (a, b) = (err(100_000), err(400_000));
    assert!(b < 0.5 * a, "{a} -> {b}");
}

#[test]
fn saturation_of_resonant_subensemble() {
    let g1: f64 = 2e3;
    let g2 = 5e3;
    let temp = 0.02;
    for s in [0.0f64, 1.0, 10.0] {
        let rabi = (s * g1 * g2).sqrt();
        let width = 1e4 * g2 * (1.0 + s).sqrt();
        let n = 400_000;
        let ens: Vec<Tls> = (0..n)
            .map(|k| {
                let d = -width + (k as f64 + 0.5) * 2.0 * width / n as f64;
                sym(HBAR * (W_R + d), 1e-19, g1, g2)
            })
            .collect();
        let driven = resonant_absorption_driven(&ens, W_R, temp, rabi);
        let bare = resonant_absorption_driven(&ens, W_R, temp, 0.0);
        assert_relative_eq!(driven / bare, 1.0 / (1.0 + s).sqrt(), max_relative = 1e-3);
    }
}

#[test]
fn saturated_population_limits() {
    let t = sym(HBAR * W_R, 1e-19, 1e3, 2e3);
    let temp = 0.03;
    let pth = 1.0 / ((t.energy() / (K_B * temp)).exp() + 1.0);
    assert_relative_eq!(saturated_population(&t, 0.0, 123.0, temp), pth, max_relative = 1e-14);
    let half = saturated_population(&t, (t.gamma1 * t.gamma2).sqrt(), 0.0, temp);
    assert_relative_eq!(half, 0.5 - (0.5 - pth) / 2.0, max_relative = 1e-14);
    assert!((saturated_population(&t, 1e12, 0.0, temp) - 0.5).abs() < 1e-12);
}

#[test]
fn saturated_loss_at_critical_number() {
    let h = MaterialParams::quartz(1e45);
    let (t1, t2) = (1e-3, 2e-3);
    let nc = critical_number(&h, W_R, t1, t2);
    let r = q_saturated_inv(&h, nc, W_R, 0.05, t1, t2) / q_resonant_inv(&h, W_R, 0.05);
    assert_relative_eq!(r, 0.5f64.sqrt(), max_relative = 1e-14);
}

#[test]
fn phonon_gamma1_golden_and_scaling() {
    let h = MaterialParams::quartz(1e45);
    assert_relative_eq!(gamma1_phonon(W_R, 1e-6, &h), 326.9067230319661, max_relative = 1e-6);
    for d in 1..=3 {
        let mut hd = h;
        hd.dim = d;
        hd.cross_section = [1e-8, 1e-4, 1.0][d as usize - 1];
        let r = gamma1_phonon(2.0 * W_R, 1e-6, &hd) / gamma1_phonon(W_R, 1e-6, &hd);
        assert_relative_eq!(r, 2f64.powi(d as i32), max_relative = 1e-12);
    }
    let warm = gamma1_phonon(W_R, 0.05, &h) / gamma1_phonon(W_R, 1e-6, &h);
    assert_relative_eq!(warm, 1.0 / (HBAR * W_R / (2.0 * K_B * 0.05)).tanh(), max_relative = 1e-12);
}

#[test]
fn quadrature_identities() {
    let a = integrate(|x| x_pow_csch(x, 3.0), 0.0, 700.0, 0.0, 1e-13).unwrap();
    assert_relative_eq!(a, PI.powi(4) / 8.0, max_relative = 1e-8);
    let b = integrate(|x| x_pow_csch2_half(x, 6.0), 0.0, 700.0, 0.0, 1e-13).unwrap();
    assert_relative_eq!(b, 64.0 * PI.powi(6) / 21.0, max_relative = 1e-8);
}

#[test]
fn relaxation_loss_matches_closed_form() {
    let h = MaterialParams::quartz(1e45);
    for t in [0.01, 0.03, 0.1, 0.3, 1.0] {
        let q = q_relaxation_inv(&h, W_R, t).unwrap();
        assert_relative_eq!(q, q_relaxation_inv_closed_d3(&h, W_R, t), max_relative = 1e-8);
        let s = relaxation_freq_shift(&h, W_R, t).unwrap();
        assert_relative_eq!(s, relaxation_freq_shift_closed_d3(&h, W_R, t), max_relative = 1e-8);
    }
}

#[test]
fn relaxation_loss_power_law_in_temperature() {
    for d in 1..=3u32 {
        let mut h = MaterialParams::quartz(1e45);
        h.dim = d;
        h.cross_section = [1e-8, 1e-4, 1.0][d as usize - 1];
        let (t1, t2) = (0.02, 0.08);
        let slope = (q_relaxation_inv(&h, W_R, t2).unwrap() / q_relaxation_inv(&h, W_R, t1).unwrap()).ln()
            / (t2 / t1).ln();
        assert!((slope - d as f64).abs() < 1e-6, "d={d} slope {slope}");
    }
}

#[test]
fn relaxation_shift_orders_of_magnitude() {
    let h = MaterialParams::quartz(1e45);
    let r100 = relaxation_freq_shift(&h, W_R, 0.1).unwrap().abs() / h.f_delta0();
    let r10 = relaxation_freq_shift(&h, W_R, 0.01).unwrap().abs() / h.f_delta0();
    assert!(r100 > 1e-9 && r100 < 1e-7, "{r100}");
    assert!(r10 > 1e-15 && r10 < 1e-13, "{r10}");
}

#[test]
fn relaxation_regime_error_names_crossover() {
    let h = MaterialParams::quartz(1e45);
    let tc = regime_crossover(&h, W_R);
    assert!(tc > 0.3 && tc < 5.0);
    let e = q_relaxation_inv(&h, W_R, 2.0 * tc).unwrap_err();
    assert!(matches!(e, phonoq::Error::Regime(_)));
    assert!(e.to_string().contains(&format!("{tc:.4}")));
}

#[test]
fn kinetic_thermalisation() {
    let e = K_B * 0.05;
    let t = sym(e, 1e-19, 1e4, 5e3);
    let s = evolve_kinetic(KineticState::ground(), &t, 0.05, 20.0 / t.gamma1).unwrap();
    assert!((s.rho22 - 1.0 / (1.0 + 1f64.exp())).abs() < 1e-8);
    assert!((s.rho11 + s.rho22 - 1.0).abs() < 1e-12);
    assert_relative_eq!(stationary_rho22(&t, 0.05), 1.0 / (1.0 + 1f64.exp()), max_relative = 1e-14);
    assert_eq!(stationary_rho22(&t, 1e-5), 0.0);
    assert!((stationary_rho22(&t, 1e6) - 0.5).abs() < 1e-6);
}

#[test]
fn kinetic_coherence_decays_at_gamma2() {
    let t = sym(K_B * 0.05, 1e-19, 1e4, 7e3);
    let s0 = KineticState::new(0.5, 0.5, Complex64::new(0.3, 0.2)).unwrap();
    let s = evolve_kinetic(s0, &t, 0.05, 1e-4).unwrap();
    assert_relative_eq!(s.rho12.norm(), s0.rho12.norm() * (-0.7f64).exp(), max_relative = 1e-8);
}

#[test]
fn kinetic_rejects_unphysical_state() {
    assert!(KineticState::new(0.5, 0.5, Complex64::new(0.6, 0.0)).is_err());
    assert!(KineticState::new(0.7, 0.5, Complex64::new(0.0, 0.0)).is_err());
}

#[test]
fn variance_ratio_grows_with_gamma2() {
    let base = VarianceMcConfig { omega_max: 100.0, trials: 4000, bootstrap: 20, ..Default::default() };
    let a = variance_mc(&VarianceMcConfig { gamma2: 1e-2, ..base }).unwrap();
    let b = variance_mc(&VarianceMcConfig { gamma2: 1e-1, ..base }).unwrap();
    assert!(b.ratio > a.ratio, "{} vs {}", a.ratio, b.ratio);
    assert!(b.predicted_first_order > a.predicted_first_order);
}

#[test]
fn variance_mc_is_reproducible() {
    let cfg = VarianceMcConfig { trials: 200, n_tls: 100, bootstrap: 10, seed: 9, ..Default::default() };
    assert_eq!(variance_mc(&cfg).unwrap(), variance_mc(&cfg).unwrap());
}

#[test]
fn ensemble_sampling_measures() {
    let std = sample_ensemble(
        2000,
        EnsembleMeasure::StandardTunneling { delta_max: 1e-23, delta0_min: 1e-27, delta0_max: 1e-23 },
        1.6e-19,
        1e3,
        1e3,
        4,
    );
    assert!(std.iter().all(|t| t.delta.abs() <= 1e-23 && t.delta0 >= 1e-27 && t.delta0 <= 1e-23));
    assert!(std.iter().any(|t| t.delta < 0.0) && std.iter().any(|t| t.delta > 0.0));
    let uni = sample_ensemble(500, EnsembleMeasure::UniformEnergy { e_min: 1e-25, e_max: 2e-25 }, 1.6e-19, 1e3, 1e3, 4);
    assert!(uni.iter().all(|t| t.delta == 0.0 && (1e-25..=2e-25).contains(&t.energy())));
}

proptest! {
    #[test]
    fn coupling_identity(delta in -1e-23f64..1e-23, delta0 in 1e-27f64..1e-23, xi in 1e-20f64..1e-15) {
        let t = Tls::new(delta, delta0, 1.6e-19, 1.0, 1.0).unwrap();
        let g = t.gamma_z * xi / HBAR;
        prop_assert!(((t.g_x(xi).powi(2) + t.g_z(xi).powi(2)) - g * g).abs() <= 1e-13 * g * g);
        prop_assert!((t.energy().powi(2) - (delta * delta + delta0 * delta0)).abs() <= 1e-14 * t.energy().powi(2));
    }

    #[test]
    fn kinetic_preserves_trace(e_over_kt in 0.01f64..20.0, dur in 0.0f64..10.0, p in 0.0f64..1.0) {
        let t = sym(K_B * 0.05 * e_over_kt, 1e-19, 1e3, 800.0);
        let c = (p * (1.0 - p)).sqrt() * 0.9;
        let s = evolve_kinetic(KineticState::new(1.0 - p, p, Complex64::new(c, 0.0)).unwrap(), &t, 0.05, dur / t.gamma1).unwrap();
        prop_assert!((s.rho11 + s.rho22 - 1.0).abs() < 1e-12);
        prop_assert!(s.validate().is_ok());
    }
}
