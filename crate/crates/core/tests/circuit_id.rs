use num_complex::Complex64;
use phonoq::circuit_id::*;
use phonoq::resonance::eval_s11;
use phonoq::synth::{admittance_grid, admittance_spectrum, linspace, seventeen_branches};
use proptest::prelude::*;
use std::f64::consts::PI;

fn golden() -> BvdCircuit {
    BvdCircuit::new(31.83, 1.0132e-4, 1e-15, 1e-13)
}

fn s(f: f64) -> Complex64 {
    Complex64::new(0.0, 2.0 * PI * f)
}

#[test]
fn golden_circuit_arithmetic() {
    let c = golden();
    let w = c.omega_r();
    assert!((w / (2.0 * PI * 500e6) - 1.0).abs() < 2e-4);
    let q = w * c.l_h / c.r_ohm;
    assert!((q / 1e4 - 1.0).abs() < 2e-4);
    let p = circuit_to_resonance(&c, 50.0).unwrap();
    assert!((p.f_r - w / (2.0 * PI)).abs() < 1e-6);
    assert!((p.q_i - (c.l_h / c.c_f).sqrt() / c.r_ohm).abs() < 1e-9);
    assert!((p.q_e_mag - 6366.0).abs() < 1.0);
    assert_eq!(p.phi, 0.0);
}

#[test]
fn golden_grid_values() {
    // direct series-branch arithmetic at three frequencies
    let c = golden();
    for f in [480e6, 500e6, 520e6] {
        let w = 2.0 * PI * f;
        let x = w * c.l_h - 1.0 / (w * c.c_f);
        let den = c.r_ohm * c.r_ohm + x * x;
        let want = Complex64::new(c.r_ohm / den, -x / den + w * c.c0_f);
        let got = eval_admittance(&c, w).unwrap();
        assert!((got - want).norm() < 1e-9 * want.norm());
    }
    assert!(eval_admittance(&c, 0.0).is_err());
    assert!(eval_admittance(&c, 1e-3).unwrap().norm() < 1e-15);
}

#[test]
fn decay_rate_identity() {
    let kappa = 2.0 * PI * 5e4;
    let l = 2e-4;
    let pair = PolePair { pole: Complex64::new(-kappa / 2.0, 2.0 * PI * 5e8), residue: Complex64::new(1.0 / (2.0 * l), 0.0) };
    let c = to_equivalent_circuit(&pair, 0.0).unwrap();
    assert!((c.l_h - l).abs() < 1e-18);
    assert!((c.r_ohm / c.l_h - kappa).abs() < 1e-6 * kappa);
}

#[test]
fn vccs_sign_follows_residue_phase() {
    let pair = PolePair { pole: Complex64::new(-1e5, 3e9), residue: Complex64::new(2e3, 40.0) };
    let flipped = PolePair { residue: Complex64::new(2e3, -40.0), ..pair };
    let a = to_equivalent_circuit(&pair, 0.0).unwrap();
    let b = to_equivalent_circuit(&flipped, 0.0).unwrap();
    // the damping part of b is even in the residue phase, the rest odd
    let damping = -2.0 * 2e3 * -1e5;
    assert!(((a.b - damping) + (b.b - damping)).abs() < 1e-6 * a.b.abs());
    assert!(to_equivalent_circuit(&PolePair { residue: Complex64::new(-1.0, 0.0), ..pair }, 0.0).is_err());
}

#[test]
fn synthesized_pair_has_zero_vccs() {
    let c = golden();
    let pair = c.pole_pair().unwrap();
    let back = to_equivalent_circuit(&pair, c.c0_f).unwrap();
    let scale = c.motional(s(500e6)).norm();
    let w = c.omega_r();
    assert!(back.vccs(s(500e6)).norm() < 1e-9 * scale, "{}", back.b);
    assert!(vccs_ratio(&pair, w).unwrap() < 1e-9);
    for (name, got, want) in [("L", back.l_h, c.l_h), ("R", back.r_ohm, c.r_ohm), ("C", back.c_f, c.c_f)] {
        assert!((got / want - 1.0).abs() < 1e-9, "{name}");
    }
}

#[test]
fn vccs_ratio_scales_inversely_with_frequency() {
    let pair = PolePair { pole: Complex64::new(-1e5, 3e9), residue: Complex64::new(2e3, 40.0) };
    let a = vccs_ratio(&pair, 1e9).unwrap();
    let b = vccs_ratio(&pair, 3e9).unwrap();
    assert!((a / b - 3.0).abs() < 1e-12);
}

#[test]
fn infinite_internal_q_when_lossless() {
    let c = BvdCircuit::new(0.0, 1.0132e-4, 1e-15, 0.0);
    let p = circuit_to_resonance(&c, 50.0).unwrap();
    assert!(p.q_i.is_infinite());
    assert_eq!(p.kappa_i(), 0.0);
}

#[test]
fn reflection_matches_circuit_near_resonance() {
    let c = golden();
    let p = circuit_to_resonance(&c, 50.0).unwrap();
    let kappa_hz = p.linewidth_hz();
    for f in linspace(p.f_r - 3.0 * kappa_hz, p.f_r + 3.0 * kappa_hz, 61) {
        let y = c.motional(s(f));
        let want = (1.0 - 50.0 * y) / (1.0 + 50.0 * y);
        let got = eval_s11(&p, f);
        assert!((got - want).norm() < 0.01 * want.norm().max(0.01), "f = {f}: {got} vs {want}");
    }
}

fn single_grid(c: &BvdCircuit) -> Vec<f64> {
    admittance_grid(std::slice::from_ref(c), 81, 5.0, 400e6, 600e6, 60)
}

#[test]
fn single_resonance_noiseless_roundtrip() {
    let c = golden();
    let f = single_grid(&c);
    let y: Vec<Complex64> = f.iter().map(|&f| c.eval_s(s(f))).collect();
    let fit = vector_fit(&f, &y, &VectorFitOptions { n_pairs: 1, ..Default::default() }).unwrap();
    assert!(fit.max_rel_error < 1e-6, "{}", fit.max_rel_error);
    assert!(!fit.unstable);
    let got = to_equivalent_circuit(&fit.model.pairs[0], fit.model.e).unwrap();
    for (name, a, b) in [("R", got.r_ohm, c.r_ohm), ("L", got.l_h, c.l_h), ("C", got.c_f, c.c_f), ("C0", got.c0_f, c.c0_f)] {
        assert!((a / b - 1.0).abs() < 1e-6, "{name}: {a} vs {b}");
    }
}

#[test]
fn single_resonance_noisy_roundtrip() {
    let c = golden();
    let f = single_grid(&c);
    let y = admittance_spectrum(&[c], c.c0_f, &f, 1e-3, 5);
    let fit = vector_fit(&f, &y, &VectorFitOptions { n_pairs: 1, ..Default::default() }).unwrap();
    let got = to_equivalent_circuit(&fit.model.pairs[0], fit.model.e).unwrap();
    for (name, a, b) in [("R", got.r_ohm, c.r_ohm), ("L", got.l_h, c.l_h), ("C", got.c_f, c.c_f), ("C0", got.c0_f, c.c0_f)] {
        assert!((a / b - 1.0).abs() < 1e-3, "{name}: {a} vs {b}");
    }
    assert!(vccs_ratio(&fit.model.pairs[0], c.omega_r()).unwrap() < 1e-2);
}

#[test]
fn capacitor_only() {
    let f = linspace(100e6, 900e6, 50);
    let y: Vec<Complex64> = f.iter().map(|&f| s(f) * 2.5e-13).collect();
    let fit = vector_fit(&f, &y, &VectorFitOptions { n_pairs: 0, ..Default::default() }).unwrap();
    assert!((fit.model.e / 2.5e-13 - 1.0).abs() < 1e-12);
    assert!(fit.model.pairs.is_empty());
}

#[test]
fn too_many_pairs_is_rejected() {
    let f = linspace(100e6, 900e6, 50);
    let y: Vec<Complex64> = f.iter().map(|&f| s(f) * 2.5e-13).collect();
    let err = vector_fit(&f, &y, &VectorFitOptions { n_pairs: 3, ..Default::default() }).unwrap_err();
    assert!(err.to_string().contains("fewer"), "{err}");
    assert!(vector_fit(&f[..4], &y[..4], &VectorFitOptions { n_pairs: 2, ..Default::default() }).is_err());
}

#[test]
fn seventeen_resonances() {
    let (branches, c0) = seventeen_branches();
    let f = admittance_grid(&branches, 81, 5.0, 200e6, 800e6, 200);
    let y = admittance_spectrum(&branches, c0, &f, 1e-3, 11);
    let fit = vector_fit(&f, &y, &VectorFitOptions { n_pairs: 17, max_iter: 100, tol: 1e-9 }).unwrap();
    assert!(!fit.unstable);
    for (pair, b) in fit.model.pairs.iter().zip(&branches) {
        let want = (b.omega_r().powi(2) - (b.r_ohm / (2.0 * b.l_h)).powi(2)).sqrt() / (2.0 * PI);
        assert!((pair.freq_hz() / want - 1.0).abs() < 1e-6, "{} vs {want}", pair.freq_hz());
        let got = to_equivalent_circuit(pair, fit.model.e).unwrap();
        for (name, a, w) in [("R", got.r_ohm, b.r_ohm), ("L", got.l_h, b.l_h), ("C", got.c_f, b.c_f)] {
            assert!((a / w - 1.0).abs() < 1e-3, "{name} at {want}: {a} vs {w}");
        }
    }
    assert!((fit.model.e / c0 - 1.0).abs() < 1e-3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn conjugate_symmetry(re in -1e6f64..-1.0, im in 1e8f64..1e10, cr in 1.0f64..1e5, ci in -1e5f64..1e5, w in 1e6f64..1e10) {
        let m = PoleResidueModel { pairs: vec![PolePair { pole: Complex64::new(re, im), residue: Complex64::new(cr, ci) }], e: 1e-13 };
        let a = m.eval_s(Complex64::new(0.0, w));
        let b = m.eval_s(Complex64::new(0.0, -w));
        prop_assert!((a - b.conj()).norm() <= 1e-12 * a.norm());
    }

    #[test]
    fn mapping_roundtrip(r in 1.0f64..100.0, l in 1e-5f64..1e-3, c in 1e-16f64..1e-14, b in -1e9f64..1e9) {
        let circ = BvdCircuit { b, g: 0.0, ..BvdCircuit::new(r, l, c, 1e-13) };
        prop_assume!(1.0 / (l * c) > (r / (2.0 * l)).powi(2));
        let back = to_equivalent_circuit(&circ.pole_pair().unwrap(), 1e-13).unwrap();
        prop_assert!((back.l_h / l - 1.0).abs() < 1e-9);
        prop_assert!((back.r_ohm / r - 1.0).abs() < 1e-6);
        prop_assert!((back.c_f / c - 1.0).abs() < 1e-9);
        prop_assert!((back.b - b).abs() < 1e-6 * (b.abs() + r / l * 1.0 / (2.0 * l)));
        prop_assert!((back.g - back.b * back.l_h * back.c_f).abs() <= 1e-12 * back.g.abs().max(1e-300));
    }
}
