use phonoq::fit::*;
use phonoq::tls_loss::TlsLossParams;
use proptest::prelude::*;

#[test]
fn exact_line_through_three_points() {
    let pts = [(0.0, 1.0), (1.0, 3.0), (2.0, 5.0)];
    let prob = FitProblem::new(
        |p: &[f64]| pts.iter().map(|(x, y)| p[0] * x + p[1] - y).collect(),
        vec![ParamSpec::linear("a", 0.0), ParamSpec::linear("b", 0.0)],
    );
    let res = fit(&prob).unwrap();
    assert!((res.value("a") - 2.0).abs() < 1e-12);
    assert!((res.value("b") - 1.0).abs() < 1e-12);
    assert!(res.cost < 1e-24);
}

#[test]
fn start_at_minimum_is_a_fixed_point() {
    let pts = [(0.0, 1.0), (1.0, 3.0), (2.0, 5.0)];
    let prob = FitProblem::new(
        |p: &[f64]| pts.iter().map(|(x, y)| p[0] * x + p[1] - y).collect(),
        vec![ParamSpec::linear("a", 2.0), ParamSpec::linear("b", 1.0)],
    );
    let res = fit(&prob).unwrap();
    assert_eq!(res.values, vec![2.0, 1.0]);
    assert!(res.iterations <= 1);
}

#[test]
fn exponential_decay_recovery() {
    let t: Vec<f64> = (0..=200).map(|k| k as f64 * 0.05e-3).collect();
    let y: Vec<f64> = t.iter().map(|t| (-t / 2.7e-3).exp()).collect();
    let prob = FitProblem::new(
        |p: &[f64]| t.iter().zip(&y).map(|(t, y)| p[0] * (-t / p[1]).exp() - y).collect(),
        vec![ParamSpec::log("amp", 0.5), ParamSpec::log("tau", 1e-3)],
    );
    let res = fit(&prob).unwrap();
    assert!((res.value("amp") - 1.0).abs() < 1e-9);
    assert!((res.value("tau") / 2.7e-3 - 1.0).abs() < 1e-9);
}

#[test]
fn non_finite_start_rejected() {
    let prob = FitProblem::new(|p: &[f64]| vec![1.0 / p[0], 1.0], vec![ParamSpec::linear("x", 0.0)]);
    assert!(fit(&prob).is_err());
}

#[test]
fn iteration_cap_is_flagged() {
    let t: Vec<f64> = (0..50).map(|k| k as f64 * 0.1).collect();
    let y: Vec<f64> = t.iter().map(|t| 3.0 * (-t / 0.7).exp() + 0.1 * t.sin()).collect();
    let mut prob = FitProblem::new(
        |p: &[f64]| t.iter().zip(&y).map(|(t, y)| p[0] * (-t / p[1]).exp() - y).collect(),
        vec![ParamSpec::log("amp", 0.1), ParamSpec::log("tau", 20.0)],
    );
    prob.options.max_iter = 2;
    let res = fit(&prob).unwrap();
    assert!(!res.converged());
    assert_eq!(res.termination, Termination::MaxIterations);
}

#[test]
fn jacobian_of_square() {
    let j = finite_difference_jacobian(|p: &[f64]| vec![p[0] * p[0]], &[3.0], &[1e-4]).unwrap();
    assert!((j[(0, 0)] - 6.0).abs() < 1e-6);
    let z = finite_difference_jacobian(|_: &[f64]| vec![4.0, 5.0], &[1.0, 2.0], &[1e-3, 1e-3]).unwrap();
    assert!(z.iter().all(|v| *v == 0.0));
}

#[test]
fn jacobian_names_offending_parameter() {
    let err = finite_difference_jacobian(|p: &[f64]| vec![(1.0 - p[1]).sqrt()], &[0.0, 1.0], &[1e-3, 1e-3])
        .unwrap_err()
        .to_string();
    assert!(err.contains("parameter 1"), "{err}");
}

fn resonant_loss(p: &[f64]) -> Vec<f64> {
    let grid = [(0.0, 0.025), (1.0, 0.025), (30.0, 0.05), (1e3, 0.1), (1e5, 0.3), (10.0, 1.0)];
    let m = TlsLossParams { f_delta0_diss: p[0], n_c: p[1], beta: p[2], ..TlsLossParams::table1() };
    grid.iter().map(|&(n, t)| m.q_res_inv(n, t, 500e6)).collect()
}

#[test]
fn jacobian_matches_richardson_oracle() {
    let p = [1.26e-5, 10.0, 0.56];
    let steps: Vec<f64> = p.iter().map(|v| 1e-4 * v).collect();
    let jac = finite_difference_jacobian(resonant_loss, &p, &steps).unwrap();
    for k in 0..3 {
        let central = |h: f64| -> Vec<f64> {
            let (mut a, mut b) = (p, p);
            a[k] += h;
            b[k] -= h;
            resonant_loss(&a).iter().zip(resonant_loss(&b)).map(|(x, y)| (x - y) / (2.0 * h)).collect()
        };
        let h = 1e-2 * p[k];
        let (d1, d2, d4) = (central(h), central(h / 2.0), central(h / 4.0));
        for i in 0..d1.len() {
            let r1 = (4.0 * d2[i] - d1[i]) / 3.0;
            let r2 = (4.0 * d4[i] - d2[i]) / 3.0;
            let oracle = (16.0 * r2 - r1) / 15.0;
            let scale = oracle.abs().max(1e-30);
            assert!((jac[(i, k)] - oracle).abs() / scale < 1e-6, "row {i} param {k}: {} vs {oracle}", jac[(i, k)]);
        }
    }
}

#[test]
fn log_parameters_stay_positive() {
    let y = [1e-8, 2e-8, 4e-8];
    let prob = FitProblem::new(
        |p: &[f64]| y.iter().enumerate().map(|(k, v)| p[0] * 2f64.powi(k as i32) - v).collect(),
        vec![ParamSpec::log("q", 1.0)],
    );
    let res = fit(&prob).unwrap();
    assert!(res.value("q") > 0.0);
    assert!((res.value("q") / 1e-8 - 1.0).abs() < 1e-9, "{} {:?} {}", res.value("q"), res.termination, res.iterations);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn sigma_scales_with_noise(scale in 0.1f64..10.0) {
        let x: Vec<f64> = (0..30).map(|k| k as f64 / 3.0).collect();
        let e: Vec<f64> = (0..30).map(|k| ((k * 7919 % 13) as f64 - 6.0) / 6.0).collect();
        let run = |s: f64| {
            let y: Vec<f64> = x.iter().zip(&e).map(|(x, e)| 1.5 - 0.5 * x + s * e).collect();
            let prob = FitProblem::new(
                |p: &[f64]| x.iter().zip(&y).map(|(x, y)| p[0] + p[1] * x - y).collect(),
                vec![ParamSpec::linear("a", 0.0), ParamSpec::linear("b", 0.0)],
            );
            fit(&prob).unwrap().sigma
        };
        let (base, scaled) = (run(0.01), run(0.01 * scale));
        for k in 0..2 {
            prop_assert!((scaled[k] / base[k] - scale).abs() < 1e-6 * scale);
        }
    }

    #[test]
    fn covariance_is_symmetric_psd(a in -5.0f64..5.0, tau in 0.2f64..3.0) {
        let t: Vec<f64> = (0..40).map(|k| k as f64 * 0.1).collect();
        let y: Vec<f64> = t.iter().enumerate().map(|(k, t)| a * (-t / tau).exp() + 0.01 * ((k % 5) as f64 - 2.0)).collect();
        let prob = FitProblem::new(
            |p: &[f64]| t.iter().zip(&y).map(|(t, y)| p[0] * (-t / p[1]).exp() - y).collect(),
            vec![ParamSpec::linear("a", 1.0), ParamSpec::log("tau", 1.0)],
        );
        let res = fit(&prob).unwrap();
        let c = &res.covariance;
        prop_assert!((c[(0, 1)] - c[(1, 0)]).abs() <= 1e-12 * (c[(0, 0)] * c[(1, 1)]).sqrt().max(1e-300));
        prop_assert!(c[(0, 0)] >= 0.0 && c[(1, 1)] >= 0.0);
        prop_assert!(c[(0, 0)] * c[(1, 1)] - c[(0, 1)] * c[(1, 0)] >= -1e-12 * c[(0, 0)] * c[(1, 1)]);
        for k in 0..2 {
            prop_assert!((res.sigma[k] - c[(k, k)].sqrt()).abs() <= 1e-12 * res.sigma[k].max(1e-300));
        }
    }
}
