//! Bounded Levenberg-Marquardt least squares.
//!
//! Parameters live in an internal coordinate system: positive quantities
//! that span decades are fitted as `ln p`, everything else as `p`. Bounds are
//! enforced by projecting trial steps back into the box. The Jacobian is
//! formed with central differences in internal coordinates and the
//! covariance is `sigma^2 (J^T J)^-1` with `sigma^2 = cost / (N - k)`.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scale {
    Linear,
    Log,
}

#[derive(Clone, Debug)]
pub struct ParamSpec {
    pub name: String,
    pub initial: f64,
    pub lower: f64,
    pub upper: f64,
    pub scale: Scale,
    pub vary: bool,
    /// Absolute finite-difference step in internal coordinates.
    pub fd_step: Option<f64>,
}

impl ParamSpec {
    pub fn linear(name: &str, initial: f64) -> Self {
        ParamSpec {
            name: name.to_string(),
            initial,
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
            scale: Scale::Linear,
            vary: true,
            fd_step: None,
        }
    }

    /// A strictly positive parameter fitted in log space.
    pub fn log(name: &str, initial: f64) -> Self {
        ParamSpec {
            name: name.to_string(),
            initial,
            lower: 0.0,
            upper: f64::INFINITY,
            scale: Scale::Log,
            vary: true,
            fd_step: None,
        }
    }

    pub fn bounds(mut self, lower: f64, upper: f64) -> Self {
        self.lower = lower;
        self.upper = upper;
        self
    }

    pub fn step(mut self, h: f64) -> Self {
        self.fd_step = Some(h);
        self
    }

    pub fn fixed(mut self, fixed: bool) -> Self {
        self.vary = !fixed;
        self
    }

    fn to_internal(&self, p: f64) -> f64 {
        match self.scale {
            Scale::Linear => p,
            Scale::Log => p.ln(),
        }
    }

    fn to_external(&self, u: f64) -> f64 {
        match self.scale {
            Scale::Linear => u,
            Scale::Log => u.exp(),
        }
    }

    fn internal_bounds(&self) -> (f64, f64) {
        match self.scale {
            Scale::Linear => (self.lower, self.upper),
            Scale::Log => {
                let lo = if self.lower > 0.0 { self.lower.ln() } else { f64::NEG_INFINITY };
                let hi = if self.upper > 0.0 { self.upper.ln() } else { f64::NEG_INFINITY };
                (lo, hi)
            }
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct FitOptions {
    pub step_tol: f64,
    pub grad_tol: f64,
    pub cost_tol: f64,
    pub max_iter: usize,
    /// Treat residuals as already normalised by their true sigma and skip
    /// the `cost / (N - k)` rescaling of the covariance.
    pub absolute_sigma: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            step_tol: 1e-10,
            grad_tol: 1e-10,
            cost_tol: 1e-14,
            max_iter: 200,
            absolute_sigma: false,
        }
    }
}

pub struct FitProblem<F> {
    pub residual: F,
    pub params: Vec<ParamSpec>,
    pub options: FitOptions,
}

impl<F: Fn(&[f64]) -> Vec<f64>> FitProblem<F> {
    pub fn new(residual: F, params: Vec<ParamSpec>) -> Self {
        FitProblem {
            residual,
            params,
            options: FitOptions::default(),
        }
    }

    pub fn with_options(mut self, options: FitOptions) -> Self {
        self.options = options;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    StepTolerance,
    GradientTolerance,
    CostTolerance,
    /// No further decrease possible at working precision.
    Stagnation,
    MaxIterations,
}

#[derive(Clone, Debug)]
pub struct FitResult {
    pub names: Vec<String>,
    pub values: Vec<f64>,
    /// One-sigma uncertainties; zero for fixed parameters and infinite for
    /// parameters the data cannot constrain.
    pub sigma: Vec<f64>,
    pub covariance: DMatrix<f64>,
    pub cost: f64,
    pub n_data: usize,
    pub n_free: usize,
    pub iterations: usize,
    pub termination: Termination,
    pub residuals: Vec<f64>,
}

impl FitResult {
    pub fn converged(&self) -> bool {
        self.termination != Termination::MaxIterations
    }

    pub fn reduced_chi2(&self) -> f64 {
        if self.n_data > self.n_free {
            self.cost / (self.n_data - self.n_free) as f64
        } else {
            f64::NAN
        }
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn value(&self, name: &str) -> f64 {
        self.values[self.index(name).unwrap_or_else(|| panic!("unknown parameter {name}"))]
    }

    pub fn sigma_of(&self, name: &str) -> f64 {
        self.sigma[self.index(name).unwrap_or_else(|| panic!("unknown parameter {name}"))]
    }

    pub fn identifiable(&self, name: &str) -> bool {
        self.sigma_of(name).is_finite()
    }
}

struct Work<'a, F> {
    f: &'a F,
    specs: &'a [ParamSpec],
    free: Vec<usize>,
    base: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl<'a, F: Fn(&[f64]) -> Vec<f64>> Work<'a, F> {
    fn external(&self, u: &[f64]) -> Vec<f64> {
        let mut p = self.base.clone();
        for (k, &j) in self.free.iter().enumerate() {
            p[j] = self.specs[j].to_external(u[k]);
        }
        p
    }

    fn eval(&self, u: &[f64]) -> Vec<f64> {
        (self.f)(&self.external(u))
    }

    fn clamp(&self, u: &mut [f64]) {
        for k in 0..u.len() {
            u[k] = u[k].clamp(self.lo[k], self.hi[k]);
        }
    }

    fn jacobian(&self, u: &[f64], r0: &[f64]) -> DMatrix<f64> {
        let m = r0.len();
        let n = u.len();
        let mut jac = DMatrix::zeros(m, n);
        let mut up = u.to_vec();
        for k in 0..n {
            let h = self.specs[self.free[k]]
                .fd_step
                .unwrap_or_else(|| 6e-6 * u[k].abs().max(1e-3));
            let fwd_ok = u[k] + h <= self.hi[k];
            let bwd_ok = u[k] - h >= self.lo[k];
            let (rp, rm, denom) = if fwd_ok && bwd_ok {
                up[k] = u[k] + h;
                let rp = self.eval(&up);
                up[k] = u[k] - h;
                let rm = self.eval(&up);
                (rp, rm, 2.0 * h)
            } else if fwd_ok {
                up[k] = u[k] + h;
                (self.eval(&up), r0.to_vec(), h)
            } else {
                up[k] = u[k] - h;
                (r0.to_vec(), self.eval(&up), h)
            };
            up[k] = u[k];
            for i in 0..m {
                jac[(i, k)] = (rp[i] - rm[i]) / denom;
            }
        }
        jac
    }
}

fn sumsq(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum()
}

/// Central-difference Jacobian of `f` at `params` with per-parameter steps.
pub fn finite_difference_jacobian<F: Fn(&[f64]) -> Vec<f64>>(
    f: F,
    params: &[f64],
    steps: &[f64],
) -> Result<DMatrix<f64>> {
    if steps.len() != params.len() || params.iter().any(|p| !p.is_finite()) {
        return Err(Error::InvalidInput("params must be finite with one step per parameter".into()));
    }
    let m = f(params).len();
    let mut jac = DMatrix::zeros(m, params.len());
    let mut p = params.to_vec();
    for k in 0..params.len() {
        let h = steps[k];
        p[k] = params[k] + h;
        let rp = f(&p);
        p[k] = params[k] - h;
        let rm = f(&p);
        p[k] = params[k];
        if rp.len() != m || rm.len() != m || rp.iter().chain(&rm).any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(format!("residual not finite when perturbing parameter {k}")));
        }
        for i in 0..m {
            jac[(i, k)] = (rp[i] - rm[i]) / (2.0 * h);
        }
    }
    Ok(jac)
}

/// Minimise the sum of squared residuals returned by `problem.residual`.
pub fn fit<F: Fn(&[f64]) -> Vec<f64>>(problem: &FitProblem<F>) -> Result<FitResult> {
    let specs = &problem.params;
    let opts = problem.options;
    for s in specs {
        if !s.initial.is_finite() {
            return Err(Error::InvalidInput(format!("initial value of {} is not finite", s.name)));
        }
        if s.lower > s.upper {
            return Err(Error::InvalidInput(format!("bounds of {} are inverted", s.name)));
        }
        if s.scale == Scale::Log && s.initial <= 0.0 {
            return Err(Error::InvalidInput(format!("log-scaled {} must start positive", s.name)));
        }
    }
    let free: Vec<usize> = (0..specs.len()).filter(|&j| specs[j].vary).collect();
    let base: Vec<f64> = specs.iter().map(|s| s.initial).collect();
    let (lo, hi): (Vec<f64>, Vec<f64>) = free.iter().map(|&j| specs[j].internal_bounds()).unzip();
    let w = Work {
        f: &problem.residual,
        specs,
        free: free.clone(),
        base,
        lo,
        hi,
    };
    let n = free.len();
    let mut u: Vec<f64> = free.iter().map(|&j| specs[j].to_internal(specs[j].initial)).collect();
    w.clamp(&mut u);

    let mut r = w.eval(&u);
    let m = r.len();
    if m < n {
        return Err(Error::InvalidInput(format!("{m} residuals for {n} free parameters")));
    }
    if r.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("residuals are not finite at the initial point".into()));
    }
    let mut cost = sumsq(&r);
    let mut lambda = 1e-3;
    let mut nu = 2.0;
    let mut termination = Termination::MaxIterations;
    let mut iterations = 0;
    let mut diag = vec![0.0f64; n];

    'outer: while iterations < opts.max_iter && n > 0 {
        iterations += 1;
        if cost == 0.0 {
            termination = Termination::CostTolerance;
            break;
        }
        let jac = w.jacobian(&u, &r);
        let rv = DVector::from_column_slice(&r);
        let g = jac.transpose() * &rv;
        let jtj = jac.transpose() * &jac;
        let rnorm = cost.sqrt();
        let mut gmax = 0.0f64;
        for k in 0..n {
            let cn = jac.column(k).norm();
            if cn > 0.0 {
                gmax = gmax.max(g[k].abs() / (cn * rnorm));
            }
            diag[k] = jtj[(k, k)].max(1e-300);
        }
        if gmax <= opts.grad_tol {
            termination = Termination::GradientTolerance;
            break;
        }
        loop {
            let mut a = jtj.clone();
            for k in 0..n {
                a[(k, k)] += lambda * diag[k];
            }
            let step = match a.cholesky() {
                Some(ch) => ch.solve(&(-&g)),
                None => {
                    lambda *= nu;
                    nu *= 2.0;
                    if lambda > 1e20 {
                        termination = Termination::Stagnation;
                        break 'outer;
                    }
                    continue;
                }
            };
            let mut ut = u.clone();
            for k in 0..n {
                ut[k] += step[k];
            }
            w.clamp(&mut ut);
            let actual: Vec<f64> = (0..n).map(|k| ut[k] - u[k]).collect();
            let rt = w.eval(&ut);
            let ct = if rt.iter().all(|x| x.is_finite()) { sumsq(&rt) } else { f64::INFINITY };
            if ct < cost {
                let dv = DVector::from_column_slice(&actual);
                let pred = -(2.0 * g.dot(&dv) + (jtj.clone() * &dv).dot(&dv));
                let rho = if pred > 0.0 { (cost - ct) / pred } else { 0.0 };
                lambda *= (1.0f64 / 3.0).max(1.0 - (2.0 * rho - 1.0).powi(3));
                lambda = lambda.max(1e-15);
                nu = 2.0;
                let small_step = (0..n).all(|k| actual[k].abs() <= opts.step_tol * u[k].abs().max(1.0));
                let rel_drop = (cost - ct) / cost;
                u = ut;
                r = rt;
                cost = ct;
                if small_step {
                    termination = Termination::StepTolerance;
                    break 'outer;
                }
                if rel_drop <= opts.cost_tol {
                    termination = Termination::CostTolerance;
                    break 'outer;
                }
                break;
            }
            lambda *= nu;
            nu *= 2.0;
            if lambda > 1e20 {
                termination = Termination::Stagnation;
                break 'outer;
            }
        }
    }
    if n == 0 {
        termination = Termination::CostTolerance;
    }

    let p = w.external(&u);
    let mut covariance = DMatrix::zeros(specs.len(), specs.len());
    let mut sigma = vec![0.0; specs.len()];
    if n > 0 {
        let jac = w.jacobian(&u, &r);
        let s2 = if opts.absolute_sigma {
            1.0
        } else if m > n {
            cost / (m - n) as f64
        } else {
            f64::NAN
        };
        let (cov_int, ident) = inverse_normal(&jac);
        for (a, &ja) in free.iter().enumerate() {
            let da = dext(&specs[ja], p[ja]);
            for (b, &jb) in free.iter().enumerate() {
                let db = dext(&specs[jb], p[jb]);
                covariance[(ja, jb)] = s2 * 0.5 * (cov_int[(a, b)] + cov_int[(b, a)]) * da * db;
            }
            sigma[ja] = if ident[a] { covariance[(ja, ja)].max(0.0).sqrt() } else { f64::INFINITY };
        }
    }
    Ok(FitResult {
        names: specs.iter().map(|s| s.name.clone()).collect(),
        values: p,
        sigma,
        covariance,
        cost,
        n_data: m,
        n_free: n,
        iterations,
        termination,
        residuals: r,
    })
}

fn dext(spec: &ParamSpec, p: f64) -> f64 {
    match spec.scale {
        Scale::Linear => 1.0,
        Scale::Log => p,
    }
}

/// `(J^T J)^-1` via a column-scaled SVD, plus a per-parameter flag that is
/// false when the parameter has weight in a numerically null direction.
fn inverse_normal(jac: &DMatrix<f64>) -> (DMatrix<f64>, Vec<bool>) {
    let n = jac.ncols();
    let scale: Vec<f64> = (0..n)
        .map(|k| {
            let c = jac.column(k).norm();
            if c > 0.0 {
                c
            } else {
                1.0
            }
        })
        .collect();
    let mut js = jac.clone();
    for k in 0..n {
        js.column_mut(k).scale_mut(1.0 / scale[k]);
    }
    let svd = js.svd(false, true);
    let v_t = svd.v_t.expect("v_t requested");
    let smax = svd.singular_values.max();
    let tol = 1e-9 * smax.max(1e-300);
    let mut inv = DMatrix::zeros(n, n);
    let mut ident = vec![true; n];
    for (i, &s) in svd.singular_values.iter().enumerate() {
        let row = v_t.row(i);
        if s > tol {
            for a in 0..n {
                for b in 0..n {
                    inv[(a, b)] += row[a] * row[b] / (s * s);
                }
            }
        } else {
            for a in 0..n {
                if row[a].abs() > 1e-3 {
                    ident[a] = false;
                }
            }
        }
    }
    for k in 0..n {
        if jac.column(k).norm() == 0.0 {
            ident[k] = false;
        }
    }
    for a in 0..n {
        for b in 0..n {
            inv[(a, b)] /= scale[a] * scale[b];
        }
    }
    (inv, ident)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn straight_line_matches_normal_equations() {
        let x: Vec<f64> = (0..20).map(|i| i as f64 * 0.5).collect();
        let noise = [0.3, -0.1, 0.2, -0.4, 0.1, 0.0, -0.2, 0.3, 0.1, -0.3, 0.2, -0.1, 0.0, 0.4, -0.2, 0.1, -0.1, 0.2, -0.3, 0.1];
        let y: Vec<f64> = x.iter().zip(noise).map(|(x, e)| 2.0 + 3.0 * x + e).collect();
        let prob = FitProblem::new(
            |p: &[f64]| x.iter().zip(&y).map(|(x, y)| p[0] + p[1] * x - y).collect(),
            vec![ParamSpec::linear("a", 0.0), ParamSpec::linear("b", 1.0)],
        );
        let res = fit(&prob).unwrap();
        // closed-form ordinary least squares
        let n = x.len() as f64;
        let sx: f64 = x.iter().sum();
        let sy: f64 = y.iter().sum();
        let sxx: f64 = x.iter().map(|x| x * x).sum();
        let sxy: f64 = x.iter().zip(&y).map(|(x, y)| x * y).sum();
        let det = n * sxx - sx * sx;
        let b = (n * sxy - sx * sy) / det;
        let a = (sy - b * sx) / n;
        assert!((res.value("a") - a).abs() < 1e-9);
        assert!((res.value("b") - b).abs() < 1e-9);
        let s2: f64 = x.iter().zip(&y).map(|(x, y)| (a + b * x - y).powi(2)).sum::<f64>() / (n - 2.0);
        assert!((res.sigma_of("b") - (s2 * n / det).sqrt()).abs() < 1e-7);
        assert!((res.sigma_of("a") - (s2 * sxx / det).sqrt()).abs() < 1e-7);
    }

    #[test]
    fn log_scale_exponential() {
        let t: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = t.iter().map(|t| 5.0 * (-t / 1.3).exp()).collect();
        let prob = FitProblem::new(
            |p: &[f64]| t.iter().zip(&y).map(|(t, y)| p[0] * (-t / p[1]).exp() - y).collect(),
            vec![ParamSpec::log("amp", 1.0), ParamSpec::log("tau", 0.2)],
        );
        let res = fit(&prob).unwrap();
        assert!(res.converged());
        assert!((res.value("amp") - 5.0).abs() < 1e-8);
        assert!((res.value("tau") - 1.3).abs() < 1e-8);
    }

    #[test]
    fn bound_is_respected() {
        let prob = FitProblem::new(
            |p: &[f64]| vec![p[0] - 3.0, 0.0],
            vec![ParamSpec::linear("x", 0.0).bounds(-1.0, 1.0)],
        );
        let res = fit(&prob).unwrap();
        assert!((res.value("x") - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fixed_parameter_untouched() {
        let prob = FitProblem::new(
            |p: &[f64]| vec![p[0] - 2.0, p[1] - 5.0, p[0] + p[1] - 7.0],
            vec![ParamSpec::linear("a", 0.0), ParamSpec::linear("b", 4.0).fixed(true)],
        );
        let res = fit(&prob).unwrap();
        assert_eq!(res.value("b"), 4.0);
        assert_eq!(res.sigma_of("b"), 0.0);
    }

    #[test]
    fn degenerate_direction_flagged() {
        // only the sum a + b is constrained
        let prob = FitProblem::new(
            |p: &[f64]| (0..5).map(|i| p[0] + p[1] - 1.0 - 0.01 * (i as f64 - 2.0)).collect(),
            vec![ParamSpec::linear("a", 0.3), ParamSpec::linear("b", 0.1)],
        );
        let res = fit(&prob).unwrap();
        assert!(!res.identifiable("a"));
        assert!(!res.identifiable("b"));
    }

    #[test]
    fn too_few_residuals() {
        let prob = FitProblem::new(
            |p: &[f64]| vec![p[0]],
            vec![ParamSpec::linear("a", 0.3), ParamSpec::linear("b", 0.1)],
        );
        assert!(matches!(fit(&prob), Err(Error::InvalidInput(_))));
    }
}

/// A value with its one-sigma uncertainty.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub sigma: f64,
}

impl Estimate {
    pub fn new(value: f64, sigma: f64) -> Self {
        Estimate { value, sigma }
    }

    pub fn exact(value: f64) -> Self {
        Estimate { value, sigma: 0.0 }
    }

    /// `|value - truth| / sigma`.
    pub fn z_score(&self, truth: f64) -> f64 {
        (self.value - truth).abs() / self.sigma
    }
}

/// First-order propagation of a covariance through a gradient.
pub fn propagate(cov: &DMatrix<f64>, grad: &[f64]) -> f64 {
    let n = grad.len();
    let mut v = 0.0;
    for a in 0..n {
        for b in 0..n {
            v += grad[a] * cov[(a, b)] * grad[b];
        }
    }
    v.max(0.0).sqrt()
}
