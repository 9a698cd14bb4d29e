use nalgebra::{DMatrix, DVector};

use super::FitResult;
use crate::error::{Error, Result};

/// Observations `(x_i, y_i)` with optional standard deviations.
#[derive(Debug, Clone, Copy)]
pub struct Data<'a> {
    pub x: &'a [f64],
    pub y: &'a [f64],
    pub sigma: Option<&'a [f64]>,
}

impl<'a> Data<'a> {
    pub fn new(x: &'a [f64], y: &'a [f64]) -> Self {
        Self { x, y, sigma: None }
    }

    pub fn with_sigma(self, sigma: &'a [f64]) -> Self {
        Self {
            sigma: Some(sigma),
            ..self
        }
    }

    pub(crate) fn validate(&self, params: usize) -> Result<()> {
        if self.x.len() != self.y.len() {
            return Err(Error::InvalidInput(format!(
                "x has {} entries but y has {}",
                self.x.len(),
                self.y.len()
            )));
        }
        if self.x.len() < params {
            return Err(Error::Underdetermined {
                points: self.x.len(),
                params,
            });
        }
        if self.x.iter().chain(self.y).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("data contain non-finite values".into()));
        }
        if let Some(s) = self.sigma {
            if s.len() != self.x.len() {
                return Err(Error::InvalidInput("sigma length differs from the data length".into()));
            }
            if s.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
                return Err(Error::InvalidInput("sigma entries must be positive".into()));
            }
        }
        Ok(())
    }

    pub(crate) fn weight(&self, i: usize) -> f64 {
        self.sigma.map_or(1.0, |s| 1.0 / s[i])
    }
}

/// Box constraints `lower <= p <= upper`; use infinities for free parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn free(n: usize) -> Self {
        Self {
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn lower(mut self, k: usize, value: f64) -> Self {
        self.lower[k] = value;
        self
    }

    fn project(&self, p: &mut DVector<f64>) {
        for k in 0..p.len() {
            p[k] = p[k].clamp(self.lower[k], self.upper[k]);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions {
    /// Scaled gradient tolerance `max_j |g_j| / (|J_j| |r|)`.
    pub gtol: f64,
    pub xtol: f64,
    pub ftol: f64,
    pub max_iterations: usize,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            gtol: 1e-10,
            xtol: 1e-13,
            ftol: 1e-15,
            max_iterations: 200,
        }
    }
}

struct Problem<'a, F> {
    model: F,
    data: Data<'a>,
}

impl<F: Fn(f64, &[f64]) -> f64> Problem<'_, F> {
    fn residuals(&self, p: &[f64]) -> DVector<f64> {
        let d = &self.data;
        DVector::from_iterator(
            d.x.len(),
            (0..d.x.len()).map(|i| (d.y[i] - (self.model)(d.x[i], p)) * d.weight(i)),
        )
    }

    /// Jacobian of the weighted model values by central differences.
    fn jacobian(&self, p: &[f64]) -> DMatrix<f64> {
        let d = &self.data;
        let (m, n) = (d.x.len(), p.len());
        let mut jac = DMatrix::zeros(m, n);
        let mut q = p.to_vec();
        for k in 0..n {
            let h = 6e-6 * p[k].abs().max(1e-8);
            q[k] = p[k] + h;
            let up: Vec<f64> = d.x.iter().map(|&x| (self.model)(x, &q)).collect();
            q[k] = p[k] - h;
            let down: Vec<f64> = d.x.iter().map(|&x| (self.model)(x, &q)).collect();
            q[k] = p[k];
            for i in 0..m {
                jac[(i, k)] = (up[i] - down[i]) / (2.0 * h) * d.weight(i);
            }
        }
        jac
    }
}

fn numerical_rank(jac: &DMatrix<f64>) -> usize {
    let sv = jac.clone().svd(false, false).singular_values;
    let max = sv.max();
    if max == 0.0 {
        return 0;
    }
    let cut = max * f64::EPSILON * jac.nrows().max(jac.ncols()) as f64 * 1e3;
    sv.iter().filter(|&&s| s > cut).count()
}

/// Gradient of the cost with components that push against an active bound
/// removed.
fn projected_gradient(g: &DVector<f64>, p: &DVector<f64>, bounds: &Bounds) -> DVector<f64> {
    let mut out = g.clone();
    for k in 0..g.len() {
        // g = J^T r points downhill in the model-value convention used here.
        let at_lower = p[k] <= bounds.lower[k] && g[k] < 0.0;
        let at_upper = p[k] >= bounds.upper[k] && g[k] > 0.0;
        if at_lower || at_upper {
            out[k] = 0.0;
        }
    }
    out
}

fn solve_damped(jtj: &DMatrix<f64>, g: &DVector<f64>, lambda: f64, scale: &DVector<f64>) -> Option<DVector<f64>> {
    let mut a = jtj.clone();
    for k in 0..a.nrows() {
        a[(k, k)] += lambda * scale[k];
    }
    match a.clone().cholesky() {
        Some(c) => Some(c.solve(g)),
        None => a.svd(true, true).solve(g, 1e-15).ok(),
    }
}

/// Bounded Levenberg-Marquardt minimisation of
/// `sum_i ((y_i - model(x_i, p)) / sigma_i)^2`.
///
/// The covariance is `(J^T J)^+ s^2` at the optimum with the residual
/// variance `s^2 = SSR / max(m - n, 1)`. A rank-deficient Jacobian at the
/// starting point is an error; running out of iterations is reported
/// through `converged = false`.
pub fn least_squares<F>(model: F, data: Data<'_>, init: &[f64], bounds: Option<&Bounds>, opts: &LmOptions) -> Result<FitResult>
where
    F: Fn(f64, &[f64]) -> f64,
{
    let n = init.len();
    if n == 0 {
        return Err(Error::InvalidInput("no parameters to fit".into()));
    }
    if init.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("initial parameters must be finite".into()));
    }
    data.validate(n)?;
    let free = Bounds::free(n);
    let bounds = bounds.unwrap_or(&free);
    if bounds.lower.len() != n || bounds.upper.len() != n {
        return Err(Error::InvalidInput("bounds do not match the parameter count".into()));
    }
    let problem = Problem { model, data };

    let mut p = DVector::from_column_slice(init);
    bounds.project(&mut p);
    let mut r = problem.residuals(p.as_slice());
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("model is not finite at the initial parameters".into()));
    }
    let mut jac = problem.jacobian(p.as_slice());
    let rank = numerical_rank(&jac);
    if rank < n {
        return Err(Error::Singular { rank, params: n });
    }

    let mut cost = r.norm_squared();
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;

    'outer: while iterations < opts.max_iterations {
        iterations += 1;
        let jtj = jac.transpose() * &jac;
        let g = jac.transpose() * &r;
        let pg = projected_gradient(&g, &p, bounds);
        let r_norm = r.norm();
        if r_norm == 0.0 {
            converged = true;
            break;
        }
        let scaled = (0..n)
            .map(|k| {
                let col = jac.column(k).norm();
                if col == 0.0 {
                    0.0
                } else {
                    pg[k].abs() / (col * r_norm)
                }
            })
            .fold(0.0, f64::max);
        if scaled <= opts.gtol {
            converged = true;
            break;
        }
        // Parameters held at a bound by the gradient are frozen for this step.
        let mut jtj = jtj;
        let mut g = g;
        for k in 0..n {
            if pg[k] == 0.0 && g[k] != 0.0 {
                jtj.row_mut(k).fill(0.0);
                jtj.column_mut(k).fill(0.0);
                jtj[(k, k)] = 1.0;
                g[k] = 0.0;
            }
        }
        let scale = DVector::from_iterator(n, (0..n).map(|k| jtj[(k, k)].max(1e-300)));

        loop {
            let Some(step) = solve_damped(&jtj, &g, lambda, &scale) else {
                lambda *= 10.0;
                if lambda > 1e16 {
                    break 'outer;
                }
                continue;
            };
            let mut trial = &p + &step;
            bounds.project(&mut trial);
            let actual_step = &trial - &p;
            let r_trial = problem.residuals(trial.as_slice());
            let cost_trial = r_trial.norm_squared();
            if cost_trial.is_finite() && cost_trial < cost {
                let small_step = actual_step.norm() <= opts.xtol * (p.norm() + opts.xtol);
                let small_gain = (cost - cost_trial) <= opts.ftol * cost;
                p = trial;
                r = r_trial;
                cost = cost_trial;
                jac = problem.jacobian(p.as_slice());
                lambda = (lambda / 3.0).max(1e-12);
                if small_step || small_gain {
                    converged = true;
                    break 'outer;
                }
                break;
            }
            if actual_step.norm() <= opts.xtol * (p.norm() + opts.xtol) {
                // No downhill move is representable any more.
                converged = true;
                break 'outer;
            }
            lambda *= 4.0;
            if lambda > 1e16 {
                break 'outer;
            }
        }
    }

    let dof = data.x.len().saturating_sub(n).max(1) as f64;
    let s2 = cost / dof;
    let jtj = jac.transpose() * &jac;
    let cov = jtj
        .clone()
        .svd(true, true)
        .pseudo_inverse(1e-14 * jtj.norm())
        .map_err(|e| Error::InvalidInput(e.to_string()))?
        * s2;
    Ok(FitResult::from_parts(
        p.as_slice().to_vec(),
        &cov,
        cost,
        converged,
        iterations,
        r_squared(&data, &r),
    ))
}

/// Coefficient of determination `1 - SSR / SST` in the weighted metric.
pub(crate) fn r_squared(data: &Data<'_>, weighted_residuals: &DVector<f64>) -> Option<f64> {
    let m = data.y.len();
    let wsum: f64 = (0..m).map(|i| data.weight(i).powi(2)).sum();
    let mean = (0..m).map(|i| data.weight(i).powi(2) * data.y[i]).sum::<f64>() / wsum;
    let sst: f64 = (0..m).map(|i| (data.weight(i) * (data.y[i] - mean)).powi(2)).sum();
    if sst == 0.0 {
        return None;
    }
    Some(1.0 - weighted_residuals.norm_squared() / sst)
}
