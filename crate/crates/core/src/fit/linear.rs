use nalgebra::{DMatrix, DVector};

use super::lm::{r_squared, Data};
use super::FitResult;
use crate::error::{Error, Result};

/// Closed-form (weighted) straight-line fit `y = slope x + intercept`.
///
/// Parameters are `[slope, intercept]`; the covariance is scaled by the
/// residual variance like [`super::least_squares`].
pub fn linear_fit(data: Data<'_>) -> Result<FitResult> {
    data.validate(2)?;
    let m = data.x.len();
    let w: Vec<f64> = (0..m).map(|i| data.weight(i).powi(2)).collect();
    let sw: f64 = w.iter().sum();
    let mx = (0..m).map(|i| w[i] * data.x[i]).sum::<f64>() / sw;
    let my = (0..m).map(|i| w[i] * data.y[i]).sum::<f64>() / sw;
    let sxx: f64 = (0..m).map(|i| w[i] * (data.x[i] - mx).powi(2)).sum();
    let sxy: f64 = (0..m).map(|i| w[i] * (data.x[i] - mx) * (data.y[i] - my)).sum();
    let spread = data.x.iter().fold(0.0_f64, |a, &x| a.max((x - mx).abs()));
    if !(sxx > 0.0) || spread <= 1e-12 * mx.abs() {
        return Err(Error::Singular { rank: 1, params: 2 });
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;

    let residuals = DVector::from_iterator(
        m,
        (0..m).map(|i| (data.y[i] - slope * data.x[i] - intercept) * data.weight(i)),
    );
    let ssr = residuals.norm_squared();
    let s2 = ssr / (m.saturating_sub(2).max(1)) as f64;
    let var_slope = s2 / sxx;
    let var_intercept = s2 * (1.0 / sw + mx * mx / sxx);
    let cov_si = -s2 * mx / sxx;
    let cov = DMatrix::from_row_slice(2, 2, &[var_slope, cov_si, cov_si, var_intercept]);
    Ok(FitResult::from_parts(
        vec![slope, intercept],
        &cov,
        ssr,
        true,
        0,
        r_squared(&data, &residuals),
    ))
}
