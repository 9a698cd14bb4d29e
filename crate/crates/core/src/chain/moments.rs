use crate::error::{Error, Result};

fn check(var: f64, m: u32, n: u32) -> Result<()> {
    if !(var > 0.0 && var.is_finite()) {
        return Err(Error::domain("var", var, "quadrature variance must be positive"));
    }
    if m + n > 4 {
        return Err(Error::InvalidInput(format!(
            "moment order {m}+{n} exceeds the supported maximum of 4"
        )));
    }
    Ok(())
}

fn raw_1d(mean: f64, var: f64, k: u32) -> f64 {
    let (mu, s) = (mean, var);
    match k {
        0 => 1.0,
        1 => mu,
        2 => mu * mu + s,
        3 => mu.powi(3) + 3.0 * mu * s,
        4 => mu.powi(4) + 6.0 * mu * mu * s + 3.0 * s * s,
        _ => unreachable!("order checked by caller"),
    }
}

fn central_1d(var: f64, k: u32) -> f64 {
    match k {
        0 => 1.0,
        2 => var,
        4 => 3.0 * var * var,
        _ => 0.0,
    }
}

/// Raw moment `<I^m Q^n>` of a Gaussian state with independent quadratures
/// of equal variance `var`, in vacuum-normalised units (vacuum: `var = 1/2`).
pub fn gaussian_quadrature_moments(mean_i: f64, mean_q: f64, var: f64, m: u32, n: u32) -> Result<f64> {
    check(var, m, n)?;
    Ok(raw_1d(mean_i, var, m) * raw_1d(mean_q, var, n))
}

/// Central moment `<dI^m dQ^n>` of the same state.
pub fn gaussian_central_moment(var: f64, m: u32, n: u32) -> Result<f64> {
    check(var, m, n)?;
    Ok(central_1d(var, m) * central_1d(var, n))
}

/// Photon number `(<I^2> + <Q^2> - 1) / 2`.
pub fn photon_number_from_moments(i2: f64, q2: f64) -> f64 {
    0.5 * (i2 + q2 - 1.0)
}
