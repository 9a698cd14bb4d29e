//! Least-squares engines and the calibration analyses built on them.

mod linear;
mod lm;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::chain::{SweepDataset, SweepKind};
use crate::error::{Error, Result};
use crate::physics::{planck_occupation, quantum_efficiency, BOLTZMANN, PLANCK};

pub use linear::linear_fit;
pub use lm::{least_squares, Bounds, Data, LmOptions};

/// R² below which a coherent sweep is flagged as not linear.
pub const LINEARITY_THRESHOLD: f64 = 0.999;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// Name of the fitted model, empty for bare engine calls.
    #[serde(default)]
    pub model: String,
    #[serde(default)]
    pub param_names: Vec<String>,
    pub params: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    /// Sum of squared (weighted) residuals.
    pub residual_norm: f64,
    pub r_squared: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl FitResult {
    pub(crate) fn from_parts(
        params: Vec<f64>,
        cov: &DMatrix<f64>,
        residual_norm: f64,
        converged: bool,
        iterations: usize,
        r_squared: Option<f64>,
    ) -> Self {
        let n = params.len();
        // Symmetrise away round-off from the pseudo-inverse.
        let covariance: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| 0.5 * (cov[(i, j)] + cov[(j, i)])).collect())
            .collect();
        let std_errors = (0..n).map(|i| covariance[i][i].max(0.0).sqrt()).collect();
        Self {
            model: String::new(),
            param_names: Vec::new(),
            params,
            std_errors,
            covariance,
            residual_norm,
            r_squared,
            converged,
            iterations,
            warnings: Vec::new(),
        }
    }

    fn named(mut self, model: &str, names: &[&str]) -> Self {
        self.model = model.to_string();
        self.param_names = names.iter().map(|s| s.to_string()).collect();
        self
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.param_names.iter().position(|n| n == name).map(|k| self.params[k])
    }
}

/// Whether the idler of the calibration signal is a noise port
/// (narrowband) or a signal port (broadband).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EfficiencyMode {
    Narrowband,
    Broadband,
}

impl EfficiencyMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            EfficiencyMode::Narrowband => "narrowband",
            EfficiencyMode::Broadband => "broadband",
        }
    }

    /// The calibration model that measures this mode.
    pub fn model(&self) -> &'static str {
        match self {
            EfficiencyMode::Narrowband => COHERENT_MODEL,
            EfficiencyMode::Broadband => PLANCK_MODEL,
        }
    }
}

impl std::str::FromStr for EfficiencyMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "narrowband" => Ok(EfficiencyMode::Narrowband),
            "broadband" => Ok(EfficiencyMode::Broadband),
            other => Err(Error::InvalidInput(format!(
                "unknown mode '{other}' (expected narrowband or broadband)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyPoint {
    /// `G_n` for narrowband and `G_b` for broadband points.
    pub gain: f64,
    pub eta: f64,
    pub sigma_eta: f64,
    pub mode: EfficiencyMode,
}

pub const PLANCK_MODEL: &str = "planck";
pub const COHERENT_MODEL: &str = "coherent";
pub const ETA_MODEL: &str = "eta_power_law";

/// How calibration points are weighted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    /// Ordinary least squares.
    #[default]
    Uniform,
    /// `sigma_i` proportional to `|y_i|`, for scatter that scales with the
    /// signal. Only the relative size matters because the covariance is
    /// rescaled by the residual variance.
    Relative,
}

impl Weighting {
    pub fn sigma(&self, y: &[f64]) -> Result<Option<Vec<f64>>> {
        match self {
            Weighting::Uniform => Ok(None),
            Weighting::Relative => {
                if y.contains(&0.0) {
                    return Err(Error::InvalidInput("relative weighting needs non-zero y values".into()));
                }
                Ok(Some(y.iter().map(|v| v.abs()).collect()))
            }
        }
    }
}

impl std::str::FromStr for Weighting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Weighting::Uniform),
            "relative" => Ok(Weighting::Relative),
            other => Err(Error::InvalidInput(format!(
                "unknown weighting '{other}' (expected uniform or relative)"
            ))),
        }
    }
}

/// Planck-spectroscopy fit `y(T) = G_b (n(T, f_signal) + n_off)` with
/// `n_off >= 0`. Parameters: `[gain, n_off]`.
pub fn fit_planck(ds: &SweepDataset, f_signal: f64) -> Result<FitResult> {
    fit_planck_weighted(ds, f_signal, None)
}

/// [`fit_planck`] with per-point standard deviations.
pub fn fit_planck_weighted(ds: &SweepDataset, f_signal: f64, sigma: Option<&[f64]>) -> Result<FitResult> {
    if ds.kind != SweepKind::Planck {
        return Err(Error::InvalidInput(format!(
            "Planck fit needs a planck dataset, got {}",
            ds.kind.as_str()
        )));
    }
    ds.validate()?;
    if ds.len() < 3 {
        return Err(Error::Underdetermined {
            points: ds.len(),
            params: 3,
        });
    }
    let (t_lo, t_hi) = (ds.x[0], ds.x[ds.len() - 1]);
    if !(t_hi >= 3.0 * t_lo) {
        return Err(Error::InvalidInput(format!(
            "temperatures [{t_lo}, {t_hi}] K span less than a factor 3; gain and offset are not separable"
        )));
    }
    let n_th =
        ds.x.iter()
            .map(|&t| planck_occupation(f_signal, t))
            .collect::<Result<Vec<_>>>()?;

    let last = ds.len() - 1;
    let slope_scale = BOLTZMANN / (PLANCK * f_signal);
    let g_init = (ds.y[last] - ds.y[last - 1]) / (slope_scale * (ds.x[last] - ds.x[last - 1]));
    let g_init = if g_init.is_finite() && g_init > 0.0 {
        g_init
    } else {
        ds.y[last] / n_th[last].max(1e-12)
    };
    let off_init = (ds.y[0] / g_init - n_th[0]).max(0.0);

    let model = |t: f64, p: &[f64]| {
        let n = planck_occupation(f_signal, t).unwrap_or(f64::NAN);
        p[0] * (n + p[1])
    };
    let mut data = Data::new(&ds.x, &ds.y);
    if let Some(s) = sigma {
        data = data.with_sigma(s);
    }
    let bounds = Bounds::free(2).lower(1, 0.0);
    let fit = least_squares(model, data, &[g_init, off_init], Some(&bounds), &LmOptions::default())?;
    Ok(fit.named(PLANCK_MODEL, &["gain", "n_off"]))
}

/// Straight-line fit `y = G_n n_in + c` of a coherent sweep. Parameters:
/// `[gain, offset]`. Responses with R² below [`LINEARITY_THRESHOLD`] carry
/// a warning.
pub fn fit_coherent(ds: &SweepDataset) -> Result<FitResult> {
    fit_coherent_weighted(ds, None)
}

pub fn fit_coherent_weighted(ds: &SweepDataset, sigma: Option<&[f64]>) -> Result<FitResult> {
    if ds.kind != SweepKind::Coherent {
        return Err(Error::InvalidInput(format!(
            "coherent fit needs a coherent dataset, got {}",
            ds.kind.as_str()
        )));
    }
    ds.validate()?;
    let mut data = Data::new(&ds.x, &ds.y);
    if let Some(s) = sigma {
        data = data.with_sigma(s);
    }
    let mut fit = linear_fit(data)?.named(COHERENT_MODEL, &["gain", "offset"]);
    if let Some(r2) = fit.r_squared {
        if r2 < LINEARITY_THRESHOLD {
            fit.warnings
                .push(format!("nonlinear response: R^2 = {r2:.6} < {LINEARITY_THRESHOLD}"));
        }
    }
    Ok(fit)
}

/// Quantum efficiency from a calibration fit.
///
/// The input-referred noise is `n_off` of a Planck fit (broadband) or
/// `c / G_n` of a coherent fit (narrowband); both already contain the HEMT
/// contribution. The uncertainty is propagated to first order from the fit
/// covariance.
pub fn extract_efficiency(fit: &FitResult, mode: EfficiencyMode) -> Result<EfficiencyPoint> {
    if !fit.converged {
        return Err(Error::NotConverged);
    }
    if fit.model != mode.model() {
        return Err(Error::InvalidInput(format!(
            "{} efficiency needs a {} fit, got '{}'",
            mode.as_str(),
            mode.model(),
            fit.model
        )));
    }
    let (g, b) = (fit.params[0], fit.params[1]);
    let cov = &fit.covariance;
    let (n_f, var_nf) = match mode {
        EfficiencyMode::Broadband => (b, cov[1][1]),
        EfficiencyMode::Narrowband => {
            let (dg, db) = (-b / (g * g), 1.0 / g);
            let var = dg * dg * cov[0][0] + 2.0 * dg * db * cov[0][1] + db * db * cov[1][1];
            (b / g, var)
        }
    };
    let eta = quantum_efficiency(n_f)?;
    let sigma_eta = 2.0 * eta * eta * var_nf.max(0.0).sqrt();
    Ok(EfficiencyPoint {
        gain: g,
        eta,
        sigma_eta,
        mode,
    })
}

/// Input-referred chain noise `n_J' (G - 1)^epsilon + n_H / G`, plus the
/// idler vacuum `(1 - 1/G) / 2` for narrowband signals.
pub fn eta_model_noise(g: f64, n_jprime: f64, epsilon: f64, n_hemt: f64, mode: EfficiencyMode) -> f64 {
    let idler = match mode {
        EfficiencyMode::Narrowband => 0.5 * (1.0 - 1.0 / g),
        EfficiencyMode::Broadband => 0.0,
    };
    n_jprime * (g - 1.0).powf(epsilon) + n_hemt / g + idler
}

/// `1 / (1 + 2 n_f(G))` with [`eta_model_noise`].
pub fn eta_model(g: f64, n_jprime: f64, epsilon: f64, n_hemt: f64, mode: EfficiencyMode) -> f64 {
    1.0 / (1.0 + 2.0 * eta_model_noise(g, n_jprime, epsilon, n_hemt, mode))
}

/// Fits the pump-noise power law to efficiency points of one mode with the
/// HEMT noise held fixed. Parameters: `[n_jprime, epsilon]`, `n_jprime >= 0`.
/// Points are weighted by `1 / sigma_eta` when every point carries a
/// positive uncertainty.
pub fn fit_eta_curve(points: &[EfficiencyPoint], n_hemt: f64) -> Result<FitResult> {
    if points.len() < 3 {
        return Err(Error::Underdetermined {
            points: points.len(),
            params: 3,
        });
    }
    if !(n_hemt >= 0.0 && n_hemt.is_finite()) {
        return Err(Error::domain("n_hemt", n_hemt, "must be non-negative"));
    }
    let mode = points[0].mode;
    if points.iter().any(|p| p.mode != mode) {
        return Err(Error::InvalidInput(
            "efficiency points mix narrowband and broadband modes".into(),
        ));
    }
    if points.iter().any(|p| !(p.gain > 1.0 && p.gain.is_finite())) {
        return Err(Error::InvalidInput("efficiency points need gains above unity".into()));
    }
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.gain.total_cmp(&b.gain));
    let g: Vec<f64> = pts.iter().map(|p| p.gain).collect();
    let eta: Vec<f64> = pts.iter().map(|p| p.eta).collect();
    let sigma: Vec<f64> = pts.iter().map(|p| p.sigma_eta).collect();

    let top = pts.last().expect("at least three points");
    let residual_noise = 0.5 * (1.0 / top.eta - 1.0) - eta_model_noise(top.gain, 0.0, 0.0, n_hemt, mode);
    let n_init = (residual_noise / (top.gain - 1.0).sqrt()).max(1e-4);

    let mut data = Data::new(&g, &eta);
    if sigma.iter().all(|&s| s > 0.0) {
        data = data.with_sigma(&sigma);
    }
    let model = |g: f64, p: &[f64]| eta_model(g, p[0], p[1], n_hemt, mode);
    let bounds = Bounds::free(2).lower(0, 0.0);
    let fit = least_squares(model, data, &[n_init, 0.5], Some(&bounds), &LmOptions::default())?;
    Ok(fit.named(ETA_MODEL, &["n_jprime", "epsilon"]))
}
