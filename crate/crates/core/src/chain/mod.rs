//! Frequency-resolved simulation of the JPA + HEMT amplification chain.
//!
//! States are per-mode occupations on a grid symmetric about the JPA
//! resonance. [`propagate`] applies the ideal two-mode squeezing stage,
//! [`run_chain`] adds pump and HEMT noise, and the [`sweep`] module turns
//! the chain into synthetic Planck and coherent calibration datasets.

mod grid;
mod moments;
mod state;
pub mod sweep;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::{AmplifierParams, NoiseBudget, SignalKind, SignalSpec};

pub use grid::{FrequencyGrid, GridSpec};
pub use moments::{gaussian_central_moment, gaussian_quadrature_moments, photon_number_from_moments};
pub use state::{
    excess_photon_number, propagate, reconstruction_photon_number, run_chain, window_added_noise, ChainOutput, SpectralState,
};
pub use sweep::{
    coherent_response, planck_response, simulate_coherent_sweep, simulate_planck_sweep, Response, SweepDataset, SweepKind,
};

/// Photon-number variance of a pump with `n_p` coherent photons on top of a
/// thermal occupation `n_th`: `n_p (2 n_th + 1) + 2 n_th^2 + n_th`.
pub fn pump_power_variance(n_p: f64, n_th: f64) -> Result<f64> {
    if !(n_p >= 0.0 && n_p.is_finite()) {
        return Err(Error::domain("n_p", n_p, "must be non-negative"));
    }
    if !(n_th >= 0.0 && n_th.is_finite()) {
        return Err(Error::domain("n_th", n_th, "must be non-negative"));
    }
    Ok(n_p * (2.0 * n_th + 1.0) + 2.0 * n_th * n_th + n_th)
}

/// Input-referred JPA pump noise `n_J' (g - 1)^epsilon`.
pub fn jpa_pump_noise(g: f64, noise: &NoiseBudget) -> Result<f64> {
    if !(g >= 1.0) {
        return Err(Error::domain("g", g, "gain must be at least unity"));
    }
    let p = noise.pump;
    if p.n_jprime == 0.0 {
        return Ok(0.0);
    }
    Ok(p.n_jprime * (g - 1.0).powf(p.epsilon))
}

/// Noise added by a chain of total gain `g_total`, referred to its input:
/// `(n_out - g n_in) / g + n_hemt / g`.
///
/// `n_out` and `n_in` have to use the same convention (both variances or
/// both occupations with the vacuum contribution accounted for).
pub fn added_noise_referred(n_out: f64, n_in: f64, g_total: f64, n_hemt: f64) -> f64 {
    (n_out - g_total * n_in) / g_total + n_hemt / g_total
}

/// Input-referred noise added by the ideal JPA to a signal of single-side
/// bandwidth `b_s` centred at the signal frequency, averaged over the
/// reconstructed part `[omega_s - min(b_s, B), omega_s + min(b_s, B)]` of
/// the signal band.
///
/// The grid gets cell edges at the signal band edges so that the signal
/// and idler indicators are resolved exactly.
pub fn ideal_added_noise(amp: &AmplifierParams, b_s: f64, grid: &GridSpec) -> Result<f64> {
    let d = amp.delta();
    let g = Arc::new(grid.build(amp, &[d - b_s, d + b_s])?);
    let spec = SignalSpec::new(SignalKind::Vacuum, amp.omega_signal(), b_s)?;
    let input = SpectralState::with_signal(g, &spec, 0.0)?;
    let w = b_s.min(amp.b_meas());
    window_added_noise(&input, amp, d - w, d + w)
}

/// Everything a synthetic sweep depends on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    pub amp: AmplifierParams,
    pub noise: NoiseBudget,
    pub seed: u64,
    /// Relative standard deviation of the multiplicative measurement scatter.
    pub meas_noise_rel: f64,
    #[serde(default)]
    pub grid: GridSpec,
}

impl ChainConfig {
    pub fn new(amp: AmplifierParams, noise: NoiseBudget, seed: u64, meas_noise_rel: f64) -> Result<Self> {
        let cfg = Self {
            amp,
            noise,
            seed,
            meas_noise_rel,
            grid: GridSpec::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.noise.validate()?;
        if !(self.meas_noise_rel >= 0.0 && self.meas_noise_rel.is_finite()) {
            return Err(Error::domain("meas_noise_rel", self.meas_noise_rel, "must be non-negative"));
        }
        if let Some(h) = self.grid.spacing {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::domain("grid.spacing", h, "must be positive"));
            }
        }
        if !(self.grid.span_factor > 0.0 && self.grid.span_factor.is_finite()) {
            return Err(Error::domain("grid.span_factor", self.grid.span_factor, "must be positive"));
        }
        Ok(())
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }
}
