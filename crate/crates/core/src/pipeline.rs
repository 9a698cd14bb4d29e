//! Efficiency-versus-gain analysis: for each JPA gain, simulate a Planck and
//! a coherent calibration sweep, fit them, convert the fits to quantum
//! efficiencies and finally fit the pump-noise power law to each mode.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{simulate_coherent_sweep, simulate_planck_sweep, ChainConfig, SweepDataset};
use crate::error::{Error, Result};
use crate::fit::{
    extract_efficiency, fit_coherent_weighted, fit_eta_curve, fit_planck_weighted, EfficiencyMode, EfficiencyPoint, FitResult,
    Weighting,
};
use crate::physics::{db_to_linear, linear_to_db, sql_efficiency_bound};

/// `n` values evenly spaced from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// `n` values evenly spaced in logarithm from `lo` to `hi` inclusive.
pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    linspace(lo.ln(), hi.ln(), n).into_iter().map(f64::exp).collect()
}

pub fn default_gains_db() -> Vec<f64> {
    linspace(3.0, 24.0, 8)
}

/// 15 source temperatures from 40 mK to 600 mK.
pub fn default_temperatures() -> Vec<f64> {
    linspace(0.04, 0.6, 15)
}

/// Ten coherent input powers spanning three decades.
pub fn default_input_photons() -> Vec<f64> {
    logspace(0.01, 10.0, 10)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub chain: ChainConfig,
    /// Narrowband gains the JPA is tuned to [dB].
    pub gains_db: Vec<f64>,
    /// Planck source temperatures [K].
    pub temperatures: Vec<f64>,
    /// Coherent input photon numbers.
    pub input_photons: Vec<f64>,
    /// Weighting of the calibration fits.
    #[serde(default)]
    pub weighting: Weighting,
}

impl PipelineConfig {
    pub fn new(chain: ChainConfig) -> Self {
        Self {
            chain,
            gains_db: default_gains_db(),
            temperatures: default_temperatures(),
            input_photons: default_input_photons(),
            weighting: Weighting::Uniform,
        }
    }
}

/// Everything produced at one gain setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainPoint {
    pub gain_db: f64,
    pub planck: SweepDataset,
    pub coherent: SweepDataset,
    pub planck_fit: FitResult,
    pub coherent_fit: FitResult,
    pub broadband: EfficiencyPoint,
    pub narrowband: EfficiencyPoint,
}

/// One row of the efficiency table; `gain_db` is the fitted gain of the
/// mode and `eta_sql` the narrowband bound at that gain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtaRow {
    pub gain_db: f64,
    pub mode: EfficiencyMode,
    pub eta: f64,
    pub sigma_eta: f64,
    pub eta_sql: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub max_broadband_eta: f64,
    pub max_broadband_sigma_eta: f64,
    pub max_broadband_gain_db: f64,
    /// Broadband points above the narrowband bound at their own gain.
    pub broadband_points_above_sql: usize,
    pub broadband_fit: Option<FitResult>,
    pub narrowband_fit: Option<FitResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOutput {
    pub points: Vec<GainPoint>,
    pub table: Vec<EtaRow>,
    pub summary: Summary,
}

impl PipelineOutput {
    pub fn rows(&self, mode: EfficiencyMode) -> impl Iterator<Item = &EtaRow> {
        self.table.iter().filter(move |r| r.mode == mode)
    }

    /// Writes `gain_db,mode,eta,sigma_eta,eta_sql`.
    pub fn write_table_csv<W: std::io::Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["gain_db", "mode", "eta", "sigma_eta", "eta_sql"])?;
        for r in &self.table {
            w.write_record([
                r.gain_db.to_string().as_str(),
                r.mode.as_str(),
                &r.eta.to_string(),
                &r.sigma_eta.to_string(),
                &r.eta_sql.to_string(),
            ])?;
        }
        w.flush()
    }
}

fn run_point(cfg: &PipelineConfig, gain_db: f64) -> Result<GainPoint> {
    let stage = |name: &str| format!("{name} at {gain_db} dB");
    let g_n = db_to_linear(gain_db);
    let chain = &cfg.chain;
    let planck = simulate_planck_sweep(chain, &cfg.temperatures, g_n).map_err(|e| e.in_stage(stage("planck sweep")))?;
    let coherent = simulate_coherent_sweep(chain, &cfg.input_photons, g_n).map_err(|e| e.in_stage(stage("coherent sweep")))?;
    let planck_fit = cfg
        .weighting
        .sigma(&planck.y)
        .and_then(|s| fit_planck_weighted(&planck, chain.amp.omega_signal(), s.as_deref()))
        .map_err(|e| e.in_stage(stage("planck fit")))?;
    let coherent_fit = cfg
        .weighting
        .sigma(&coherent.y)
        .and_then(|s| fit_coherent_weighted(&coherent, s.as_deref()))
        .map_err(|e| e.in_stage(stage("coherent fit")))?;
    let broadband =
        extract_efficiency(&planck_fit, EfficiencyMode::Broadband).map_err(|e| e.in_stage(stage("broadband efficiency")))?;
    let narrowband =
        extract_efficiency(&coherent_fit, EfficiencyMode::Narrowband).map_err(|e| e.in_stage(stage("narrowband efficiency")))?;
    Ok(GainPoint {
        gain_db,
        planck,
        coherent,
        planck_fit,
        coherent_fit,
        broadband,
        narrowband,
    })
}

fn row(p: &EfficiencyPoint) -> Result<EtaRow> {
    Ok(EtaRow {
        gain_db: linear_to_db(p.gain),
        mode: p.mode,
        eta: p.eta,
        sigma_eta: p.sigma_eta,
        eta_sql: sql_efficiency_bound(p.gain)?,
    })
}

/// Runs the full analysis. Gain points are processed concurrently; the
/// output is ordered as `cfg.gains_db`. The power-law fits need at least
/// three gain points and are omitted otherwise.
pub fn run(cfg: &PipelineConfig) -> Result<PipelineOutput> {
    cfg.chain.validate().map_err(|e| e.in_stage("config"))?;
    if cfg.gains_db.is_empty() {
        return Err(Error::InvalidInput("gain grid is empty".into()).in_stage("config"));
    }
    if let Some(&g) = cfg.gains_db.iter().find(|g| !(g.is_finite() && **g > 0.0)) {
        return Err(Error::domain("gain_db", g, "gain must exceed 0 dB").in_stage("config"));
    }
    let points = cfg
        .gains_db
        .par_iter()
        .map(|&g| run_point(cfg, g))
        .collect::<Result<Vec<_>>>()?;

    let mut table = Vec::with_capacity(2 * points.len());
    for p in &points {
        table.push(row(&p.broadband).map_err(|e| e.in_stage("table"))?);
        table.push(row(&p.narrowband).map_err(|e| e.in_stage("table"))?);
    }

    let n_hemt = cfg.chain.noise.n_hemt;
    let curve = |mode: EfficiencyMode| -> Result<Option<FitResult>> {
        if points.len() < 3 {
            return Ok(None);
        }
        let pts: Vec<EfficiencyPoint> = points
            .iter()
            .map(|p| match mode {
                EfficiencyMode::Broadband => p.broadband,
                EfficiencyMode::Narrowband => p.narrowband,
            })
            .collect();
        fit_eta_curve(&pts, n_hemt)
            .map(Some)
            .map_err(|e| e.in_stage(format!("{} efficiency fit", mode.as_str())))
    };
    let broadband_fit = curve(EfficiencyMode::Broadband)?;
    let narrowband_fit = curve(EfficiencyMode::Narrowband)?;

    let best = points
        .iter()
        .map(|p| p.broadband)
        .max_by(|a, b| a.eta.total_cmp(&b.eta))
        .expect("at least one gain point");
    let above = table
        .iter()
        .filter(|r| r.mode == EfficiencyMode::Broadband && r.eta > r.eta_sql)
        .count();
    Ok(PipelineOutput {
        points,
        table,
        summary: Summary {
            max_broadband_eta: best.eta,
            max_broadband_sigma_eta: best.sigma_eta,
            max_broadband_gain_db: linear_to_db(best.gain),
            broadband_points_above_sql: above,
            broadband_fit,
            narrowband_fit,
        },
    })
}
