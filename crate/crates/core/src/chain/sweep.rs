//! Synthetic Planck-spectroscopy and coherent-power calibration sweeps.
//!
//! The reported `y` is the photon number reconstructed in the measurement
//! band in excess of the amplified vacuum of the signal ports, so that an
//! ideal chain gives `y = G (x + n_f)` with `n_f` the input-referred added
//! noise.

use std::io::{Read, Write};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::FrequencyGrid;
use super::state::{excess_photon_number, idler_background, run_chain, SpectralState};
use super::ChainConfig;
use crate::error::{Error, Result};
use crate::physics::{AmplifierParams, SignalKind, SignalSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepKind {
    Planck,
    Coherent,
}

impl SweepKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepKind::Planck => "planck",
            SweepKind::Coherent => "coherent",
        }
    }

    fn tag(&self) -> u64 {
        match self {
            SweepKind::Planck => 0x706c_616e_636b,
            SweepKind::Coherent => 0x636f_6865_7265,
        }
    }
}

impl std::str::FromStr for SweepKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "planck" => Ok(SweepKind::Planck),
            "coherent" => Ok(SweepKind::Coherent),
            other => Err(Error::InvalidInput(format!(
                "unknown sweep kind '{other}' (expected planck or coherent)"
            ))),
        }
    }
}

/// One calibration sweep.
///
/// `x` is the source temperature [K] for Planck sweeps and the input photon
/// number for coherent sweeps. `gain_label` is the narrowband gain the JPA
/// was tuned to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepDataset {
    pub kind: SweepKind,
    pub gain_label: f64,
    pub seed: u64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

/// Parameters that generated a sweep, in the parameterisation of the
/// matching fit: `(G_b, n_off)` for Planck and `(G_n, c)` for coherent
/// sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub gain: f64,
    pub offset: f64,
}

const HEADER: [&str; 5] = ["x", "y", "kind", "gain_linear", "seed"];

impl SweepDataset {
    pub fn new(kind: SweepKind, gain_label: f64, seed: u64, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let ds = Self {
            kind,
            gain_label,
            seed,
            x,
            y,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if self.x.len() != self.y.len() {
            return Err(Error::InvalidInput(format!(
                "x has {} entries but y has {}",
                self.x.len(),
                self.y.len()
            )));
        }
        if self.x.is_empty() {
            return Err(Error::InvalidInput("dataset is empty".into()));
        }
        if let Some(k) = self.x.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput(format!(
                "x must be strictly increasing (entry {} is {} after {})",
                k + 1,
                self.x[k + 1],
                self.x[k]
            )));
        }
        if self.x.iter().chain(&self.y).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("dataset contains non-finite values".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(HEADER)?;
        let kind = self.kind.as_str();
        let gain = self.gain_label.to_string();
        let seed = self.seed.to_string();
        for (x, y) in self.x.iter().zip(&self.y) {
            w.write_record([x.to_string().as_str(), &y.to_string(), kind, &gain, &seed])?;
        }
        w.flush()
    }

    /// Parses the CSV layout written by [`SweepDataset::write_csv`]. Errors
    /// name the offending row.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
        let header = r.headers().map_err(|e| Error::Dataset {
            row: 1,
            message: e.to_string(),
        })?;
        if header.iter().collect::<Vec<_>>() != HEADER {
            return Err(Error::Dataset {
                row: 1,
                message: format!(
                    "expected header {}, found {}",
                    HEADER.join(","),
                    header.iter().collect::<Vec<_>>().join(",")
                ),
            });
        }
        let mut meta: Option<(SweepKind, f64, u64)> = None;
        let (mut x, mut y) = (Vec::new(), Vec::new());
        for (i, rec) in r.records().enumerate() {
            let row = i + 2;
            let bad = |message: String| Error::Dataset { row, message };
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            let num = |k: usize| -> Result<f64> {
                let v: f64 = rec[k]
                    .trim()
                    .parse()
                    .map_err(|_| bad(format!("column {} is not a number: '{}'", HEADER[k], &rec[k])))?;
                if !v.is_finite() {
                    return Err(bad(format!("column {} is not finite", HEADER[k])));
                }
                Ok(v)
            };
            let xv = num(0)?;
            let yv = num(1)?;
            let kind: SweepKind = rec[2].trim().parse().map_err(|e: Error| bad(e.to_string()))?;
            let gain = num(3)?;
            let seed: u64 = rec[4]
                .trim()
                .parse()
                .map_err(|_| bad(format!("column seed is not an unsigned integer: '{}'", &rec[4])))?;
            match meta {
                None => meta = Some((kind, gain, seed)),
                Some(m) if m != (kind, gain, seed) => {
                    return Err(bad("kind, gain_linear and seed must be constant across rows".into()));
                }
                Some(_) => {}
            }
            if let Some(&prev) = x.last() {
                if !(xv > prev) {
                    return Err(bad(format!("x = {xv} does not increase (previous {prev})")));
                }
            }
            x.push(xv);
            y.push(yv);
        }
        let (kind, gain_label, seed) = meta.ok_or(Error::Dataset {
            row: 2,
            message: "dataset has no rows".into(),
        })?;
        Self::new(kind, gain_label, seed, x, y)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Multiplicative scatter `y (1 + rel z)` with `z` drawn from a stream
/// derived from (seed, kind, gain, point index), so that points can be
/// generated in any order.
fn scatter(cfg: &ChainConfig, kind: SweepKind, g_n: f64, idx: usize, y: f64) -> f64 {
    if cfg.meas_noise_rel == 0.0 {
        return y;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(splitmix64(splitmix64(kind.tag() ^ g_n.to_bits()) ^ idx as u64));
    let z: f64 = StandardNormal.sample(&mut rng);
    y * (1.0 + cfg.meas_noise_rel * z)
}

fn tuned(cfg: &ChainConfig, g_n: f64) -> Result<AmplifierParams> {
    cfg.validate()?;
    cfg.amp.with_signal_gain(g_n)
}

fn planck_grid(cfg: &ChainConfig, amp: &AmplifierParams) -> Result<Arc<FrequencyGrid>> {
    Ok(Arc::new(cfg.grid.build(amp, &[])?))
}

/// The tone occupies the single cell `[delta - h/2, delta + h/2]`.
fn coherent_grid(cfg: &ChainConfig, amp: &AmplifierParams) -> Result<Arc<FrequencyGrid>> {
    let h = cfg.grid.spacing_for(amp);
    let d = amp.delta();
    Ok(Arc::new(cfg.grid.build(amp, &[d - 0.5 * h, d + 0.5 * h])?))
}

/// Broadband thermal input at each temperature in `temps` [K] through the
/// JPA tuned to narrowband gain `g_n`.
pub fn simulate_planck_sweep(cfg: &ChainConfig, temps: &[f64], g_n: f64) -> Result<SweepDataset> {
    if temps.is_empty() {
        return Err(Error::InvalidInput("temperature list is empty".into()));
    }
    if temps.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
        return Err(Error::InvalidInput("temperatures must be positive".into()));
    }
    if temps.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput("temperatures must be strictly ascending".into()));
    }
    let amp = tuned(cfg, g_n)?;
    let grid = planck_grid(cfg, &amp)?;
    let y = temps
        .par_iter()
        .enumerate()
        .map(|(i, &t)| {
            let input = SpectralState::thermal(Arc::clone(&grid), amp.omega_signal(), t)?;
            let out = run_chain(&input, &amp, &cfg.noise)?;
            let y = excess_photon_number(&out, &amp)?;
            Ok(scatter(cfg, SweepKind::Planck, g_n, i, y))
        })
        .collect::<Result<Vec<_>>>()?;
    SweepDataset::new(SweepKind::Planck, g_n, cfg.seed, temps.to_vec(), y)
}

fn coherent_input(cfg: &ChainConfig, amp: &AmplifierParams, grid: &Arc<FrequencyGrid>, n_in: f64) -> Result<SpectralState> {
    let spec = SignalSpec::new(SignalKind::Coherent { n_in }, amp.omega_signal(), 0.0)?;
    SpectralState::with_signal(Arc::clone(grid), &spec, idler_background(&cfg.noise))
}

/// Coherent tone at the signal frequency with `n_in` photons for each entry
/// of `n_in_list`, all other modes at the idler occupation.
pub fn simulate_coherent_sweep(cfg: &ChainConfig, n_in_list: &[f64], g_n: f64) -> Result<SweepDataset> {
    if n_in_list.is_empty() {
        return Err(Error::InvalidInput("input photon list is empty".into()));
    }
    if n_in_list.iter().any(|&n| !(n >= 0.0 && n.is_finite())) {
        return Err(Error::InvalidInput("input photon numbers must be non-negative".into()));
    }
    if n_in_list.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput("input photon numbers must be strictly ascending".into()));
    }
    let amp = tuned(cfg, g_n)?;
    let grid = coherent_grid(cfg, &amp)?;
    let y = n_in_list
        .par_iter()
        .enumerate()
        .map(|(i, &n_in)| {
            let input = coherent_input(cfg, &amp, &grid, n_in)?;
            let out = run_chain(&input, &amp, &cfg.noise)?;
            let y = excess_photon_number(&out, &amp)?;
            Ok(scatter(cfg, SweepKind::Coherent, g_n, i, y))
        })
        .collect::<Result<Vec<_>>>()?;
    SweepDataset::new(SweepKind::Coherent, g_n, cfg.seed, n_in_list.to_vec(), y)
}

/// Band-averaged broadband gain and input-referred offset noise that
/// [`simulate_planck_sweep`] generates at narrowband gain `g_n`.
pub fn planck_response(cfg: &ChainConfig, g_n: f64) -> Result<Response> {
    let amp = tuned(cfg, g_n)?;
    let grid = planck_grid(cfg, &amp)?;
    let n = grid.len();
    let dark = SpectralState::new(Arc::clone(&grid), vec![0.0; n], vec![0.0; n], vec![true; n])?;
    let out = run_chain(&dark, &amp, &cfg.noise)?;
    let (lo, hi) = (amp.delta() - amp.b_meas(), amp.delta() + amp.b_meas());
    let gain = grid.band_average(&out.reference_gain, lo, hi)?;
    let y0 = excess_photon_number(&out, &amp)?;
    Ok(Response { gain, offset: y0 / gain })
}

/// Slope and intercept that [`simulate_coherent_sweep`] generates at
/// narrowband gain `g_n`.
pub fn coherent_response(cfg: &ChainConfig, g_n: f64) -> Result<Response> {
    let amp = tuned(cfg, g_n)?;
    let grid = coherent_grid(cfg, &amp)?;
    let out = run_chain(&coherent_input(cfg, &amp, &grid, 0.0)?, &amp, &cfg.noise)?;
    Ok(Response {
        gain: amp.signal_gain(),
        offset: excess_photon_number(&out, &amp)?,
    })
}
