use std::sync::Arc;

use crate::chain::grid::FrequencyGrid;
use crate::error::{Error, Result};
use crate::physics::{planck_occupation, AmplifierParams, NoiseBudget, SignalKind, SignalSpec, VACUUM_IDLER};

use super::jpa_pump_noise;

/// Per-mode field statistics on a symmetric frequency grid.
///
/// `occupation` is the thermal/noise occupation of each mode (an intensive
/// quantity, averaged over a band); `coherent_power` is the displacement
/// photon number carried by each cell (extensive, summed over a band).
/// `signal` marks the input modes that belong to the signal; the idler
/// image of a signal mode is a signal port rather than a noise port.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralState {
    grid: Arc<FrequencyGrid>,
    occupation: Vec<f64>,
    coherent_power: Vec<f64>,
    signal: Vec<bool>,
}

impl SpectralState {
    pub fn new(grid: Arc<FrequencyGrid>, occupation: Vec<f64>, coherent_power: Vec<f64>, signal: Vec<bool>) -> Result<Self> {
        let n = grid.len();
        if occupation.len() != n || coherent_power.len() != n || signal.len() != n {
            return Err(Error::InvalidInput(format!("state vectors must match the grid length {n}")));
        }
        if occupation.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
            return Err(Error::InvalidInput("occupations must be non-negative".into()));
        }
        if coherent_power.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
            return Err(Error::InvalidInput("coherent power must be non-negative".into()));
        }
        Ok(Self {
            grid,
            occupation,
            coherent_power,
            signal,
        })
    }

    pub fn vacuum(grid: Arc<FrequencyGrid>) -> Self {
        let n = grid.len();
        Self {
            grid,
            occupation: vec![0.0; n],
            coherent_power: vec![0.0; n],
            signal: vec![false; n],
        }
    }

    /// Thermal radiation at temperature `t` in every mode of the grid, all
    /// of it counted as signal. The occupation is evaluated once at the
    /// source frequency `f`: the grid spans well under a part in 10^3 of
    /// the carrier, so the spectrum is flat across it.
    pub fn thermal(grid: Arc<FrequencyGrid>, f: f64, t: f64) -> Result<Self> {
        let n = grid.len();
        Ok(Self {
            grid,
            occupation: vec![planck_occupation(f, t)?; n],
            coherent_power: vec![0.0; n],
            signal: vec![true; n],
        })
    }

    /// Places `spec` on the grid over a background occupation.
    ///
    /// Cells whose centre lies in `[center - b_s, center + b_s]` form the
    /// signal band; `b_s = 0` selects the single cell containing `center`.
    /// A coherent signal of `n_in` photons is shared between the band cells
    /// in proportion to their width.
    pub fn with_signal(grid: Arc<FrequencyGrid>, spec: &SignalSpec, background: f64) -> Result<Self> {
        spec.validate()?;
        if !(background >= 0.0) {
            return Err(Error::domain("background", background, "must be non-negative"));
        }
        let c = spec.center - grid.omega0();
        let band: Vec<usize> = if spec.b_s == 0.0 {
            let k = grid
                .cell_of(c)
                .ok_or_else(|| Error::InvalidInput(format!("signal centre {} Hz outside the grid", spec.center)))?;
            vec![k]
        } else {
            grid.offsets()
                .iter()
                .enumerate()
                .filter(|(_, &x)| (x - c).abs() <= spec.b_s)
                .map(|(k, _)| k)
                .collect()
        };
        if band.is_empty() {
            return Err(Error::InvalidInput("signal band contains no grid cell".into()));
        }
        let n = grid.len();
        let mut occupation = vec![background; n];
        let mut coherent_power = vec![0.0; n];
        let mut signal = vec![false; n];
        let band_width: f64 = band.iter().map(|&k| grid.width(k)).sum();
        for &k in &band {
            signal[k] = true;
            match spec.kind {
                SignalKind::Vacuum => occupation[k] = 0.0,
                SignalKind::Thermal { temperature } => {
                    occupation[k] = planck_occupation(grid.omega0() + grid.offsets()[k], temperature)?;
                }
                SignalKind::Coherent { n_in } => {
                    occupation[k] = 0.0;
                    coherent_power[k] = n_in * grid.width(k) / band_width;
                }
            }
        }
        Ok(Self {
            grid,
            occupation,
            coherent_power,
            signal,
        })
    }

    pub fn grid(&self) -> &Arc<FrequencyGrid> {
        &self.grid
    }

    pub fn occupation(&self) -> &[f64] {
        &self.occupation
    }

    pub fn coherent_power(&self) -> &[f64] {
        &self.coherent_power
    }

    pub fn signal(&self) -> &[bool] {
        &self.signal
    }

    /// Symmetrised variance `n + 1/2` of every mode.
    pub fn variances(&self) -> Vec<f64> {
        self.occupation.iter().map(|n| n + 0.5).collect()
    }

    fn check_resonance(&self, amp: &AmplifierParams) -> Result<()> {
        let w0 = self.grid.omega0();
        if (w0 - amp.omega0()).abs() > 1e-12 * amp.omega0() {
            return Err(Error::AsymmetricGrid(format!(
                "grid is centred at {w0} Hz but the resonance is at {} Hz",
                amp.omega0()
            )));
        }
        Ok(())
    }

    /// Gain with which the signal reaches each output mode,
    /// `G(omega) + (G(omega) - 1)` when the idler image is a signal mode and
    /// `G(omega)` otherwise.
    pub fn reference_gain(&self, amp: &AmplifierParams) -> Result<Vec<f64>> {
        self.check_resonance(amp)?;
        let g = &self.grid;
        Ok((0..g.len())
            .map(|k| {
                let gain = amp.gain_at_offset(g.offsets()[k]);
                if self.signal[g.image(k)] {
                    2.0 * gain - 1.0
                } else {
                    gain
                }
            })
            .collect())
    }
}

/// Ideal two-mode squeezing stage.
///
/// Every output mode mixes its own input with the input at its image
/// `2 omega0 - omega`: `v_out = G v + (G - 1) v_image` for the variances
/// and likewise for the coherent power. The signal mask is carried over
/// unchanged as a record of the input.
pub fn propagate(state: &SpectralState, amp: &AmplifierParams) -> Result<SpectralState> {
    state.check_resonance(amp)?;
    let g = &state.grid;
    let n = g.len();
    let mut occupation = Vec::with_capacity(n);
    let mut coherent_power = Vec::with_capacity(n);
    for k in 0..n {
        let j = g.image(k);
        let gain = amp.gain_at_offset(g.offsets()[k]);
        let v = state.occupation[k] + 0.5;
        let v_image = state.occupation[j] + 0.5;
        let v_out = gain * v + (gain - 1.0) * v_image;
        occupation.push(v_out - 0.5);
        coherent_power.push(gain * state.coherent_power[k] + (gain - 1.0) * state.coherent_power[j]);
    }
    Ok(SpectralState {
        grid: Arc::clone(&state.grid),
        occupation,
        coherent_power,
        signal: state.signal.clone(),
    })
}

/// Output of the JPA + HEMT chain for one input state.
#[derive(Debug, Clone)]
pub struct ChainOutput {
    pub state: SpectralState,
    /// See [`SpectralState::reference_gain`].
    pub reference_gain: Vec<f64>,
}

/// Propagates `input` through the JPA, adds the pump noise
/// `G_ref n_J(G_ref)` at the JPA output and the HEMT occupation `n_H`.
pub fn run_chain(input: &SpectralState, amp: &AmplifierParams, noise: &NoiseBudget) -> Result<ChainOutput> {
    noise.validate()?;
    let mut state = propagate(input, amp)?;
    let reference_gain = input.reference_gain(amp)?;
    for (n, &g) in state.occupation.iter_mut().zip(&reference_gain) {
        let pump = if noise.pump.is_disabled() {
            0.0
        } else {
            g * jpa_pump_noise(g, noise)?
        };
        *n += pump + noise.n_hemt;
    }
    Ok(ChainOutput { state, reference_gain })
}

fn measurement_band(amp: &AmplifierParams) -> (f64, f64) {
    (amp.delta() - amp.b_meas(), amp.delta() + amp.b_meas())
}

/// Photon number in the measurement band `[omega_s - B, omega_s + B]`:
/// the band-averaged occupation plus the coherent power of the band cells.
/// A flat occupation `n` returns `n`; vacuum returns 0.
pub fn reconstruction_photon_number(state: &SpectralState, amp: &AmplifierParams) -> Result<f64> {
    state.check_resonance(amp)?;
    let (lo, hi) = measurement_band(amp);
    let g = &state.grid;
    Ok(g.band_average(&state.occupation, lo, hi)? + g.band_sum(&state.coherent_power, lo, hi)?)
}

/// Reconstructed photon number in excess of the amplified input vacuum,
/// `<n_out + 1/2 - G_ref/2>` over the measurement band plus coherent power.
///
/// For an ideal chain this is `G * (n_in + n_f)`, where `n_f` is the
/// added noise referred to the input.
pub fn excess_photon_number(out: &ChainOutput, amp: &AmplifierParams) -> Result<f64> {
    let occ = reconstruction_photon_number(&out.state, amp)?;
    let (lo, hi) = measurement_band(amp);
    let excess: Vec<f64> = out.reference_gain.iter().map(|g| 0.5 * (g - 1.0)).collect();
    Ok(occ - out.state.grid.band_average(&excess, lo, hi)?)
}

/// Input-referred added noise of the ideal JPA averaged over the offset
/// window `[lo, hi]` (zero width selects a single mode).
///
/// Per mode the output variance is compared with the part routed from
/// signal modes, `G v + (G - 1) v_image [image is signal]`, and the
/// difference is referred to the input with the reference gain.
pub fn window_added_noise(input: &SpectralState, amp: &AmplifierParams, lo: f64, hi: f64) -> Result<f64> {
    let out = propagate(input, amp)?;
    let g_ref = input.reference_gain(amp)?;
    let grid = &input.grid;
    let v_in = input.variances();
    let per_mode: Vec<f64> = (0..grid.len())
        .map(|k| {
            let j = grid.image(k);
            let gain = amp.gain_at_offset(grid.offsets()[k]);
            let routed = gain * v_in[k] + if input.signal[j] { (gain - 1.0) * v_in[j] } else { 0.0 };
            let v_out = out.occupation[k] + 0.5;
            super::added_noise_referred(v_out, routed / g_ref[k], g_ref[k], 0.0)
        })
        .collect();
    grid.band_average(&per_mode, lo, hi)
}

/// Background occupation of the noise ports implied by the idler occupation.
pub(crate) fn idler_background(noise: &NoiseBudget) -> f64 {
    (noise.n_idler - VACUUM_IDLER).max(0.0)
}
