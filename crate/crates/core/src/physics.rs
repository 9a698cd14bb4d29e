//! Elementary amplifier formulas and the parameter types shared by the other
//! modules.
//!
//! Frequencies are ordinary frequencies in Hz throughout. Every quantity that
//! enters the bandwidth-limited noise bound does so through a ratio to the
//! gain-bandwidth product, so no factor of 2π appears anywhere.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Planck constant [J s] (exact, SI 2019 / CODATA 2018).
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Boltzmann constant [J/K] (exact, SI 2019 / CODATA 2018).
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// Vacuum occupation of the idler used when none is specified.
pub const VACUUM_IDLER: f64 = 0.5;

/// `hf/k_BT` above which the Bose-Einstein factor is reported as exactly zero.
const PLANCK_UNDERFLOW: f64 = 708.0;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(gain: f64) -> f64 {
    10.0 * gain.log10()
}

/// Operating point of a JPA with a Lorentzian gain profile.
///
/// The signal sits at `omega0 + delta`, the pump at `2 omega0` and the idler
/// image at `omega0 - delta`. Reconstruction happens in the band
/// `[omega_s - b_meas, omega_s + b_meas]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawAmplifierParams", into = "RawAmplifierParams")]
pub struct AmplifierParams {
    omega0: f64,
    g0: f64,
    b_j: f64,
    delta: f64,
    b_meas: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAmplifierParams {
    omega0: f64,
    g0: f64,
    b_j: f64,
    delta: f64,
    b_meas: f64,
}

impl TryFrom<RawAmplifierParams> for AmplifierParams {
    type Error = Error;

    fn try_from(raw: RawAmplifierParams) -> Result<Self> {
        AmplifierParams::new(raw.omega0, raw.g0, raw.b_j, raw.delta, raw.b_meas)
    }
}

impl From<AmplifierParams> for RawAmplifierParams {
    fn from(p: AmplifierParams) -> Self {
        RawAmplifierParams {
            omega0: p.omega0,
            g0: p.g0,
            b_j: p.b_j,
            delta: p.delta,
            b_meas: p.b_meas,
        }
    }
}

impl AmplifierParams {
    pub fn new(omega0: f64, g0: f64, b_j: f64, delta: f64, b_meas: f64) -> Result<Self> {
        if !(omega0.is_finite() && omega0 > 0.0) {
            return Err(Error::domain("omega0", omega0, "must be positive"));
        }
        if !(g0.is_finite() && g0 > 0.0) {
            return Err(Error::domain("g0", g0, "must be positive"));
        }
        if !(b_j.is_finite() && b_j > 0.0) {
            return Err(Error::domain("b_j", b_j, "must be positive"));
        }
        if !(delta.is_finite() && delta >= 0.0) {
            return Err(Error::domain("delta", delta, "must be non-negative"));
        }
        if !(b_meas.is_finite() && b_meas > 0.0) {
            return Err(Error::domain("b_meas", b_meas, "must be positive"));
        }
        if delta >= omega0 {
            return Err(Error::domain("delta", delta, "must be below omega0"));
        }
        Ok(Self {
            omega0,
            g0,
            b_j,
            delta,
            b_meas,
        })
    }

    /// Builds the parameters from the gain-bandwidth product `tau = b_j sqrt(g0)`.
    pub fn from_gain_bandwidth(omega0: f64, g0: f64, tau: f64, delta: f64, b_meas: f64) -> Result<Self> {
        if !(g0.is_finite() && g0 > 0.0) {
            return Err(Error::domain("g0", g0, "must be positive"));
        }
        Self::new(omega0, g0, tau / g0.sqrt(), delta, b_meas)
    }

    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    pub fn g0(&self) -> f64 {
        self.g0
    }

    pub fn b_j(&self) -> f64 {
        self.b_j
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn b_meas(&self) -> f64 {
        self.b_meas
    }

    /// Gain-bandwidth product.
    pub fn tau(&self) -> f64 {
        self.b_j * self.g0.sqrt()
    }

    pub fn omega_signal(&self) -> f64 {
        self.omega0 + self.delta
    }

    pub fn omega_idler(&self) -> f64 {
        self.omega0 - self.delta
    }

    pub fn omega_pump(&self) -> f64 {
        2.0 * self.omega0
    }

    /// Power gain at a detuning `x = omega - omega0` from resonance.
    pub fn gain_at_offset(&self, x: f64) -> f64 {
        let bj2 = self.b_j * self.b_j;
        1.0 + self.g0 * bj2 / (bj2 + x * x)
    }

    /// Narrowband gain seen by a tone at the signal frequency.
    pub fn signal_gain(&self) -> f64 {
        self.gain_at_offset(self.delta)
    }

    /// Re-tunes the maximal gain so that the gain at the signal frequency
    /// equals `g_n`, keeping the gain-bandwidth product fixed.
    ///
    /// Fails when the requested gain is not reachable at this detuning, i.e.
    /// when `(g_n - 1) (delta/tau)^2 >= 1`.
    pub fn with_signal_gain(&self, g_n: f64) -> Result<Self> {
        if !(g_n.is_finite() && g_n > 1.0) {
            return Err(Error::domain("g_n", g_n, "must exceed unity"));
        }
        let tau = self.tau();
        let d = self.delta / tau;
        let denom = 1.0 - (g_n - 1.0) * d * d;
        if denom <= 0.0 {
            return Err(Error::domain(
                "g_n",
                g_n,
                "not reachable at this detuning and gain-bandwidth product",
            ));
        }
        let g0 = (g_n - 1.0) / denom;
        Self::from_gain_bandwidth(self.omega0, g0, tau, self.delta, self.b_meas)
    }

    pub fn with_delta(&self, delta: f64) -> Result<Self> {
        Self::new(self.omega0, self.g0, self.b_j, delta, self.b_meas)
    }

    pub fn with_b_meas(&self, b_meas: f64) -> Result<Self> {
        Self::new(self.omega0, self.g0, self.b_j, self.delta, b_meas)
    }
}

/// Lorentzian JPA power gain `1 + G0 bJ^2 / (bJ^2 + (omega - omega0)^2)`.
pub fn lorentzian_gain(p: &AmplifierParams, omega: f64) -> f64 {
    p.gain_at_offset(omega - p.omega0)
}

/// `eta = 1 / (1 + 2 n_f)`.
pub fn quantum_efficiency(n_f: f64) -> Result<f64> {
    if !(n_f >= 0.0) {
        return Err(Error::domain("n_f", n_f, "added noise must be non-negative"));
    }
    Ok(1.0 / (1.0 + 2.0 * n_f))
}

/// Inverse of [`quantum_efficiency`].
pub fn added_noise_for_efficiency(eta: f64) -> Result<f64> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::domain("eta", eta, "efficiency must lie in (0, 1]"));
    }
    Ok(0.5 * (1.0 / eta - 1.0))
}

fn check_gain(name: &'static str, g: f64) -> Result<()> {
    if !(g >= 1.0) {
        return Err(Error::domain(name, g, "gain must be at least unity"));
    }
    Ok(())
}

/// Idler noise referred to the input of a narrowband phase-preserving
/// amplifier: `n_i (G_n - 1) / G_n`. Infinite gain returns `n_i`.
pub fn sql_added_noise(g_n: f64, n_i: f64) -> Result<f64> {
    check_gain("g_n", g_n)?;
    if !(n_i >= 0.0) {
        return Err(Error::domain("n_i", n_i, "must be non-negative"));
    }
    if g_n.is_infinite() {
        return Ok(n_i);
    }
    Ok(n_i * (g_n - 1.0) / g_n)
}

/// Highest quantum efficiency of narrowband amplification, `G_n / (2 G_n - 1)`.
pub fn sql_efficiency_bound(g_n: f64) -> Result<f64> {
    check_gain("g_n", g_n)?;
    if g_n.is_infinite() {
        return Ok(0.5);
    }
    Ok(g_n / (2.0 * g_n - 1.0))
}

/// Total gain when the idler image also carries signal, `2 G_n - 1`.
pub fn broadband_gain(g_n: f64) -> Result<f64> {
    check_gain("g_n", g_n)?;
    Ok(2.0 * g_n - 1.0)
}

/// Bose-Einstein occupation `1 / (exp(hf / k_B T) - 1)` of a mode at `f` [Hz]
/// and temperature `t` [K].
pub fn planck_occupation(f: f64, t: f64) -> Result<f64> {
    if !(f > 0.0 && f.is_finite()) {
        return Err(Error::domain("f", f, "frequency must be positive"));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::domain("t", t, "temperature must be positive"));
    }
    let x = PLANCK * f / (BOLTZMANN * t);
    if x > PLANCK_UNDERFLOW {
        return Ok(0.0);
    }
    Ok(1.0 / x.exp_m1())
}

/// Threshold signal bandwidths `b1 = 2 delta - B` and `b2 = 2 delta + B`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandThresholds {
    /// Clamped to zero when `2 delta < B`.
    pub b1: f64,
    pub b2: f64,
    /// Set when `2 delta < B`: the idler image overlaps the measurement band
    /// even for a monochromatic signal.
    pub idler_inside_band: bool,
}

pub fn bandwidth_thresholds(p: &AmplifierParams) -> BandThresholds {
    let raw_b1 = 2.0 * p.delta - p.b_meas;
    BandThresholds {
        b1: raw_b1.max(0.0),
        b2: 2.0 * p.delta + p.b_meas,
        idler_inside_band: raw_b1 < 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum SignalKind {
    Vacuum,
    /// Mean displacement photon number of the tone (or band).
    Coherent {
        n_in: f64,
    },
    /// Temperature in K of a thermal source filling the signal band.
    Thermal {
        temperature: f64,
    },
}

/// Input signal centred at `center` with single-side bandwidth `b_s`.
///
/// `b_s = 0` is an ideal monochromatic tone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalSpec {
    pub kind: SignalKind,
    pub center: f64,
    pub b_s: f64,
}

impl SignalSpec {
    pub fn new(kind: SignalKind, center: f64, b_s: f64) -> Result<Self> {
        let spec = Self { kind, center, b_s };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.center > 0.0 && self.center.is_finite()) {
            return Err(Error::domain("center", self.center, "must be positive"));
        }
        if !(self.b_s >= 0.0) {
            return Err(Error::domain("b_s", self.b_s, "must be non-negative"));
        }
        match self.kind {
            SignalKind::Vacuum => {}
            SignalKind::Coherent { n_in } => {
                if !(n_in >= 0.0 && n_in.is_finite()) {
                    return Err(Error::domain("n_in", n_in, "must be non-negative"));
                }
            }
            SignalKind::Thermal { temperature } => {
                if !(temperature > 0.0 && temperature.is_finite()) {
                    return Err(Error::domain("temperature", temperature, "must be positive"));
                }
            }
        }
        Ok(())
    }
}

/// Pump-noise power law `n_J(G) = n_J' (G - 1)^epsilon`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PumpNoise {
    pub n_jprime: f64,
    pub epsilon: f64,
}

impl PumpNoise {
    pub const NONE: PumpNoise = PumpNoise {
        n_jprime: 0.0,
        epsilon: 0.0,
    };

    pub fn is_disabled(&self) -> bool {
        self.n_jprime == 0.0
    }
}

/// Noise sources of the amplification chain other than the idler vacuum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseBudget {
    /// HEMT added photons referred to the HEMT input.
    pub n_hemt: f64,
    /// Occupation of the idler port.
    pub n_idler: f64,
    pub pump: PumpNoise,
}

impl Default for NoiseBudget {
    fn default() -> Self {
        Self {
            n_hemt: 0.0,
            n_idler: VACUUM_IDLER,
            pump: PumpNoise::NONE,
        }
    }
}

impl NoiseBudget {
    pub fn ideal() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.n_hemt >= 0.0 && self.n_hemt.is_finite()) {
            return Err(Error::domain("n_hemt", self.n_hemt, "must be non-negative"));
        }
        if !(self.n_idler >= VACUUM_IDLER && self.n_idler.is_finite()) {
            return Err(Error::domain(
                "n_idler",
                self.n_idler,
                "must carry at least vacuum fluctuations (>= 0.5)",
            ));
        }
        if !(self.pump.n_jprime >= 0.0 && self.pump.n_jprime.is_finite()) {
            return Err(Error::domain("n_jprime", self.pump.n_jprime, "must be non-negative"));
        }
        if !self.pump.epsilon.is_finite() {
            return Err(Error::domain("epsilon", self.pump.epsilon, "must be finite"));
        }
        Ok(())
    }
}

/// Reference operating point: signal at 5.435 GHz, 300 kHz above
/// resonance, 200 kHz reconstruction bandwidth, 15 MHz gain-bandwidth
/// product and 30 dB maximal gain.
pub mod reference {
    use super::{AmplifierParams, NoiseBudget, PumpNoise, VACUUM_IDLER};

    pub const SIGNAL_FREQUENCY: f64 = 5.435e9;
    pub const DELTA: f64 = 300e3;
    pub const B_MEAS: f64 = 200e3;
    pub const TAU: f64 = 15e6;
    pub const MAX_GAIN_DB: f64 = 30.0;
    pub const SIGNAL_GAIN_DB: f64 = 20.0;
    pub const N_HEMT: f64 = 11.3;
    pub const HEMT_GAIN_DB: f64 = 41.0;
    pub const PUMP: PumpNoise = PumpNoise {
        n_jprime: 0.01,
        epsilon: 0.5,
    };

    pub fn amplifier() -> AmplifierParams {
        AmplifierParams::from_gain_bandwidth(SIGNAL_FREQUENCY - DELTA, super::db_to_linear(MAX_GAIN_DB), TAU, DELTA, B_MEAS)
            .expect("reference parameters are valid")
    }

    pub fn noise() -> NoiseBudget {
        NoiseBudget {
            n_hemt: N_HEMT,
            n_idler: VACUUM_IDLER,
            pump: PUMP,
        }
    }
}
