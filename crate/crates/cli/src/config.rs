//! Run configuration: one JSON document with an amplifier, signal, noise,
//! sweep, limit and output block. Every key is optional and unknown keys
//! are rejected. Quantities accept either a bare number in base units (Hz,
//! K, linear gain) or a string with a unit suffix such as `"300 kHz"`,
//! `"40 mK"` or `"20 dB"`.

use std::fmt;
use std::path::{Path, PathBuf};

use jpa_core::chain::{ChainConfig, GridSpec};
use jpa_core::fit::Weighting;
use jpa_core::physics::{db_to_linear, reference, PumpNoise, VACUUM_IDLER};
use jpa_core::pipeline::{default_gains_db, default_input_photons, default_temperatures, PipelineConfig};
use jpa_core::{AmplifierParams, NoiseBudget, SignalKind, SignalSpec};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Deserialize)]
#[serde(untagged)]
enum RawQuantity {
    Number(f64),
    Text(String),
}

/// Splits `"5.435 GHz"` into the number and its unit.
fn split_unit(s: &str) -> (&str, &str) {
    let s = s.trim();
    let at = s
        .char_indices()
        .find(|&(i, c)| c.is_ascii_alphabetic() && !is_exponent(s, i))
        .map_or(s.len(), |(i, _)| i);
    (s[..at].trim(), s[at..].trim())
}

// An 'e' or 'E' followed by a digit or sign continues the number.
fn is_exponent(s: &str, i: usize) -> bool {
    let b = s.as_bytes();
    matches!(b[i], b'e' | b'E')
        && i > 0
        && b[i - 1].is_ascii_digit()
        && b.get(i + 1).is_some_and(|c| c.is_ascii_digit() || *c == b'-' || *c == b'+')
}

fn parse_number(s: &str) -> Result<f64, String> {
    s.parse::<f64>().map_err(|_| format!("'{s}' is not a number"))
}

/// `mantissa * 10^exp` rounded once, so `"5.435 GHz"` is exactly `5.435e9`.
fn scaled(number: &str, exp: i32) -> Result<f64, String> {
    if exp == 0 {
        return parse_number(number);
    }
    if number.contains(['e', 'E']) {
        return Ok(parse_number(number)? * 10f64.powi(exp));
    }
    parse_number(number)?;
    parse_number(&format!("{number}e{exp}"))
}

fn finite(v: f64) -> Result<f64, String> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{v} is not finite"))
    }
}

macro_rules! quantity {
    ($(#[$doc:meta])* $name:ident, $parse:expr) => {
        $(#[$doc])*
        #[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
        #[serde(try_from = "RawQuantity", into = "f64")]
        pub struct $name(pub f64);

        impl TryFrom<RawQuantity> for $name {
            type Error = String;

            fn try_from(raw: RawQuantity) -> Result<Self, String> {
                let parse: fn(&str) -> Result<f64, String> = $parse;
                let v = match raw {
                    RawQuantity::Number(v) => v,
                    RawQuantity::Text(s) => parse(&s)?,
                };
                finite(v).map($name)
            }
        }

        impl From<$name> for f64 {
            fn from(q: $name) -> f64 {
                q.0
            }
        }

        impl std::str::FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, String> {
                Self::try_from(RawQuantity::Text(s.to_string()))
            }
        }
    };
}

quantity!(
    /// Frequency in Hz; accepts Hz, kHz, MHz and GHz.
    Hz,
    |s| {
        let (num, unit) = split_unit(s);
        let exp = match unit {
            "" | "Hz" => 0,
            "kHz" => 3,
            "MHz" => 6,
            "GHz" => 9,
            other => return Err(format!("unknown frequency unit '{other}' (expected Hz, kHz, MHz or GHz)")),
        };
        scaled(num, exp)
    }
);

quantity!(
    /// Temperature in K; accepts K and mK.
    Kelvin,
    |s| {
        let (num, unit) = split_unit(s);
        match unit {
            "" | "K" => scaled(num, 0),
            "mK" => scaled(num, -3),
            other => Err(format!("unknown temperature unit '{other}' (expected K or mK)")),
        }
    }
);

quantity!(
    /// Linear power gain; `"20 dB"` is converted, a bare number is linear.
    Gain,
    |s| {
        let (num, unit) = split_unit(s);
        match unit {
            "" => parse_number(num),
            "dB" => Ok(db_to_linear(parse_number(num)?)),
            other => Err(format!("unknown gain unit '{other}' (expected dB or none)")),
        }
    }
);

quantity!(
    /// Gain in dB; a bare number is already in dB.
    Decibel,
    |s| {
        let (num, unit) = split_unit(s);
        match unit {
            "" | "dB" => parse_number(num),
            other => Err(format!("unknown gain unit '{other}' (expected dB)")),
        }
    }
);

impl fmt::Display for Hz {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} Hz", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    #[default]
    Log,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AmplifierBlock {
    pub signal_frequency: Hz,
    /// Signal detuning from half the pump frequency.
    pub delta: Hz,
    /// Single-side reconstruction bandwidth.
    pub b_meas: Hz,
    /// Gain-bandwidth product.
    pub tau: Hz,
    /// Peak gain of the Lorentzian.
    pub max_gain: Gain,
    /// Narrowband gain used by `simulate`.
    pub signal_gain: Gain,
}

impl Default for AmplifierBlock {
    fn default() -> Self {
        Self {
            signal_frequency: Hz(reference::SIGNAL_FREQUENCY),
            delta: Hz(reference::DELTA),
            b_meas: Hz(reference::B_MEAS),
            tau: Hz(reference::TAU),
            max_gain: Gain(db_to_linear(reference::MAX_GAIN_DB)),
            signal_gain: Gain(db_to_linear(reference::SIGNAL_GAIN_DB)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignalKindName {
    #[default]
    Vacuum,
    Coherent,
    Thermal,
}

/// `n_in` belongs to a coherent signal and `temperature` to a thermal one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SignalBlock {
    pub kind: SignalKindName,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_in: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temperature: Option<Kelvin>,
    /// Single-side signal bandwidth; 0 is a monochromatic tone.
    pub b_s: Hz,
}

impl Default for SignalBlock {
    fn default() -> Self {
        Self {
            kind: SignalKindName::Vacuum,
            n_in: None,
            temperature: None,
            b_s: Hz(0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseBlock {
    pub n_hemt: f64,
    /// Carried for completeness; it cancels in input-referred quantities.
    pub hemt_gain: Gain,
    pub n_idler: f64,
    pub pump: PumpNoise,
}

impl Default for NoiseBlock {
    fn default() -> Self {
        Self {
            n_hemt: reference::N_HEMT,
            hemt_gain: Gain(db_to_linear(reference::HEMT_GAIN_DB)),
            n_idler: VACUUM_IDLER,
            pump: reference::PUMP,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridBlock {
    pub spacing: Option<Hz>,
    pub span_factor: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepBlock {
    pub seed: u64,
    pub meas_noise_rel: f64,
    pub temperatures: Vec<Kelvin>,
    pub input_photons: Vec<f64>,
    /// Narrowband gains of the pipeline.
    pub gains_db: Vec<Decibel>,
    pub weighting: Weighting,
    pub grid: GridBlock,
}

impl Default for SweepBlock {
    fn default() -> Self {
        Self {
            seed: 0,
            meas_noise_rel: 0.01,
            temperatures: default_temperatures().into_iter().map(Kelvin).collect(),
            input_photons: default_input_photons(),
            gains_db: default_gains_db().into_iter().map(Decibel).collect(),
            weighting: Weighting::Uniform,
            grid: GridBlock::default(),
        }
    }
}

/// Signal-bandwidth grid of `limit`. Missing ends default to `B / 100` and
/// `4 b2` of the widest curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LimitBlock {
    pub b_s_min: Option<Hz>,
    pub b_s_max: Option<Hz>,
    pub points: usize,
    pub spacing: Spacing,
    /// One curve per detuning instead of the amplifier's.
    pub deltas: Vec<Hz>,
    /// One curve per reconstruction bandwidth instead of the amplifier's.
    pub b_meas: Vec<Hz>,
    pub oracle: bool,
}

impl Default for LimitBlock {
    fn default() -> Self {
        Self {
            b_s_min: None,
            b_s_max: None,
            points: 200,
            spacing: Spacing::Log,
            deltas: Vec::new(),
            b_meas: Vec::new(),
            oracle: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputBlock {
    pub dir: PathBuf,
    pub format: Format,
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            format: Format::Csv,
        }
    }
}

/// Written into sidecars only; ignored when a sidecar is read back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunInfo {
    pub command: String,
    pub version: String,
    pub unix_time: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub amplifier: AmplifierBlock,
    pub signal: SignalBlock,
    pub noise: NoiseBlock,
    pub sweep: SweepBlock,
    pub limit: LimitBlock,
    pub output: OutputBlock,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub run: Option<RunInfo>,
}

impl RunConfig {
    pub fn from_json(text: &str, origin: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            // serde_json appends the line and column itself.
            CliError::Config(format!("{origin}: field '{path}': {}", e.into_inner()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text, &path.display().to_string())
    }

    fn validate(&self) -> Result<(), CliError> {
        let field = |name: &str, e: jpa_core::Error| CliError::Config(format!("{name}: {e}"));
        self.amplifier().map_err(|e| field("amplifier", e))?;
        self.noise_budget().validate().map_err(|e| field("noise", e))?;
        self.signal_spec().map_err(|e| field("signal", e))?;
        self.chain().map_err(|e| field("sweep", e))?;
        if self.amplifier.signal_gain.0 < 1.0 {
            return Err(CliError::Config("amplifier.signal_gain: must be at least 1 (0 dB)".into()));
        }
        if self.noise.hemt_gain.0 <= 0.0 {
            return Err(CliError::Config("noise.hemt_gain: must be positive".into()));
        }
        Ok(())
    }

    pub fn amplifier(&self) -> jpa_core::Result<AmplifierParams> {
        let a = &self.amplifier;
        AmplifierParams::from_gain_bandwidth(a.signal_frequency.0 - a.delta.0, a.max_gain.0, a.tau.0, a.delta.0, a.b_meas.0)
    }

    pub fn noise_budget(&self) -> NoiseBudget {
        NoiseBudget {
            n_hemt: self.noise.n_hemt,
            n_idler: self.noise.n_idler,
            pump: self.noise.pump,
        }
    }

    pub fn signal_spec(&self) -> jpa_core::Result<SignalSpec> {
        let sig = &self.signal;
        let invalid = |m: &str| jpa_core::Error::InvalidInput(m.to_string());
        let kind = match (sig.kind, sig.n_in, sig.temperature) {
            (SignalKindName::Vacuum, None, None) => SignalKind::Vacuum,
            (SignalKindName::Coherent, n_in, None) => SignalKind::Coherent {
                n_in: n_in.unwrap_or(0.0),
            },
            (SignalKindName::Thermal, None, Some(t)) => SignalKind::Thermal { temperature: t.0 },
            (SignalKindName::Thermal, None, None) => return Err(invalid("a thermal signal needs a temperature")),
            (_, Some(_), _) => return Err(invalid("n_in is only allowed for a coherent signal")),
            (_, _, Some(_)) => return Err(invalid("temperature is only allowed for a thermal signal")),
        };
        SignalSpec::new(kind, self.amplifier.signal_frequency.0, self.signal.b_s.0)
    }

    pub fn chain(&self) -> jpa_core::Result<ChainConfig> {
        let grid = self.sweep.grid;
        let mut cfg = ChainConfig::new(
            self.amplifier()?,
            self.noise_budget(),
            self.sweep.seed,
            self.sweep.meas_noise_rel,
        )?;
        cfg.grid = GridSpec {
            spacing: grid.spacing.map(|h| h.0),
            span_factor: grid.span_factor.unwrap_or(GridSpec::default().span_factor),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn temperatures(&self) -> Vec<f64> {
        self.sweep.temperatures.iter().map(|t| t.0).collect()
    }

    pub fn pipeline(&self) -> jpa_core::Result<PipelineConfig> {
        Ok(PipelineConfig {
            chain: self.chain()?,
            gains_db: self.sweep.gains_db.iter().map(|g| g.0).collect(),
            temperatures: self.temperatures(),
            input_photons: self.sweep.input_photons.clone(),
            weighting: self.sweep.weighting,
        })
    }
}
