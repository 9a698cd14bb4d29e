//! Bandwidth-dependent quantum limit on the noise added by a nondegenerate
//! parametric amplifier.
//!
//! The bound is the average, over the reconstructed part of the signal band,
//! of `(1 - 1[idler]) (1 - 1/G(omega)) / 2`: every measured mode whose idler
//! image is not itself part of the signal receives at least the vacuum
//! fluctuations of that image. The band is `[omega_s - w, omega_s + w]` with
//! `w = min(b_s, B)`.
//!
//! Two independent routes are provided:
//!
//! - [`nql_closed_form`] evaluates the arctangent form obtained for a
//!   Lorentzian gain with `G0 >> 1`, in the reduced variables
//!   `beta = B/tau`, `beta_s = b_s/tau` and `delta = Delta/tau`;
//! - [`nql_quadrature`] integrates the bound directly with
//!   [`crate::quadrature`] using the exact Lorentzian gain.
//!
//! The closed form drops `O(1/G0)` terms, so the two agree to that order.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::{bandwidth_thresholds, lorentzian_gain, quantum_efficiency, AmplifierParams, BandThresholds};
use crate::quadrature::{self, Estimate, QuadratureOptions};

/// Absolute tolerance of the quadrature route, in photons.
pub const QUADRATURE_TOLERANCE: f64 = 1e-9;

/// Smallest `G0` for which the closed form is considered accurate.
pub const HIGH_GAIN_THRESHOLD: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitQuery {
    pub params: AmplifierParams,
    pub b_s: f64,
}

impl LimitQuery {
    pub fn new(params: AmplifierParams, b_s: f64) -> Result<Self> {
        if !(b_s >= 0.0 && b_s.is_finite()) {
            return Err(Error::domain("b_s", b_s, "signal bandwidth must be non-negative"));
        }
        Ok(Self { params, b_s })
    }

    /// `B / tau`.
    pub fn beta(&self) -> f64 {
        self.params.b_meas() / self.params.tau()
    }

    /// `b_s / tau`.
    pub fn beta_s(&self) -> f64 {
        self.b_s / self.params.tau()
    }

    /// `Delta / tau`.
    pub fn delta_reduced(&self) -> f64 {
        self.params.delta() / self.params.tau()
    }

    /// Half-width of the integration window, `min(b_s, B)`.
    pub fn window(&self) -> f64 {
        self.b_s.min(self.params.b_meas())
    }

    pub fn thresholds(&self) -> BandThresholds {
        bandwidth_thresholds(&self.params)
    }

    pub fn regime(&self) -> Regime {
        let p = &self.params;
        let b1 = 2.0 * p.delta() - p.b_meas();
        let b2 = 2.0 * p.delta() + p.b_meas();
        if self.b_s >= b2 {
            Regime::Broadband
        } else if self.b_s < p.b_meas() {
            Regime::BelowB
        } else if self.b_s <= b1 {
            Regime::Narrowband
        } else {
            Regime::Transition
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    /// `b_s < B`: the window is the signal band itself.
    #[serde(rename = "below_B")]
    BelowB,
    /// `B <= b_s <= b1`: no idler image inside the measurement band.
    #[serde(rename = "narrowband")]
    Narrowband,
    /// `b1 < b_s < b2`: the signal partially covers the idler images.
    #[serde(rename = "transition")]
    Transition,
    /// `b_s >= b2`: every idler image is part of the signal.
    #[serde(rename = "broadband")]
    Broadband,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::BelowB => "below_B",
            Regime::Narrowband => "narrowband",
            Regime::Transition => "transition",
            Regime::Broadband => "broadband",
        }
    }
}

/// 1 when `omega` lies in the (closed) idler image band
/// `[2 omega0 - omega_s - b_s, 2 omega0 - omega_s + b_s]`, else 0.
pub fn idler_indicator(omega: f64, q: &LimitQuery) -> f64 {
    let p = &q.params;
    let center = 2.0 * p.omega0() - p.omega_signal();
    if omega >= center - q.b_s && omega <= center + q.b_s {
        1.0
    } else {
        0.0
    }
}

/// Quantum limit by direct quadrature of the bound integral.
///
/// `b_s = 0` returns the single-mode value at `omega_s`, the limit of the
/// window average as the window shrinks.
pub fn nql_quadrature(q: &LimitQuery) -> Result<f64> {
    nql_quadrature_with(
        q,
        &QuadratureOptions {
            abs_tol: QUADRATURE_TOLERANCE,
            rel_tol: 0.0,
            max_panels: 4096,
        },
    )
    .map(|e| e.value)
}

/// Like [`nql_quadrature`] with explicit options; `abs_tol` is in photons.
pub fn nql_quadrature_with(q: &LimitQuery, opts: &QuadratureOptions) -> Result<Estimate> {
    let p = &q.params;
    let omega_s = p.omega_signal();
    let integrand = |omega: f64| {
        let outside = 1.0 - idler_indicator(omega, q);
        0.5 * outside * (1.0 - 1.0 / lorentzian_gain(p, omega))
    };
    let w = q.window();
    if w == 0.0 {
        return Ok(Estimate {
            value: integrand(omega_s),
            error: 0.0,
            panels: 0,
        });
    }
    // Work in the offset u = omega - omega_s so the breakpoints are exact.
    let idler_center = -2.0 * p.delta();
    let cuts = [idler_center - q.b_s, idler_center + q.b_s];
    let scale = 2.0 * w;
    let inner = QuadratureOptions {
        abs_tol: opts.abs_tol * scale,
        ..*opts
    };
    let est = quadrature::integrate(|u| integrand(omega_s + u), -w, w, &cuts, &inner)?;
    Ok(Estimate {
        value: est.value / scale,
        error: est.error / scale,
        panels: est.panels,
    })
}

/// `atan(a) - atan(b)` for `a >= b`, given `num = a - b >= 0` and
/// `den = 1 + ab`. The two-argument form keeps the result in `[0, pi]` when
/// `den` changes sign.
fn arctan_span(num: f64, den: f64) -> f64 {
    num.atan2(den)
}

/// Quantum limit from the high-gain arctangent closed form.
pub fn nql_closed_form(q: &LimitQuery) -> f64 {
    let p = &q.params;
    let (b_s, b_meas, delta) = (q.b_s, p.b_meas(), p.delta());
    let b2 = 2.0 * delta + b_meas;
    let b1 = 2.0 * delta - b_meas;
    let (beta, beta_s, d) = (q.beta(), q.beta_s(), q.delta_reduced());

    if b_s >= b2 {
        return 0.0;
    }
    if b_s == 0.0 {
        return 0.5 / (1.0 + d * d);
    }
    if b_s <= b_meas {
        let span = if b_s <= delta {
            arctan_span(2.0 * beta_s, 1.0 + d * d - beta_s * beta_s)
        } else {
            // The idler image band reaches into the window once b_s > Delta.
            arctan_span(2.0 * d, 1.0 + beta_s * beta_s - d * d)
        };
        return span / (4.0 * beta_s);
    }
    let span = if b_s <= b1 {
        arctan_span(2.0 * beta, 1.0 + d * d - beta * beta)
    } else {
        arctan_span(2.0 * d + beta - beta_s, 1.0 + beta * beta_s + d * (beta_s - beta) - d * d)
    };
    span / (4.0 * beta)
}

/// Whether `G0` is large enough for [`nql_closed_form`] to be trusted.
pub fn closed_form_applicable(p: &AmplifierParams) -> bool {
    p.g0() >= HIGH_GAIN_THRESHOLD
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitCurve {
    pub params: AmplifierParams,
    pub thresholds: BandThresholds,
    pub closed_form_applicable: bool,
    pub b_s_grid: Vec<f64>,
    pub n_ql: Vec<f64>,
    pub eta_ql: Vec<f64>,
    pub regime: Vec<Regime>,
    /// Quadrature values, when requested.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub n_ql_oracle: Option<Vec<f64>>,
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("bandwidth grid is empty".into()));
    }
    if grid.iter().any(|&b| !(b > 0.0 && b.is_finite())) {
        return Err(Error::InvalidInput("bandwidth grid must be positive".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("bandwidth grid must be strictly increasing".into()));
    }
    Ok(())
}

/// Sweeps the signal bandwidth and evaluates the closed-form limit.
pub fn limit_curve(params: &AmplifierParams, grid: &[f64]) -> Result<LimitCurve> {
    check_grid(grid)?;
    let queries: Vec<LimitQuery> = grid.iter().map(|&b| LimitQuery::new(*params, b)).collect::<Result<_>>()?;
    let n_ql: Vec<f64> = queries.par_iter().map(nql_closed_form).collect();
    let eta_ql = n_ql.iter().map(|&n| quantum_efficiency(n)).collect::<Result<Vec<_>>>()?;
    Ok(LimitCurve {
        params: *params,
        thresholds: bandwidth_thresholds(params),
        closed_form_applicable: closed_form_applicable(params),
        b_s_grid: grid.to_vec(),
        regime: queries.iter().map(LimitQuery::regime).collect(),
        n_ql,
        eta_ql,
        n_ql_oracle: None,
    })
}

/// [`limit_curve`] plus the quadrature value at every grid point.
pub fn limit_curve_with_oracle(params: &AmplifierParams, grid: &[f64]) -> Result<LimitCurve> {
    let mut curve = limit_curve(params, grid)?;
    let oracle = grid
        .par_iter()
        .map(|&b| nql_quadrature(&LimitQuery::new(*params, b)?))
        .collect::<Result<Vec<_>>>()?;
    curve.n_ql_oracle = Some(oracle);
    Ok(curve)
}

impl LimitCurve {
    pub fn len(&self) -> usize {
        self.b_s_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.b_s_grid.is_empty()
    }

    /// Largest `|closed form - quadrature|` over the curve.
    pub fn max_oracle_deviation(&self) -> Option<f64> {
        self.n_ql_oracle
            .as_ref()
            .map(|o| o.iter().zip(&self.n_ql).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    }

    /// Writes `b_s_hz,n_ql,eta_ql,regime`, plus `n_ql_oracle` when present.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let oracle = self.n_ql_oracle.as_deref();
        if oracle.is_some() {
            writeln!(out, "b_s_hz,n_ql,eta_ql,regime,n_ql_oracle")?;
        } else {
            writeln!(out, "b_s_hz,n_ql,eta_ql,regime")?;
        }
        for k in 0..self.len() {
            write!(
                out,
                "{},{},{},{}",
                self.b_s_grid[k],
                self.n_ql[k],
                self.eta_ql[k],
                self.regime[k].as_str()
            )?;
            if let Some(o) = oracle {
                write!(out, ",{}", o[k])?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn narrow_band(delta: f64, b_meas: f64) -> AmplifierParams {
        AmplifierParams::from_gain_bandwidth(5.435e9, 1e6, 15e6, delta, b_meas).unwrap()
    }

    #[test]
    fn indicator_examples() {
        let p = narrow_band(37.5e3, 30e3);
        let q = LimitQuery::new(p, 30e3).unwrap();
        assert_eq!(idler_indicator(2.0 * p.omega0() - p.omega_signal(), &q), 1.0);
        // b_s < b1: signal and idler bands are disjoint.
        assert_eq!(idler_indicator(p.omega_signal(), &q), 0.0);
        // b_s >= 2 Delta: the signal frequency falls inside the idler band.
        let q = LimitQuery::new(p, 75e3).unwrap();
        assert_eq!(idler_indicator(p.omega_signal(), &q), 1.0);
        let q = LimitQuery::new(p, 74.999e3).unwrap();
        assert_eq!(idler_indicator(p.omega_signal(), &q), 0.0);
    }

    #[test]
    fn broadband_branch_is_exactly_zero() {
        let p = narrow_band(37.5e3, 30e3);
        for b in [105e3, 200e3, 1e6] {
            let q = LimitQuery::new(p, b).unwrap();
            assert_eq!(nql_closed_form(&q), 0.0);
            assert_eq!(nql_quadrature(&q).unwrap(), 0.0);
            assert_eq!(q.regime(), Regime::Broadband);
        }
    }

    #[test]
    fn narrow_tone_limit() {
        let p = narrow_band(37.5e3, 30e3);
        let d: f64 = 37.5e3 / 15e6;
        let expected = 0.5 / (1.0 + d * d);
        assert!((expected - 0.499_997).abs() < 1e-6);
        let q0 = LimitQuery::new(p, 0.0).unwrap();
        assert_eq!(nql_closed_form(&q0), expected);
        let q = LimitQuery::new(p, 1.0).unwrap();
        assert!((nql_quadrature(&q).unwrap() - expected).abs() < 1e-6);
        assert!((nql_closed_form(&q) - expected).abs() < 1e-12);
    }

    #[test]
    fn transition_point_matches_oracle() {
        let p = narrow_band(37.5e3, 30e3);
        let q = LimitQuery::new(p, 75e3).unwrap();
        assert_eq!(q.regime(), Regime::Transition);
        let quad = nql_quadrature(&q).unwrap();
        let closed = nql_closed_form(&q);
        assert!(((closed - quad) / quad).abs() < 1e-3, "{closed} vs {quad}");
        // Half of the window is covered by the idler images.
        assert!((quad - 0.25).abs() < 1e-3);
    }

    #[test]
    fn narrowband_branch_matches_oracle() {
        let p = narrow_band(300e3, 30e3);
        let q = LimitQuery::new(p, 100e3).unwrap();
        assert_eq!(q.regime(), Regime::Narrowband);
        let quad = nql_quadrature(&q).unwrap();
        let closed = nql_closed_form(&q);
        assert!(((closed - quad) / quad).abs() < 1e-3, "{closed} vs {quad}");
    }

    #[test]
    fn overlap_below_measurement_band() {
        // Delta < B: the idler image enters the window before b_s reaches B.
        let p = narrow_band(37.5e3, 60e3);
        for b in [20e3, 37.5e3, 45e3, 59e3] {
            let q = LimitQuery::new(p, b).unwrap();
            let quad = nql_quadrature(&q).unwrap();
            let closed = nql_closed_form(&q);
            assert!(((closed - quad) / quad.max(1e-6)).abs() < 1e-3, "b={b}: {closed} vs {quad}");
        }
    }

    #[test]
    fn degenerate_detuning() {
        let p = narrow_band(0.0, 30e3);
        assert!(p.delta() == 0.0);
        let q = LimitQuery::new(p, 10e3).unwrap();
        assert_eq!(nql_closed_form(&q), 0.0);
        assert_eq!(nql_quadrature(&q).unwrap(), 0.0);
    }

    #[test]
    fn single_point_curve_at_b2() {
        let p = narrow_band(37.5e3, 30e3);
        let c = limit_curve(&p, &[105e3]).unwrap();
        assert_eq!(c.eta_ql, vec![1.0]);
        assert_eq!(c.regime, vec![Regime::Broadband]);
    }

    #[test]
    fn curve_grid_validation() {
        let p = narrow_band(37.5e3, 30e3);
        assert!(limit_curve(&p, &[]).is_err());
        assert!(limit_curve(&p, &[2.0, 1.0]).is_err());
        assert!(limit_curve(&p, &[0.0, 1.0]).is_err());
    }

    #[test]
    fn csv_layout() {
        let p = narrow_band(37.5e3, 30e3);
        let c = limit_curve_with_oracle(&p, &[10e3, 200e3]).unwrap();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("b_s_hz,n_ql,eta_ql,regime,n_ql_oracle"));
        assert!(lines.next().unwrap().starts_with("10000,"));
        assert!(lines.next().unwrap().starts_with("200000,0,1,broadband,0"));
    }

    #[test]
    fn low_gain_flag() {
        let p = AmplifierParams::from_gain_bandwidth(5e9, 20.0, 15e6, 300e3, 200e3).unwrap();
        assert!(!closed_form_applicable(&p));
        assert!(!limit_curve(&p, &[1e3]).unwrap().closed_form_applicable);
    }
}
