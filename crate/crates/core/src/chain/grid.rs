use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::AmplifierParams;

/// Cell-centred frequency grid, symmetric about the resonance `omega0`.
///
/// Offsets are stored relative to `omega0`. Each sample represents the cell
/// between consecutive edges; the sample is the cell midpoint, so the image
/// `2 omega0 - omega` of sample `k` is sample `len - 1 - k`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    omega0: f64,
    edges: Vec<f64>,
    centers: Vec<f64>,
}

/// How a chain simulation discretises frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Maximal cell width [Hz]; `None` means `B / 50`.
    #[serde(default)]
    pub spacing: Option<f64>,
    /// Half span of the grid in units of the gain-bandwidth product.
    #[serde(default = "GridSpec::default_span_factor")]
    pub span_factor: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            spacing: None,
            span_factor: Self::default_span_factor(),
        }
    }
}

impl GridSpec {
    fn default_span_factor() -> f64 {
        5.0
    }

    pub fn spacing_for(&self, amp: &AmplifierParams) -> f64 {
        self.spacing.unwrap_or(amp.b_meas() / 50.0)
    }

    /// Half span covering `span_factor * tau` and, at least, the measurement
    /// band together with a margin of a few cells.
    pub fn half_span_for(&self, amp: &AmplifierParams) -> f64 {
        let h = self.spacing_for(amp);
        (self.span_factor * amp.tau()).max(amp.delta() + amp.b_meas() + 4.0 * h)
    }

    /// Builds the grid for `amp`, with cell edges forced at the measurement
    /// band edges and at every offset in `breakpoints`.
    pub fn build(&self, amp: &AmplifierParams, breakpoints: &[f64]) -> Result<FrequencyGrid> {
        let mut cuts = vec![amp.delta() - amp.b_meas(), amp.delta() + amp.b_meas()];
        cuts.extend_from_slice(breakpoints);
        FrequencyGrid::symmetric(amp.omega0(), self.half_span_for(amp), self.spacing_for(amp), &cuts)
    }

    pub fn refined(&self, amp: &AmplifierParams, factor: f64) -> Self {
        Self {
            spacing: Some(self.spacing_for(amp) / factor),
            ..*self
        }
    }
}

impl FrequencyGrid {
    /// Uniform cells of width at most `spacing` on `[-half_span, half_span]`
    /// (offsets from `omega0`), with edges forced at `0`, at `±b` for every
    /// breakpoint offset `b` inside the span.
    pub fn symmetric(omega0: f64, half_span: f64, spacing: f64, breakpoints: &[f64]) -> Result<Self> {
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::domain("spacing", spacing, "must be positive"));
        }
        if !(half_span > 0.0 && half_span.is_finite()) {
            return Err(Error::domain("half_span", half_span, "must be positive"));
        }
        if half_span / spacing > 5.0e7 {
            return Err(Error::InvalidInput(format!(
                "grid of half span {half_span} Hz at spacing {spacing} Hz is too large"
            )));
        }
        let merge = 1e-9 * spacing;
        let mut forced: Vec<f64> = breakpoints
            .iter()
            .map(|b| b.abs())
            .filter(|&b| b > merge && b < half_span - merge)
            .collect();
        forced.push(0.0);
        forced.push(half_span);
        forced.sort_by(f64::total_cmp);
        forced.dedup_by(|a, b| (*a - *b).abs() <= merge);

        let mut positive = vec![0.0];
        for pair in forced.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let cells = ((b - a) / spacing - 1e-9).ceil().max(1.0) as usize;
            let width = (b - a) / cells as f64;
            for k in 1..cells {
                positive.push(a + width * k as f64);
            }
            positive.push(b);
        }

        let mut edges: Vec<f64> = positive[1..].iter().rev().map(|e| -e).collect();
        edges.extend_from_slice(&positive);
        let centers = edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        Ok(Self { omega0, edges, centers })
    }

    /// Grid from explicit absolute sample frequencies. Cell edges sit at the
    /// midpoints between samples; the outer cells are mirrored from their
    /// neighbours.
    pub fn from_samples(omega0: f64, samples: &[f64]) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InvalidInput("a grid needs at least two samples".into()));
        }
        if samples.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("grid samples must be strictly increasing".into()));
        }
        let offsets: Vec<f64> = samples.iter().map(|&f| f - omega0).collect();
        let n = offsets.len();
        let scale = offsets[n - 1].abs().max(offsets[0].abs());
        for k in 0..n {
            let mismatch = offsets[k] + offsets[n - 1 - k];
            if mismatch.abs() > 1e-9 * scale {
                return Err(Error::AsymmetricGrid(format!(
                    "sample {} Hz has no image at {} Hz",
                    samples[k],
                    2.0 * omega0 - samples[k]
                )));
            }
        }
        let mut edges = Vec::with_capacity(n + 1);
        edges.push(offsets[0] - 0.5 * (offsets[1] - offsets[0]));
        for w in offsets.windows(2) {
            edges.push(0.5 * (w[0] + w[1]));
        }
        edges.push(offsets[n - 1] + 0.5 * (offsets[n - 1] - offsets[n - 2]));
        Ok(Self {
            omega0,
            edges,
            centers: offsets,
        })
    }

    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// Sample offsets from `omega0`.
    pub fn offsets(&self) -> &[f64] {
        &self.centers
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    /// Absolute sample frequencies.
    pub fn frequencies(&self) -> Vec<f64> {
        self.centers.iter().map(|x| self.omega0 + x).collect()
    }

    pub fn width(&self, k: usize) -> f64 {
        self.edges[k + 1] - self.edges[k]
    }

    pub fn image(&self, k: usize) -> usize {
        self.len() - 1 - k
    }

    pub fn extent(&self) -> (f64, f64) {
        (self.edges[0], self.edges[self.len()])
    }

    /// Index of the cell containing offset `x`.
    pub fn cell_of(&self, x: f64) -> Option<usize> {
        let (lo, hi) = self.extent();
        if x < lo || x > hi {
            return None;
        }
        let k = self.edges.partition_point(|&e| e <= x);
        Some(k.saturating_sub(1).min(self.len() - 1))
    }

    /// Cells overlapping the offset band `[lo, hi]` with their overlap
    /// lengths. A zero-width band selects the cell containing it with unit
    /// weight.
    pub fn band_weights(&self, lo: f64, hi: f64) -> Result<Vec<(usize, f64)>> {
        let (glo, ghi) = self.extent();
        let tol = 1e-9 * (ghi - glo);
        if lo < glo - tol || hi > ghi + tol || hi < lo {
            return Err(Error::BandOutsideGrid {
                lo: self.omega0 + lo,
                hi: self.omega0 + hi,
                grid_lo: self.omega0 + glo,
                grid_hi: self.omega0 + ghi,
            });
        }
        if hi == lo {
            let k = self.cell_of(lo).expect("inside the extent");
            return Ok(vec![(k, 1.0)]);
        }
        let first = self.edges.partition_point(|&e| e <= lo).saturating_sub(1);
        let mut out = Vec::new();
        for k in first..self.len() {
            let (a, b) = (self.edges[k], self.edges[k + 1]);
            if a >= hi {
                break;
            }
            let overlap = b.min(hi) - a.max(lo);
            if overlap > 0.0 {
                out.push((k, overlap));
            }
        }
        Ok(out)
    }

    /// Weighted average of `values` over the offset band `[lo, hi]`,
    /// treating each value as constant across its cell.
    pub fn band_average(&self, values: &[f64], lo: f64, hi: f64) -> Result<f64> {
        let weights = self.band_weights(lo, hi)?;
        let total: f64 = weights.iter().map(|(_, w)| w).sum();
        Ok(weights.iter().map(|&(k, w)| w * values[k]).sum::<f64>() / total)
    }

    /// Sum of `values` over cells whose centre lies in `[lo, hi]`; a
    /// zero-width band picks the containing cell.
    pub fn band_sum(&self, values: &[f64], lo: f64, hi: f64) -> Result<f64> {
        if hi == lo {
            let weights = self.band_weights(lo, hi)?;
            return Ok(values[weights[0].0]);
        }
        self.band_weights(lo, hi)?;
        Ok(self
            .centers
            .iter()
            .zip(values)
            .filter(|(&x, _)| x >= lo && x <= hi)
            .map(|(_, v)| v)
            .sum())
    }
}
