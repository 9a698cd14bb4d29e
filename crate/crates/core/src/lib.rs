//! Noise limits, chain simulation and calibration fitting for nondegenerate
//! Josephson parametric amplifiers (JPAs).
//!
//! The crate is organised bottom-up:
//!
//! - [`physics`]: elementary formulas (Lorentzian gain, quantum efficiency,
//!   standard-quantum-limit relations, Bose-Einstein occupation) and the
//!   parameter types shared by everything else.
//! - [`limit`]: the bandwidth-dependent quantum limit on added noise, as an
//!   arctangent closed form and as an independent adaptive quadrature.
//! - [`chain`]: per-mode variance propagation through the JPA and HEMT stages
//!   and generation of synthetic Planck / coherent calibration sweeps.
//! - [`fit`]: Levenberg-Marquardt and linear least squares plus the Planck,
//!   coherent and power-law efficiency fits.
//! - [`pipeline`]: the end-to-end efficiency-versus-gain analysis.
//!
//! All frequencies are ordinary frequencies in Hz; gains are linear except at
//! I/O boundaries.

// Domain checks are written as `!(x >= 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chain;
pub mod error;
pub mod fit;
pub mod limit;
pub mod physics;
pub mod pipeline;
pub mod quadrature;

pub use error::{Error, Result};
pub use physics::{AmplifierParams, NoiseBudget, PumpNoise, SignalKind, SignalSpec};
