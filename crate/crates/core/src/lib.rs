//! Gradient compression for bandwidth-limited distributed training.
//!
//! The centerpiece is M22, a non-uniform scalar quantizer whose codebook
//! minimizes an `|g|^M`-weighted squared error under a fitted two-parameter
//! gradient model (generalized normal or double-sided Weibull). Around it sit
//! the pieces needed to run end-to-end experiments under a hard uplink bit
//! budget:
//!
//! ```text
//!   gradient ──topk──► kept values ──normalize──► fit shape ──► table lookup
//!                │                                                  │
//!                └── index set ──enumerative code──►  wire  ◄── cell codes
//! ```
//!
//! * [`distributions`] — densities, sampling, and moment-ratio fitting for
//!   the two gradient models.
//! * [`quantizer`] — Lloyd-style codebook design against the weighted
//!   distortion, plus precomputed codebook tables.
//! * [`compression`] — topK sparsification, rate accounting, budget solving,
//!   the M22 compressor, and the bit-exact wire codec.
//! * [`baselines`] — uniform quantization, minifloat truncation, and count
//!   sketch with heavy-hitter recovery.
//! * [`fedsim`] — a deterministic federated-averaging simulator with
//!   pluggable compressors and per-bit accuracy reporting.
//!
//! Everything is deterministic given explicit seeds; no global RNG state.

pub mod baselines;
pub mod compression;
pub mod distributions;
mod error;
pub mod fedsim;
pub mod math;
pub mod quantizer;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
