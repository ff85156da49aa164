//! TopK sparsification, rate accounting, budget solving, and the end-to-end
//! M22 compressor.
//!
//! The client-side pipeline:
//!
//! ```text
//!   grad --topk(K)--> kept values --normalize--> fit shape --> table lookup
//!                                                                  |
//!   CompressedUpdate { indices, mean, std, shape token, codes } <--+
//! ```
//!
//! Rate accounting follows the analytic form `log2 C(d,K) + K*b` bits: the
//! index set of a K-subset costs log2 C(d,K) information bits and each kept
//! entry costs b bits. The wire codec ([`wire`]) realizes the index term to
//! its ceiling with an enumerative code; analytic numbers are what budget
//! checks use, wire numbers include the byte padding.

pub mod wire;

use serde::{Deserialize, Serialize};

use crate::distributions::{self, Family, MIN_FIT_SAMPLES};
use crate::math;
use crate::quantizer::{self, CodebookTable};
use crate::{Error, Result};

pub use wire::{decode, encode};

// --- domain types -----------------------------------------------------------

/// The K largest-magnitude entries of a gradient, with their positions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseGradient {
    /// Source dimension d.
    pub dim: u32,
    /// Strictly increasing positions of the kept entries.
    pub indices: Vec<u32>,
    /// Kept values, aligned with `indices`.
    pub values: Vec<f64>,
}

impl SparseGradient {
    pub fn k(&self) -> usize {
        self.indices.len()
    }

    /// Scatter back to a dense vector with zeros off the support.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim as usize];
        for (&i, &v) in self.indices.iter().zip(&self.values) {
            out[i as usize] = v;
        }
        out
    }
}

/// An uplink bit budget: the total allowance and the per-entry rate that
/// together determine the sparsity level.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateBudget {
    /// Model dimension d.
    pub dim: u32,
    /// Total budget in bits (d * R for a per-dimension budget R).
    pub total_bits: f64,
    /// Bits spent per kept entry (quantizer rate, minifloat width, or
    /// sketch cell rate, depending on the scheme).
    pub per_entry_bits: f64,
}

impl RateBudget {
    /// Budget expressed as R bits per model dimension.
    pub fn per_dim(dim: u32, bits_per_dim: f64, per_entry_bits: f64) -> Self {
        Self { dim, total_bits: bits_per_dim * dim as f64, per_entry_bits }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.total_bits >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "total_bits",
                value: self.total_bits,
                reason: "budget must be >= 0",
            });
        }
        if !(self.per_entry_bits > 0.0) {
            return Err(Error::InvalidParameter {
                name: "per_entry_bits",
                value: self.per_entry_bits,
                reason: "per-entry rate must be > 0",
            });
        }
        Ok(())
    }

    /// Largest K whose analytic cost fits the budget.
    pub fn solve_k(&self) -> u32 {
        solve_k(self.dim, self.total_bits, self.per_entry_bits)
    }
}

/// Wire scheme tags. TINYSCRIPT is not a separate tag: it is the
/// M22/DWeibull pipeline at M = 0 and produces bit-identical frames.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SchemeTag {
    M22GenNorm,
    M22DWeibull,
    TopkUniform,
    TopkFp,
    CountSketch,
}

impl SchemeTag {
    pub fn byte(self) -> u8 {
        match self {
            SchemeTag::M22GenNorm => 1,
            SchemeTag::M22DWeibull => 2,
            SchemeTag::TopkUniform => 3,
            SchemeTag::TopkFp => 4,
            SchemeTag::CountSketch => 5,
        }
    }

    pub fn from_byte(b: u8) -> Result<Self> {
        Ok(match b {
            1 => SchemeTag::M22GenNorm,
            2 => SchemeTag::M22DWeibull,
            3 => SchemeTag::TopkUniform,
            4 => SchemeTag::TopkFp,
            5 => SchemeTag::CountSketch,
            other => return Err(Error::UnknownScheme(format!("wire tag {other}"))),
        })
    }
}

/// Scheme-specific body of a compressed update.
#[derive(Clone, Debug, PartialEq)]
pub enum Payload {
    /// TopK schemes: the support set and one code per kept entry. Codes are
    /// empty when the frame is a single-value fallback (std == 0).
    Quantized { indices: Vec<u32>, codes: Vec<u32> },
    /// Count sketch: the raw cell matrix plus the operator recipe.
    Sketch { width: u32, rows: u8, seed: u64, cells: Vec<f32> },
}

/// A wire-ready compressed gradient. Decodable with no side information
/// beyond a shared [`CodebookTable`] (for M22 schemes) and the seed embedded
/// in sketch payloads.
///
/// Field use varies by scheme: M22 carries (mean, std) of the kept values
/// and the fitted shape's grid token; topK+uniform reuses the (mean, std)
/// slots for the quantizer's (min, max) range; minifloat and sketch frames
/// leave them zero.
#[derive(Clone, Debug, PartialEq)]
pub struct CompressedUpdate {
    pub scheme: SchemeTag,
    pub dim: u32,
    /// Bits per kept entry (quantizer rate or minifloat width).
    pub rate: u8,
    /// Weight exponent the codebook was designed for.
    pub m: f32,
    /// Grid index of the fitted shape in the shared table.
    pub shape_token: u16,
    pub mean: f32,
    pub std: f32,
    pub payload: Payload,
}

impl CompressedUpdate {
    pub fn k(&self) -> usize {
        match &self.payload {
            Payload::Quantized { indices, .. } => indices.len(),
            Payload::Sketch { .. } => 0,
        }
    }
}

// --- topK ---------------------------------------------------------------------

/// Keep the K largest-magnitude entries; ties break toward the lower index.
/// Output indices are strictly increasing.
pub fn topk(grad: &[f64], k: usize) -> SparseGradient {
    assert!(k <= grad.len(), "topk: K={k} exceeds d={}", grad.len());
    debug_assert!(grad.iter().all(|v| v.is_finite()), "topk expects finite gradients");
    let dim = grad.len() as u32;
    let mut idx: Vec<u32> = (0..dim).collect();
    // "Better" = larger magnitude, then lower index; sort order is best-first.
    let better = |&a: &u32, &b: &u32| {
        grad[b as usize]
            .abs()
            .total_cmp(&grad[a as usize].abs())
            .then(a.cmp(&b))
    };
    if k > 0 && k < grad.len() {
        idx.select_nth_unstable_by(k - 1, better);
    }
    let mut kept: Vec<u32> = idx[..k].to_vec();
    kept.sort_unstable();
    let values = kept.iter().map(|&i| grad[i as usize]).collect();
    SparseGradient { dim, indices: kept, values }
}

// --- rate accounting --------------------------------------------------------------

/// Analytic bit cost of transmitting a K-subset of d positions plus b bits
/// per kept entry: log2 C(d,K) + K*b.
pub fn rate_cost(d: u32, k: u32, b: f64) -> f64 {
    assert!(k <= d, "rate_cost: K={k} exceeds d={d}");
    debug_assert!(b > 0.0);
    math::log2_binomial(d as u64, k as u64) + k as f64 * b
}

/// Largest K with rate_cost(d, K, b) <= budget, restricted to the prefix on
/// which the cost is non-decreasing in K.
///
/// The cost is not globally monotone: its increment b + log2((d-K)/(K+1))
/// eventually goes negative as K approaches d. The search is confined to the
/// monotone prefix so "largest K under budget" is well defined.
pub fn solve_k(d: u32, budget_bits: f64, b: f64) -> u32 {
    assert!(budget_bits >= 0.0 && b > 0.0, "solve_k: bad budget {budget_bits} or rate {b}");
    if d == 0 {
        return 0;
    }
    // Increment at k is >= 0 iff k <= (d - 2^-b) / (1 + 2^-b); refine the
    // float estimate with exact increment checks.
    let pow = (-b).exp2();
    let mut k_up = (((d as f64 - pow) / (1.0 + pow)).floor() as i64 + 1).clamp(0, d as i64) as u32;
    let incr_ok = |k: u32| k < d && b + ((d - k) as f64 / (k + 1) as f64).log2() >= 0.0;
    while k_up > 0 && !incr_ok(k_up - 1) {
        k_up -= 1;
    }
    while k_up < d && incr_ok(k_up) && k_up as i64 - 2 <= ((d as f64 - pow) / (1.0 + pow)) as i64 {
        k_up += 1;
    }

    if rate_cost(d, k_up, b) <= budget_bits {
        return k_up;
    }
    // Binary search the monotone prefix for the largest affordable K.
    let (mut lo, mut hi) = (0u32, k_up); // cost(lo) <= budget < cost(hi)
    if rate_cost(d, 0, b) > budget_bits {
        return 0;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if rate_cost(d, mid, b) <= budget_bits {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

// --- the M22 pipeline ------------------------------------------------------------

/// Outcome of quantizing one block of kept values.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantizedBlock {
    /// One cell code per value; empty for the single-value fallback.
    pub codes: Vec<u32>,
    /// Grid token of the fitted (or fallback) shape.
    pub shape_token: u16,
    pub mean: f64,
    /// 0 signals the fallback: every value reconstructs to `mean`.
    pub std: f64,
    /// Shape clamping or sub-minimum fit sizes fell back to the unit shape.
    pub used_fallback_shape: bool,
}

/// Normalize -> fit -> nearest-shape lookup -> quantize for one value block.
///
/// Blocks too small to fit (fewer than the fitting minimum) use the family's
/// unit shape (both families contain Laplace at shape 1); degenerate blocks
/// (zero variance, or fewer than two values) emit the single-value fallback.
pub fn quantize_values(
    values: &[f64],
    family: Family,
    m: f64,
    rate: u8,
    table: &CodebookTable,
) -> Result<QuantizedBlock> {
    let fallback = |mean: f64| QuantizedBlock {
        codes: Vec::new(),
        shape_token: 0,
        mean,
        std: 0.0,
        used_fallback_shape: false,
    };
    if values.is_empty() {
        return Ok(fallback(0.0));
    }
    if values.len() < 2 {
        return Ok(fallback(values[0]));
    }
    let (z, mean, std) = match distributions::normalize(values) {
        Ok(t) => t,
        Err(Error::DegenerateSample { .. }) => {
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            return Ok(fallback(mean));
        }
        Err(e) => return Err(e),
    };
    let (shape, small_block) = if z.len() >= MIN_FIT_SAMPLES {
        (distributions::fit(family, &z)?.shape, false)
    } else {
        (1.0, true)
    };
    let (shape_token, book) = table.lookup(shape, rate, m)?;
    let codes = quantizer::quantize(&z, book);
    Ok(QuantizedBlock { codes, shape_token, mean, std, used_fallback_shape: small_block })
}

/// Reconstruct the values behind a quantized block.
pub fn dequantize_values(
    codes: &[u32],
    k: usize,
    shape_token: u16,
    mean: f64,
    std: f64,
    rate: u8,
    m: f64,
    table: &CodebookTable,
) -> Result<Vec<f64>> {
    if std == 0.0 {
        if !codes.is_empty() {
            return Err(Error::MalformedPayload("fallback frame carries codes".into()));
        }
        return Ok(vec![mean; k]);
    }
    if codes.len() != k {
        return Err(Error::LengthMismatch { left: codes.len(), right: k });
    }
    let book = table.book_for_token(shape_token, rate, m)?;
    let z = quantizer::dequantize(codes, book)?;
    Ok(z.into_iter().map(|v| v * std + mean).collect())
}

fn scheme_for_family(family: Family) -> SchemeTag {
    match family {
        Family::GenNorm => SchemeTag::M22GenNorm,
        Family::DWeibull => SchemeTag::M22DWeibull,
    }
}

fn family_for_scheme(tag: SchemeTag) -> Option<Family> {
    match tag {
        SchemeTag::M22GenNorm => Some(Family::GenNorm),
        SchemeTag::M22DWeibull => Some(Family::DWeibull),
        _ => None,
    }
}

/// Compress a gradient with the M22 pipeline under a bit budget. The
/// sparsity K is solved from the budget; the emitted payload's analytic
/// rate never exceeds `budget.total_bits`.
pub fn compress_m22(
    grad: &[f64],
    budget: &RateBudget,
    m: f64,
    family: Family,
    table: &CodebookTable,
) -> Result<CompressedUpdate> {
    budget.validate()?;
    if grad.len() != budget.dim as usize {
        return Err(Error::DimensionMismatch { got: grad.len(), bound: budget.dim as usize });
    }
    compress_m22_with_k(grad, budget.solve_k(), budget.per_entry_bits.round() as u8, m, family, table)
}

/// M22 compression at an explicit sparsity level (the K-override path; no
/// budget guarantee is implied).
pub fn compress_m22_with_k(
    grad: &[f64],
    k: u32,
    rate: u8,
    m: f64,
    family: Family,
    table: &CodebookTable,
) -> Result<CompressedUpdate> {
    let sg = topk(grad, k as usize);
    let block = quantize_values(&sg.values, family, m, rate, table)?;
    Ok(CompressedUpdate {
        scheme: scheme_for_family(family),
        dim: sg.dim,
        rate,
        m: m as f32,
        shape_token: block.shape_token,
        mean: block.mean as f32,
        std: block.std as f32,
        payload: Payload::Quantized { indices: sg.indices, codes: block.codes },
    })
}

/// Invert [`compress_m22`]: a dense d-vector, zero off the kept support.
pub fn decompress_m22(upd: &CompressedUpdate, table: &CodebookTable) -> Result<Vec<f64>> {
    let family = family_for_scheme(upd.scheme)
        .ok_or_else(|| Error::UnknownScheme(format!("{:?} is not an M22 frame", upd.scheme)))?;
    if table.family != family {
        return Err(Error::TableMismatch {
            what: format!("{} table for a {} frame", table.family.name(), family.name()),
        });
    }
    let Payload::Quantized { indices, codes } = &upd.payload else {
        return Err(Error::MalformedPayload("M22 frame without a quantized payload".into()));
    };
    validate_support(indices, upd.dim)?;
    let vals = dequantize_values(
        codes,
        indices.len(),
        upd.shape_token,
        upd.mean as f64,
        upd.std as f64,
        upd.rate,
        upd.m as f64,
        table,
    )?;
    let mut dense = vec![0.0; upd.dim as usize];
    for (&i, v) in indices.iter().zip(vals) {
        dense[i as usize] = v;
    }
    Ok(dense)
}

/// Shared support-set sanity check used by every topK-style decompressor.
pub(crate) fn validate_support(indices: &[u32], dim: u32) -> Result<()> {
    for w in indices.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::MalformedPayload("support indices not strictly increasing".into()));
        }
    }
    if let Some(&last) = indices.last() {
        if last >= dim {
            return Err(Error::MalformedPayload(format!("support index {last} outside dim {dim}")));
        }
    }
    Ok(())
}

// --- tests --------------------------------------------------------------------------
