//! Non-uniform scalar quantizer design for the magnitude-weighted squared
//! error, the core of M22.
//!
//! A codebook for rate R holds L = 2^R centers. Design runs Lloyd-style
//! alternation on the positive half-line only:
//!
//! ```text
//!   c(i) <- integral over cell of g^(M+1) pdf  /  integral of g^M pdf
//!   t(i) <- (c(i) + c(i+1)) / 2
//! ```
//!
//! and mirrors the L/2 half-line centers to the negative axis, which keeps
//! the codebook antisymmetric to the last bit. Midpoint thresholds remain
//! optimal under the |g|^M weight because the weight factors out of the
//! between-center comparison at any fixed g.
//!
//! Raising M drags centers toward larger magnitudes (the weight g^M tilts
//! every cell centroid outward), trading fidelity on small entries for
//! fidelity on the heavy hitters that dominate a gradient step.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{self, DistributionFit, Family};
use crate::{Error, Result};

// --- codebook -------------------------------------------------------------

/// A designed scalar quantizer: sorted centers with midpoint thresholds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Codebook {
    /// Strictly increasing reconstruction levels, length 2^rate.
    pub centers: Vec<f64>,
    /// Strictly increasing cell boundaries, length centers.len() - 1.
    pub thresholds: Vec<f64>,
    /// Weight exponent M >= 0 the book was designed for.
    pub m: f64,
    /// Bits per quantized entry.
    pub rate: u8,
}

impl Codebook {
    pub fn levels(&self) -> usize {
        self.centers.len()
    }

    /// Check the structural invariants: strict ordering, length coupling,
    /// and midpoint thresholds.
    pub fn validate(&self) -> Result<()> {
        let l = self.centers.len();
        if self.rate < 1 || l != 1usize << self.rate {
            return Err(Error::MalformedPayload(format!(
                "codebook holds {l} centers for rate {}",
                self.rate
            )));
        }
        if self.thresholds.len() != l - 1 {
            return Err(Error::LengthMismatch { left: self.thresholds.len(), right: l - 1 });
        }
        if !(self.m >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "m",
                value: self.m,
                reason: "weight exponent must be >= 0",
            });
        }
        let span = self.centers[l - 1] - self.centers[0];
        for i in 0..l - 1 {
            if self.centers[i + 1] <= self.centers[i] {
                return Err(Error::MalformedPayload(format!("centers not strictly increasing at {i}")));
            }
            let mid = 0.5 * (self.centers[i] + self.centers[i + 1]);
            if (self.thresholds[i] - mid).abs() > 1e-9 * span.max(1.0) {
                return Err(Error::MalformedPayload(format!("threshold {i} off the center midpoint")));
            }
        }
        Ok(())
    }
}

/// Mean |g|^M-weighted absolute deviation between a vector and its
/// reconstruction; with M = 0 this is plain mean absolute error (0^0 = 1).
pub fn weighted_distortion(g: &[f64], ghat: &[f64], m: f64) -> Result<f64> {
    if g.len() != ghat.len() {
        return Err(Error::LengthMismatch { left: g.len(), right: ghat.len() });
    }
    if g.is_empty() {
        return Err(Error::InsufficientSamples { got: 0, need: 1 });
    }
    let sum: f64 = g.iter().zip(ghat).map(|(a, b)| a.abs().powf(m) * (a - b).abs()).sum();
    Ok(sum / g.len() as f64)
}

/// Map each value to its cell index. A value sitting exactly on a threshold
/// goes to the upper cell.
pub fn quantize(values: &[f64], cb: &Codebook) -> Vec<u32> {
    values
        .iter()
        .map(|&x| cb.thresholds.partition_point(|&t| t <= x) as u32)
        .collect()
}

/// Map cell indices back to their centers.
pub fn dequantize(codes: &[u32], cb: &Codebook) -> Result<Vec<f64>> {
    let l = cb.centers.len();
    codes
        .iter()
        .map(|&c| {
            cb.centers.get(c as usize).copied().ok_or(Error::IndexOutOfRange { index: c, levels: l })
        })
        .collect()
}

// --- continuous design ------------------------------------------------------

/// Per-design diagnostics.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DesignTrace {
    /// Lloyd sweeps actually performed.
    pub sweeps: usize,
    /// Expected weighted squared distortion after initialization and after
    /// each sweep (populated only when tracking was requested).
    pub distortion_per_sweep: Vec<f64>,
    /// Cells whose weighted mass fell below the dead-cell floor and were
    /// re-seeded at their midpoint.
    pub reseeded_cells: usize,
    /// Max center movement on the final sweep.
    pub final_movement: f64,
}

/// Default stop tolerance on max center movement.
pub const DESIGN_TOL: f64 = 1e-7;
/// Default sweep limit.
pub const DESIGN_MAX_ITER: usize = 500;

const DEAD_CELL_MASS: f64 = 1e-14;
const TAIL_REL: f64 = 1e-12;

/// Design a codebook for `fit` (centered at 0) minimizing the expected
/// |g|^M-weighted squared error at 2^rate levels. See the module docs for
/// the update equations.
pub fn design_codebook(fit: &DistributionFit, rate: u8, m: f64, tol: f64, max_iter: usize) -> Result<Codebook> {
    design_codebook_traced(fit, rate, m, tol, max_iter, false).map(|(cb, _)| cb)
}

/// As [`design_codebook`], returning convergence diagnostics; set `track`
/// to record the distortion trajectory (costs one extra integral per cell
/// per sweep).
pub fn design_codebook_traced(
    fit: &DistributionFit,
    rate: u8,
    m: f64,
    tol: f64,
    max_iter: usize,
    track: bool,
) -> Result<(Codebook, DesignTrace)> {
    if !(1..=8).contains(&rate) {
        return Err(Error::InvalidParameter { name: "rate", value: rate as f64, reason: "must be in 1..=8" });
    }
    if !(0.0..=12.0).contains(&m) {
        return Err(Error::InvalidParameter { name: "m", value: m, reason: "must be in 0..=12" });
    }
    if fit.mu != 0.0 {
        return Err(Error::InvalidParameter {
            name: "mu",
            value: fit.mu,
            reason: "design requires a centered fit",
        });
    }

    let h = 1usize << (rate - 1);
    let cutoff = distributions::weighted_tail_cutoff(fit, m + 2.0, TAIL_REL);
    let half_mass_floor = DEAD_CELL_MASS * 0.5 * fit.abs_moment(m);

    // Equal-probability quantiles of |g| avoid empty cells at start.
    let mut centers: Vec<f64> = (0..h).map(|i| fit.abs_quantile((i as f64 + 0.5) / h as f64)).collect();
    for i in 0..h {
        // Heavy tails can put the top quantile beyond the integration cutoff.
        let cap = cutoff * (1.0 - 1e-6 * (h - i) as f64);
        if centers[i] > cap {
            centers[i] = cap;
        }
    }

    let mut trace = DesignTrace::default();
    if track {
        trace.distortion_per_sweep.push(half_distortion(fit, &centers, m, cutoff));
    }

    let mut movement = f64::INFINITY;
    for sweep in 1..=max_iter {
        trace.sweeps = sweep;
        let bounds = half_cell_bounds(&centers, cutoff);
        movement = 0.0;
        for i in 0..h {
            let (lo, hi) = bounds[i];
            let den = distributions::weighted_cell_integral(fit, lo, hi, &|g| g.powf(m));
            let new_c = if den <= half_mass_floor {
                trace.reseeded_cells += 1;
                0.5 * (lo + hi)
            } else {
                distributions::weighted_cell_integral(fit, lo, hi, &|g| g.powf(m + 1.0)) / den
            };
            movement = movement.max((new_c - centers[i]).abs());
            centers[i] = new_c;
        }
        // Centroids of disjoint ordered cells stay ordered; the clamp below
        // only guards against roundoff collapsing two near-equal centers.
        for i in 1..h {
            if centers[i] <= centers[i - 1] {
                centers[i] = centers[i - 1] + 1e-12 * (1.0 + centers[i - 1].abs());
            }
        }
        if track {
            trace.distortion_per_sweep.push(half_distortion(fit, &centers, m, cutoff));
        }
        if movement < tol {
            break;
        }
    }
    trace.final_movement = movement;
    if movement > 100.0 * tol {
        return Err(Error::NonConvergence { movement, tol, sweeps: trace.sweeps });
    }

    Ok((mirror(&centers, m, rate), trace))
}

/// Cell bounds on the half-line for a sorted center list: [0, t1), [t1, t2),
/// ..., [t_{h-1}, cutoff].
fn half_cell_bounds(centers: &[f64], cutoff: f64) -> Vec<(f64, f64)> {
    let h = centers.len();
    (0..h)
        .map(|i| {
            let lo = if i == 0 { 0.0 } else { 0.5 * (centers[i - 1] + centers[i]) };
            let hi = if i == h - 1 { cutoff } else { 0.5 * (centers[i] + centers[i + 1]) };
            (lo, hi)
        })
        .collect()
}

/// Full-line weighted squared distortion of a half-line center set with
/// midpoint thresholds (twice the half-line value, by symmetry).
fn half_distortion(fit: &DistributionFit, centers: &[f64], m: f64, cutoff: f64) -> f64 {
    half_cell_bounds(centers, cutoff)
        .iter()
        .zip(centers)
        .map(|(&(lo, hi), &c)| {
            2.0 * distributions::weighted_cell_integral(fit, lo, hi, &|g| g.powf(m) * (g - c) * (g - c))
        })
        .sum()
}

/// Mirror half-line centers into a full antisymmetric codebook. Negation is
/// exact in floating point, so the symmetry invariant holds to the bit.
fn mirror(half: &[f64], m: f64, rate: u8) -> Codebook {
    let h = half.len();
    let mut centers = Vec::with_capacity(2 * h);
    centers.extend(half.iter().rev().map(|c| -c));
    centers.extend_from_slice(half);
    let thresholds = (0..2 * h - 1).map(|i| 0.5 * (centers[i] + centers[i + 1])).collect();
    Codebook { centers, thresholds, m, rate }
}

/// Expected |g|^M-weighted squared error of an arbitrary codebook under a
/// centered fit. Handles non-symmetric codebooks (e.g. uniform grids over a
/// lopsided range) by splitting cells at zero and mirroring the negative
/// piece onto the half-line integrator.
pub fn expected_distortion(cb: &Codebook, fit: &DistributionFit) -> f64 {
    debug_assert!(fit.mu == 0.0);
    let cutoff = distributions::weighted_tail_cutoff(fit, cb.m + 2.0, TAIL_REL);
    let l = cb.centers.len();
    let m = cb.m;
    let mut total = 0.0;
    for i in 0..l {
        let lo = if i == 0 { -cutoff } else { cb.thresholds[i - 1].max(-cutoff) };
        let hi = if i == l - 1 { cutoff } else { cb.thresholds[i].min(cutoff) };
        if hi <= lo {
            continue;
        }
        let c = cb.centers[i];
        if lo < 0.0 {
            let (a, b) = ((-hi).max(0.0), -lo);
            if b > a {
                total += distributions::weighted_cell_integral(fit, a, b, &|g| {
                    g.powf(m) * (g + c) * (g + c)
                });
            }
        }
        if hi > 0.0 {
            let a = lo.max(0.0);
            total += distributions::weighted_cell_integral(fit, a, hi, &|g| {
                g.powf(m) * (g - c) * (g - c)
            });
        }
    }
    total
}

// --- discrete design ---------------------------------------------------------

/// Lloyd design for a discrete source given by support points and
/// probability weights, minimizing sum_j w_j |x_j|^M (x_j - c)^2. Runs
/// `starts` seeded random initializations and keeps the best fixed point;
/// returns (centers, thresholds, distortion).
///
/// Small instances only (test oracles, not the compression path): the
/// continuous designer above is the production route.
pub fn design_codebook_discrete(
    points: &[f64],
    weights: &[f64],
    m: f64,
    levels: usize,
    starts: usize,
    seed: u64,
) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;

    if points.len() != weights.len() {
        return Err(Error::LengthMismatch { left: points.len(), right: weights.len() });
    }
    if levels < 1 || levels > points.len() {
        return Err(Error::InvalidParameter {
            name: "levels",
            value: levels as f64,
            reason: "need 1 <= levels <= support size",
        });
    }
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| points[a].total_cmp(&points[b]));
    let xs: Vec<f64> = order.iter().map(|&i| points[i]).collect();
    let ws: Vec<f64> = order.iter().map(|&i| weights[i] * points[i].abs().powf(m)).collect();

    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
    let mut best: Option<(Vec<f64>, f64)> = None;
    for _ in 0..starts.max(1) {
        let mut picks: Vec<usize> = (0..xs.len()).collect();
        picks.shuffle(&mut rng);
        let mut centers: Vec<f64> = picks[..levels].iter().map(|&i| xs[i]).collect();
        centers.sort_by(f64::total_cmp);
        centers.dedup();
        if centers.len() < levels {
            continue;
        }

        for _ in 0..200 {
            // Assign by nearest center (midpoint rule), then re-center.
            let mut num = vec![0.0; levels];
            let mut den = vec![0.0; levels];
            for (&x, &w) in xs.iter().zip(&ws) {
                let cell = centers[..levels - 1]
                    .iter()
                    .zip(&centers[1..])
                    .map(|(a, b)| 0.5 * (a + b))
                    .take_while(|&t| t <= x)
                    .count();
                num[cell] += w * x;
                den[cell] += w;
            }
            let mut moved = 0.0_f64;
            for i in 0..levels {
                if den[i] > 0.0 {
                    let c = num[i] / den[i];
                    moved = moved.max((c - centers[i]).abs());
                    centers[i] = c;
                }
            }
            centers.sort_by(f64::total_cmp);
            if moved < 1e-13 {
                break;
            }
        }

        let d = discrete_distortion(&xs, &ws, &centers);
        if best.as_ref().is_none_or(|(_, bd)| d < *bd) {
            best = Some((centers, d));
        }
    }
    let (centers, distortion) = best.expect("at least one start succeeds");
    let thresholds = centers.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    Ok((centers, thresholds, distortion))
}

/// Weighted squared distortion of a discrete source against nearest centers;
/// `ws` already carries the |x|^M factor.
fn discrete_distortion(xs: &[f64], ws: &[f64], centers: &[f64]) -> f64 {
    xs.iter()
        .zip(ws)
        .map(|(&x, &w)| {
            let d = centers.iter().map(|c| (x - c) * (x - c)).fold(f64::INFINITY, f64::min);
            w * d
        })
        .sum()
}

// --- codebook tables -----------------------------------------------------------

/// On-disk format version for serialized tables.
pub const TABLE_FORMAT_VERSION: u8 = 1;

/// Precomputed codebooks for the unit-variance zero-mean member of one
/// family, indexed by (shape grid point, rate, M). Compression fits a shape
/// at runtime and looks up the nearest grid entry instead of re-running
/// Lloyd per block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CodebookTable {
    pub version: u8,
    pub family: Family,
    /// Strictly increasing shape grid.
    pub shapes: Vec<f64>,
    pub rates: Vec<u8>,
    pub ms: Vec<f64>,
    /// Row-major over (shape, rate, m).
    pub books: Vec<Codebook>,
}

/// Default shape grid bounds and step (clamped to (0, 1] for DWeibull).
pub const DEFAULT_GRID_STEP: f64 = 0.05;
pub const DEFAULT_GRID_LO: f64 = 0.3;
pub const DEFAULT_GRID_HI: f64 = 3.0;

/// The default shape grid for a family: 0.3 to 3.0 step 0.05, cut at the
/// family's fit range.
pub fn default_shape_grid(family: Family) -> Vec<f64> {
    let hi = match family {
        Family::GenNorm => DEFAULT_GRID_HI,
        Family::DWeibull => 1.0,
    };
    let mut grid = Vec::new();
    let mut i = 0;
    loop {
        let s = DEFAULT_GRID_LO + DEFAULT_GRID_STEP * i as f64;
        if s > hi + 1e-9 {
            break;
        }
        grid.push(s);
        i += 1;
    }
    grid
}

/// Sweep cap for table construction. Tables are built offline, so the cap is
/// deliberately roomy; the movement tolerance is what actually stops Lloyd.
const TABLE_MAX_ITER: usize = 20_000;

/// Design one codebook per (shape, rate, M) for the unit-variance member of
/// the family. Entries are independent, so they are designed in parallel;
/// output order is deterministic.
pub fn build_table(
    family: Family,
    shape_grid: &[f64],
    rates: &[u8],
    ms: &[f64],
    tol: f64,
) -> Result<CodebookTable> {
    validate_grid(family, shape_grid)?;
    if rates.is_empty() || ms.is_empty() {
        return Err(Error::InvalidParameter {
            name: "rates/ms",
            value: 0.0,
            reason: "need at least one rate and one M",
        });
    }
    let combos: Vec<(f64, u8, f64)> = shape_grid
        .iter()
        .flat_map(|&s| rates.iter().flat_map(move |&r| ms.iter().map(move |&m| (s, r, m))))
        .collect();
    let books: Vec<Codebook> = combos
        .par_iter()
        .map(|&(shape, rate, m)| {
            let scale = distributions::unit_variance_scale(family, shape);
            let fit = DistributionFit { family, mu: 0.0, scale, shape, clamped: false };
            design_codebook(&fit, rate, m, DESIGN_TOL.min(tol), TABLE_MAX_ITER)
                .map_err(|e| Error::TableDesign { shape, rate, m, source: Box::new(e) })
        })
        .collect::<Result<_>>()?;
    Ok(CodebookTable {
        version: TABLE_FORMAT_VERSION,
        family,
        shapes: shape_grid.to_vec(),
        rates: rates.to_vec(),
        ms: ms.to_vec(),
        books,
    })
}

fn validate_grid(family: Family, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter { name: "shape_grid", value: 0.0, reason: "empty grid" });
    }
    let (lo, hi) = match family {
        Family::GenNorm => distributions::GENNORM_SHAPE_RANGE,
        Family::DWeibull => (f64::MIN_POSITIVE, 1.0),
    };
    for w in grid.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::InvalidParameter {
                name: "shape_grid",
                value: w[1],
                reason: "grid must be strictly increasing",
            });
        }
    }
    for &s in grid {
        if s < lo || s > hi {
            return Err(Error::InvalidParameter {
                name: "shape_grid",
                value: s,
                reason: "grid point outside the family's fit range",
            });
        }
    }
    Ok(())
}

/// Two M values are "the same table entry" when they agree after f32
/// round-trip (M travels as f32 on the wire).
fn m_matches(a: f64, b: f64) -> bool {
    a as f32 == b as f32
}

impl CodebookTable {
    fn index(&self, si: usize, ri: usize, mi: usize) -> usize {
        (si * self.rates.len() + ri) * self.ms.len() + mi
    }

    /// Nearest-grid-shape lookup with exact (rate, M) match. Returns the
    /// grid token to transmit along with the codebook.
    pub fn lookup(&self, shape: f64, rate: u8, m: f64) -> Result<(u16, &Codebook)> {
        let si = self
            .shapes
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| (*a - shape).abs().total_cmp(&(*b - shape).abs()))
            .map(|(i, _)| i)
            .expect("validated non-empty");
        let book = self.book_for_token(si as u16, rate, m)?;
        Ok((si as u16, book))
    }

    /// Fetch the entry for an already-resolved grid token.
    pub fn book_for_token(&self, token: u16, rate: u8, m: f64) -> Result<&Codebook> {
        let si = token as usize;
        if si >= self.shapes.len() {
            return Err(Error::TableMismatch { what: format!("shape token {token}") });
        }
        let ri = self
            .rates
            .iter()
            .position(|&r| r == rate)
            .ok_or_else(|| Error::TableMismatch { what: format!("rate {rate}") })?;
        let mi = self
            .ms
            .iter()
            .position(|&tm| m_matches(tm, m))
            .ok_or_else(|| Error::TableMismatch { what: format!("M {m}") })?;
        Ok(&self.books[self.index(si, ri, mi)])
    }

    /// Grid shape value behind a token.
    pub fn shape_of_token(&self, token: u16) -> Result<f64> {
        self.shapes
            .get(token as usize)
            .copied()
            .ok_or_else(|| Error::TableMismatch { what: format!("shape token {token}") })
    }

    /// Structural validation: versions, grids, and every codebook, including
    /// the antisymmetry all designed books carry.
    pub fn validate(&self) -> Result<()> {
        if self.version != TABLE_FORMAT_VERSION {
            return Err(Error::VersionMismatch { found: self.version, supported: TABLE_FORMAT_VERSION });
        }
        validate_grid(self.family, &self.shapes)?;
        let expect = self.shapes.len() * self.rates.len() * self.ms.len();
        if self.books.len() != expect {
            return Err(Error::LengthMismatch { left: self.books.len(), right: expect });
        }
        for (si, _) in self.shapes.iter().enumerate() {
            for (ri, &r) in self.rates.iter().enumerate() {
                for (mi, &m) in self.ms.iter().enumerate() {
                    let book = &self.books[self.index(si, ri, mi)];
                    book.validate()?;
                    if book.rate != r || !m_matches(book.m, m) {
                        return Err(Error::MalformedPayload(format!(
                            "table entry ({si},{ri},{mi}) labeled rate {} M {}",
                            book.rate, book.m
                        )));
                    }
                    let l = book.centers.len();
                    let span = book.centers[l - 1].abs().max(1.0);
                    for i in 0..l {
                        if (book.centers[i] + book.centers[l - 1 - i]).abs() > 1e-9 * span {
                            return Err(Error::MalformedPayload(format!(
                                "table entry ({si},{ri},{mi}) lost center antisymmetry"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Serialize to versioned JSON.
    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let json = serde_json::to_string(self)?;
        std::fs::write(path, json)?;
        Ok(())
    }

    /// Load and validate a table written by [`CodebookTable::save`].
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let json = std::fs::read_to_string(path)?;
        let table: CodebookTable = serde_json::from_str(&json)?;
        table.validate()?;
        Ok(table)
    }
}

// --- tests ---------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::unit_variance_scale;

    fn laplace() -> DistributionFit {
        DistributionFit::gennorm(0.0, 1.0, 1.0).unwrap()
    }

    fn standard_normal() -> DistributionFit {
        DistributionFit::gennorm(0.0, std::f64::consts::SQRT_2, 2.0).unwrap()
    }

    #[test]
    fn laplace_rate1_centers_hit_m_plus_one() {
        // Half-line magnitudes are Exp(1); the M-weighted centroid of the
        // whole half-line is Gamma(M+2)/Gamma(M+1) = M+1.
        for m in 0..=4 {
            let cb = design_codebook(&laplace(), 1, m as f64, 1e-9, 500).unwrap();
            assert!(
                (cb.centers[1] - (m + 1) as f64).abs() < 1e-6,
                "M={m}: center {}",
                cb.centers[1]
            );
            assert_eq!(cb.centers[0], -cb.centers[1]);
        }
    }

    #[test]
    fn normal_rate1_center_is_mean_magnitude() {
        let cb = design_codebook(&standard_normal(), 1, 0.0, 1e-9, 500).unwrap();
        let sqrt_2_over_pi = 0.797_884_560_802_865_4;
        assert!((cb.centers[1] - sqrt_2_over_pi).abs() < 1e-6, "center {}", cb.centers[1]);
    }

    #[test]
    fn expected_distortion_matches_analytic_values() {
        // Laplace, R=1, M=0, centers +-1: E(|g|-1)^2 = Var(Exp(1)) = 1.
        let cb = design_codebook(&laplace(), 1, 0.0, 1e-9, 500).unwrap();
        let d = expected_distortion(&cb, &laplace());
        assert!((d - 1.0).abs() < 1e-6, "laplace distortion {d}");

        // Unit normal, R=1, M=0: E X^2 - (E|X|)^2 = 1 - 2/pi.
        let cb2 = design_codebook(&standard_normal(), 1, 0.0, 1e-9, 500).unwrap();
        let d2 = expected_distortion(&cb2, &standard_normal());
        let expect = 1.0 - 2.0 / std::f64::consts::PI;
        assert!((d2 - expect).abs() < 1e-6, "normal distortion {d2} vs {expect}");
    }

    #[test]
    fn distortion_decreases_with_rate() {
        // Lloyd converges linearly with a factor that worsens as the level
        // count grows, so high-rate designs need a roomier sweep cap.
        let fit = standard_normal();
        let mut prev = f64::INFINITY;
        for rate in 1..=5u8 {
            let cb = design_codebook(&fit, rate, 0.0, 1e-8, 5000).unwrap();
            let d = expected_distortion(&cb, &fit);
            assert!(d < prev, "rate {rate}: {d} !< {prev}");
            prev = d;
        }
    }

    #[test]
    fn design_trace_distortion_is_monotone() {
        for &(family, shape, rate, m) in &[
            (Family::GenNorm, 0.8, 3u8, 2.0),
            (Family::GenNorm, 2.5, 2, 0.0),
            (Family::DWeibull, 0.4, 3, 1.0),
        ] {
            let scale = unit_variance_scale(family, shape);
            let fit = DistributionFit { family, mu: 0.0, scale, shape, clamped: false };
            let (_, trace) = design_codebook_traced(&fit, rate, m, 1e-8, 500, true).unwrap();
            for w in trace.distortion_per_sweep.windows(2) {
                assert!(
                    w[1] <= w[0] * (1.0 + 1e-9),
                    "{family:?} {shape} R{rate} M{m}: {} -> {}",
                    w[0],
                    w[1]
                );
            }
        }
    }

    #[test]
    fn larger_m_pushes_centers_outward() {
        let fit = standard_normal();
        let mut prev = 0.0;
        for &m in &[0.0, 2.0, 4.0, 8.0] {
            let cb = design_codebook(&fit, 2, m, 1e-8, 500).unwrap();
            let top = cb.centers.last().copied().unwrap();
            assert!(top > prev, "M={m}: top {top} !> {prev}");
            prev = top;
        }
    }

    #[test]
    fn design_is_deterministic() {
        let fit = DistributionFit::dweibull(0.0, 0.8, 0.55).unwrap();
        let a = design_codebook(&fit, 3, 2.0, 1e-8, 500).unwrap();
        let b = design_codebook(&fit, 3, 2.0, 1e-8, 500).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn quantize_threshold_and_tie_rules() {
        let cb = Codebook { centers: vec![-1.0, 1.0], thresholds: vec![0.0], m: 0.0, rate: 1 };
        assert_eq!(quantize(&[0.2, 0.0, -0.2], &cb), vec![1, 1, 0]);
    }

    #[test]
    fn quantize_equals_nearest_center_argmin() {
        let fit = standard_normal();
        let cb = design_codebook(&fit, 3, 1.0, 1e-8, 500).unwrap();
        let xs = crate::distributions::sample(&fit, 10_000, 99);
        for (&x, &code) in xs.iter().zip(quantize(&xs, &cb).iter()) {
            let best = cb
                .centers
                .iter()
                .enumerate()
                .min_by(|(_, a), (_, b)| (x - *a).abs().total_cmp(&(x - *b).abs()))
                .unwrap()
                .0 as u32;
            let tie = (x - cb.centers[best as usize]).abs();
            let got = (x - cb.centers[code as usize]).abs();
            assert!(got <= tie + 1e-12, "x={x}: code {code} vs argmin {best}");
        }
    }

    #[test]
    fn dequantize_round_trips() {
        let cb = design_codebook(&laplace(), 2, 0.0, 1e-8, 500).unwrap();
        let codes = vec![0u32, 1, 2, 3, 3, 0];
        let vals = dequantize(&codes, &cb).unwrap();
        assert_eq!(quantize(&vals, &cb), codes);
        assert_eq!(dequantize(&quantize(&cb.centers, &cb), &cb).unwrap(), cb.centers);
        assert!(matches!(dequantize(&[4], &cb), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn weighted_distortion_examples() {
        assert_eq!(weighted_distortion(&[1.0, -2.0], &[1.0, -2.0], 3.0).unwrap(), 0.0);
        assert_eq!(weighted_distortion(&[1.0, -2.0], &[0.0, 0.0], 0.0).unwrap(), 1.5);
        assert_eq!(weighted_distortion(&[1.0, -2.0], &[0.0, 0.0], 1.0).unwrap(), 2.5);
        assert!(matches!(
            weighted_distortion(&[1.0], &[1.0, 2.0], 0.0),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn validate_rejects_broken_codebooks() {
        let good = design_codebook(&laplace(), 2, 0.0, 1e-8, 500).unwrap();
        good.validate().unwrap();

        let mut bad = good.clone();
        bad.thresholds[0] += 0.5;
        assert!(bad.validate().is_err());

        let mut bad2 = good.clone();
        bad2.centers.swap(0, 1);
        assert!(bad2.validate().is_err());
    }

    #[test]
    fn discrete_design_on_symmetric_support() {
        let points = [-2.0, -1.0, 1.0, 2.0];
        let weights = [0.25; 4];
        let (centers, thresholds, d) =
            design_codebook_discrete(&points, &weights, 0.0, 2, 16, 5).unwrap();
        assert!((centers[0] + 1.5).abs() < 1e-12 && (centers[1] - 1.5).abs() < 1e-12);
        assert_eq!(thresholds, vec![0.0]);
        assert!((d - 4.0 * 0.25 * 0.25).abs() < 1e-12);
    }

    #[test]
    fn table_build_lookup_and_round_trip() {
        let table = build_table(Family::GenNorm, &[1.0, 2.0], &[1], &[0.0, 2.0], 1e-7).unwrap();
        assert_eq!(table.books.len(), 4);
        table.validate().unwrap();

        // Consistency with a direct design at the same parameters.
        let fit = DistributionFit::gennorm(0.0, unit_variance_scale(Family::GenNorm, 2.0), 2.0).unwrap();
        let direct = design_codebook(&fit, 1, 0.0, DESIGN_TOL, DESIGN_MAX_ITER).unwrap();
        let (token, book) = table.lookup(1.98, 1, 0.0).unwrap();
        assert_eq!(token, 1);
        assert_eq!(book, &direct);

        assert!(matches!(table.lookup(2.0, 3, 0.0), Err(Error::TableMismatch { .. })));
        assert!(matches!(table.lookup(2.0, 1, 7.0), Err(Error::TableMismatch { .. })));

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("table.json");
        table.save(&path).unwrap();
        assert_eq!(CodebookTable::load(&path).unwrap(), table);
    }

    #[test]
    fn table_load_rejects_bad_version_and_broken_invariants() {
        let table = build_table(Family::DWeibull, &[0.5, 1.0], &[1], &[0.0], 1e-7).unwrap();
        let dir = tempfile::tempdir().unwrap();

        let mut doc: serde_json::Value = serde_json::to_value(&table).unwrap();
        doc["version"] = 99.into();
        let vpath = dir.path().join("bad_version.json");
        std::fs::write(&vpath, serde_json::to_string(&doc).unwrap()).unwrap();
        assert!(matches!(CodebookTable::load(&vpath), Err(Error::VersionMismatch { found: 99, .. })));

        let mut doc2: serde_json::Value = serde_json::to_value(&table).unwrap();
        doc2["books"][0]["thresholds"][0] = 123.0.into();
        let bpath = dir.path().join("bad_book.json");
        std::fs::write(&bpath, serde_json::to_string(&doc2).unwrap()).unwrap();
        assert!(CodebookTable::load(&bpath).is_err());
    }

    #[test]
    fn default_grids_respect_family_ranges() {
        let g = default_shape_grid(Family::GenNorm);
        assert_eq!(g.len(), 55);
        assert!((g[0] - 0.3).abs() < 1e-12 && (g[54] - 3.0).abs() < 1e-9);
        let d = default_shape_grid(Family::DWeibull);
        assert_eq!(d.len(), 15);
        assert!(d.last().copied().unwrap() <= 1.0 + 1e-12);
    }
}
