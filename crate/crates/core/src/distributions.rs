//! Gradient magnitude models: generalized normal and double-sided Weibull.
//!
//! Both families are symmetric about a location `mu` with a scale `s` and one
//! shape degree of freedom, which is what makes a small precomputed codebook
//! table workable: fits are reduced to (shape, scale) and the shape is looked
//! up on a grid.
//!
//! Densities:
//!
//! ```text
//!   GenNorm   f(x) = b / (2 s G(1/b)) * exp(-(|x-mu|/s)^b)
//!   DWeibull  f(x) = c / (2 s) * (|x-mu|/s)^(c-1) * exp(-(|x-mu|/s)^c)
//! ```
//!
//! The double-sided Weibull density is unbounded at `mu` for c < 1; every
//! integral in this module therefore runs in transformed coordinates where
//! the integrand is smooth (see [`weighted_cell_integral`]), never by brute
//! quadrature across the singularity.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::math;
use crate::{Error, Result};

/// Distribution family tag.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    GenNorm,
    DWeibull,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::GenNorm => "gennorm",
            Family::DWeibull => "dweibull",
        }
    }
}

/// Shape range the GenNorm moment-ratio fit can invert.
pub const GENNORM_SHAPE_RANGE: (f64, f64) = (0.1, 10.0);
/// Shape range for the double-sided Weibull fit; the family itself is
/// restricted to shape <= 1.
pub const DWEIBULL_SHAPE_RANGE: (f64, f64) = (0.05, 1.0);
/// Minimum sample count accepted by the fitting routines.
pub const MIN_FIT_SAMPLES: usize = 30;

const DEGENERATE_VARIANCE: f64 = 1e-12;

/// A fitted two-parameter gradient model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistributionFit {
    pub family: Family,
    /// Location; always 0 for fits produced by this crate (inputs are
    /// normalized first).
    pub mu: f64,
    /// Scale s > 0.
    pub scale: f64,
    /// Shape: beta for GenNorm, c in (0, 1] for DWeibull.
    pub shape: f64,
    /// True when the moment ratio fell outside the invertible range and the
    /// shape was clamped to the nearest bound.
    pub clamped: bool,
}

impl DistributionFit {
    pub fn gennorm(mu: f64, scale: f64, shape: f64) -> Result<Self> {
        check_positive("scale", scale)?;
        check_positive("shape", shape)?;
        Ok(Self { family: Family::GenNorm, mu, scale, shape, clamped: false })
    }

    pub fn dweibull(mu: f64, scale: f64, shape: f64) -> Result<Self> {
        check_positive("scale", scale)?;
        if !(shape > 0.0 && shape <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "shape",
                value: shape,
                reason: "double-sided Weibull shape must lie in (0, 1]",
            });
        }
        Ok(Self { family: Family::DWeibull, mu, scale, shape, clamped: false })
    }

    /// Absolute moment E|X - mu|^k, in closed form via log-gamma.
    pub fn abs_moment(&self, k: f64) -> f64 {
        debug_assert!(k >= 0.0);
        let s = self.scale;
        let ln = match self.family {
            Family::GenNorm => {
                let b = self.shape;
                k * s.ln() + math::ln_gamma((k + 1.0) / b) - math::ln_gamma(1.0 / b)
            }
            Family::DWeibull => {
                let c = self.shape;
                k * s.ln() + math::ln_gamma(1.0 + k / c)
            }
        };
        ln.exp()
    }

    /// Quantile of |X - mu|: the x with P(|X - mu| <= x) = p.
    pub fn abs_quantile(&self, p: f64) -> f64 {
        debug_assert!((0.0..1.0).contains(&p));
        let s = self.scale;
        match self.family {
            Family::GenNorm => {
                let b = self.shape;
                s * math::inv_gamma_p(1.0 / b, p).powf(1.0 / b)
            }
            Family::DWeibull => {
                let c = self.shape;
                s * (-(1.0 - p).ln()).powf(1.0 / c)
            }
        }
    }
}

fn check_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter { name, value, reason: "must be finite and positive" })
    }
}

// --- densities -----------------------------------------------------------

/// Generalized normal density.
pub fn gennorm_pdf(x: f64, fit: &DistributionFit) -> Result<f64> {
    if fit.family != Family::GenNorm {
        return Err(Error::InvalidFamily { expected: "gennorm", got: fit.family.name() });
    }
    let b = fit.shape;
    let s = fit.scale;
    let z = (x - fit.mu).abs() / s;
    let ln = b.ln() - (2.0 * s).ln() - math::ln_gamma(1.0 / b) - z.powf(b);
    Ok(ln.exp())
}

/// Double-sided Weibull density. Unbounded at the location for shape < 1,
/// which is reported as an error rather than infinity.
pub fn dweibull_pdf(x: f64, fit: &DistributionFit) -> Result<f64> {
    if fit.family != Family::DWeibull {
        return Err(Error::InvalidFamily { expected: "dweibull", got: fit.family.name() });
    }
    let c = fit.shape;
    let s = fit.scale;
    if x == fit.mu && c < 1.0 {
        return Err(Error::SingularPoint { shape: c });
    }
    let z = (x - fit.mu).abs() / s;
    // c = 1 at z = 0 hits 0^0, which the Laplace limit defines as 1.
    let ln = c.ln() - (2.0 * s).ln() + (c - 1.0) * if z == 0.0 { 0.0 } else { z.ln() } - z.powf(c);
    Ok(ln.exp())
}

/// Density dispatch on the fit's own family.
pub fn pdf(x: f64, fit: &DistributionFit) -> Result<f64> {
    match fit.family {
        Family::GenNorm => gennorm_pdf(x, fit),
        Family::DWeibull => dweibull_pdf(x, fit),
    }
}

// --- moment-ratio fitting -------------------------------------------------

/// GenNorm moment ratio m1/sqrt(m2) as a function of shape; strictly
/// increasing on the fit range.
fn gennorm_moment_ratio(b: f64) -> f64 {
    (math::ln_gamma(2.0 / b) - 0.5 * (math::ln_gamma(1.0 / b) + math::ln_gamma(3.0 / b))).exp()
}

/// DWeibull moment ratio m2/m1^2 as a function of shape; strictly decreasing.
fn dweibull_moment_ratio(c: f64) -> f64 {
    (math::ln_gamma(1.0 + 2.0 / c) - 2.0 * math::ln_gamma(1.0 + 1.0 / c)).exp()
}

/// Bisection for f(x) = target with f monotone on [lo, hi]. Returns the
/// clamped bound (flagged) when the target is not bracketed.
fn invert_monotone(f: impl Fn(f64) -> f64, target: f64, lo: f64, hi: f64, increasing: bool) -> (f64, bool) {
    let (val_lo, val_hi) = (f(lo), f(hi));
    let out_low = if increasing { target <= val_lo } else { target >= val_lo };
    let out_high = if increasing { target >= val_hi } else { target <= val_hi };
    if out_low {
        return (lo, true);
    }
    if out_high {
        return (hi, true);
    }
    let (mut a, mut b) = (lo, hi);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        let fm = f(mid);
        let go_right = if increasing { fm < target } else { fm > target };
        if go_right {
            a = mid;
        } else {
            b = mid;
        }
        if b - a <= 1e-13 * b.abs().max(1.0) {
            break;
        }
    }
    (0.5 * (a + b), false)
}

/// Sample central variance and raw absolute moments about 0.
fn sample_moments(samples: &[f64]) -> Result<(f64, f64)> {
    if samples.len() < MIN_FIT_SAMPLES {
        return Err(Error::InsufficientSamples { got: samples.len(), need: MIN_FIT_SAMPLES });
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    if var < DEGENERATE_VARIANCE {
        return Err(Error::DegenerateSample { variance: var });
    }
    let m1 = samples.iter().map(|x| x.abs()).sum::<f64>() / n;
    let m2 = samples.iter().map(|x| x * x).sum::<f64>() / n;
    Ok((m1, m2))
}

/// Fit a zero-mean GenNorm by matching the absolute-moment ratio
/// m1/sqrt(m2) = G(2/b) / sqrt(G(1/b) G(3/b)); scale from the second moment.
pub fn fit_gennorm(samples: &[f64]) -> Result<DistributionFit> {
    let (m1, m2) = sample_moments(samples)?;
    let ratio = m1 / m2.sqrt();
    let (lo, hi) = GENNORM_SHAPE_RANGE;
    let (shape, clamped) = invert_monotone(gennorm_moment_ratio, ratio, lo, hi, true);
    let scale = (0.5 * (m2.ln() + math::ln_gamma(1.0 / shape) - math::ln_gamma(3.0 / shape))).exp();
    Ok(DistributionFit { family: Family::GenNorm, mu: 0.0, scale, shape, clamped })
}

/// Fit a zero-mean double-sided Weibull by matching m2/m1^2 =
/// G(1+2/c) / G(1+1/c)^2 on |samples|; scale from the first absolute moment.
pub fn fit_dweibull(samples: &[f64]) -> Result<DistributionFit> {
    let (m1, m2) = sample_moments(samples)?;
    let ratio = m2 / (m1 * m1);
    let (lo, hi) = DWEIBULL_SHAPE_RANGE;
    let (shape, clamped) = invert_monotone(dweibull_moment_ratio, ratio, lo, hi, false);
    let scale = (m1.ln() - math::ln_gamma(1.0 + 1.0 / shape)).exp();
    Ok(DistributionFit { family: Family::DWeibull, mu: 0.0, scale, shape, clamped })
}

/// Fit dispatch by family.
pub fn fit(family: Family, samples: &[f64]) -> Result<DistributionFit> {
    match family {
        Family::GenNorm => fit_gennorm(samples),
        Family::DWeibull => fit_dweibull(samples),
    }
}

// --- sampling --------------------------------------------------------------

/// Draw n i.i.d. values; deterministic for a fixed seed.
///
/// GenNorm magnitudes are s * Gamma(1/b, 1)^(1/b); DWeibull magnitudes come
/// from inverse-transform sampling of the Weibull law. Signs are fair coins.
pub fn sample(fit: &DistributionFit, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let s = fit.scale;
    let mut out = Vec::with_capacity(n);
    match fit.family {
        Family::GenNorm => {
            let b = fit.shape;
            let gamma = Gamma::new(1.0 / b, 1.0).expect("shape validated at construction");
            for _ in 0..n {
                let mag = s * gamma.sample(&mut rng).powf(1.0 / b);
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                out.push(fit.mu + sign * mag);
            }
        }
        Family::DWeibull => {
            let c = fit.shape;
            for _ in 0..n {
                let u: f64 = rng.random();
                let mag = s * (-(1.0 - u).ln()).powf(1.0 / c);
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                out.push(fit.mu + sign * mag);
            }
        }
    }
    out
}

// --- normalization -----------------------------------------------------------

/// Shift to zero mean and scale to unit variance (population convention).
/// Returns (normalized, mean, std); `grad = normalized * std + mean`.
pub fn normalize(grad: &[f64]) -> Result<(Vec<f64>, f64, f64)> {
    if grad.len() < 2 {
        return Err(Error::InsufficientSamples { got: grad.len(), need: 2 });
    }
    let n = grad.len() as f64;
    let mean = grad.iter().sum::<f64>() / n;
    let var = grad.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    if std <= 1e-12 {
        return Err(Error::DegenerateSample { variance: var });
    }
    Ok((grad.iter().map(|x| (x - mean) / std).collect(), mean, std))
}

/// Scale that gives the family unit variance at the given shape; codebook
/// tables are designed for this member and rescaled at runtime.
pub fn unit_variance_scale(family: Family, shape: f64) -> f64 {
    match family {
        // Var = s^2 G(3/b) / G(1/b)
        Family::GenNorm => (0.5 * (math::ln_gamma(1.0 / shape) - math::ln_gamma(3.0 / shape))).exp(),
        // Var = E X^2 = s^2 G(1 + 2/c)
        Family::DWeibull => (-0.5 * math::ln_gamma(1.0 + 2.0 / shape)).exp(),
    }
}

// --- smooth-coordinate integrals ------------------------------------------

/// Integral over [a, b] of w(g) * pdf(g) dg for 0 <= a <= b, with the fit
/// centered at 0, evaluated in coordinates where the integrand is smooth:
///
/// * DWeibull: u = (g/s)^c turns pdf(g) dg into e^(-u)/2 du, removing the
///   c < 1 singularity at the origin exactly.
/// * GenNorm with b <= 1: v = (g/s)^b likewise removes the unbounded
///   derivative of exp(-(g/s)^b) at 0.
/// * GenNorm with b > 1: the raw integrand is already smooth.
pub fn weighted_cell_integral(fit: &DistributionFit, a: f64, b: f64, w: &dyn Fn(f64) -> f64) -> f64 {
    debug_assert!(fit.mu == 0.0, "cell integrals assume a centered fit");
    debug_assert!(0.0 <= a && a <= b, "bad cell [{a}, {b}]");
    if a == b {
        return 0.0;
    }
    let s = fit.scale;
    let sh = fit.shape;
    match fit.family {
        Family::DWeibull => {
            let (ua, ub) = ((a / s).powf(sh), (b / s).powf(sh));
            math::integrate(
                &|u: f64| 0.5 * w(s * u.powf(1.0 / sh)) * (-u).exp(),
                ua,
                ub,
                math::INTEGRATE_REL_TOL,
            )
        }
        Family::GenNorm if sh <= 1.0 => {
            let norm = 0.5 / math::ln_gamma(1.0 / sh).exp();
            let (va, vb) = ((a / s).powf(sh), (b / s).powf(sh));
            math::integrate(
                &|v: f64| norm * w(s * v.powf(1.0 / sh)) * v.powf(1.0 / sh - 1.0) * (-v).exp(),
                va,
                vb,
                math::INTEGRATE_REL_TOL,
            )
        }
        Family::GenNorm => {
            let ln_norm = sh.ln() - (2.0 * s).ln() - math::ln_gamma(1.0 / sh);
            let norm = ln_norm.exp();
            math::integrate(
                &|g: f64| norm * w(g) * (-(g / s).powf(sh)).exp(),
                a,
                b,
                math::INTEGRATE_REL_TOL,
            )
        }
    }
}

/// Smallest cutoff of the form 8s * 2^j whose tail integral of g^p * pdf
/// beyond it is below `rel` times the full moment E|g|^p, decided in log
/// space so it works far past f64 underflow.
pub fn weighted_tail_cutoff(fit: &DistributionFit, p: f64, rel: f64) -> f64 {
    debug_assert!(fit.mu == 0.0);
    let s = fit.scale;
    let sh = fit.shape;
    // Tail mass ratio reduces to Q(a_fam, (x/s)^shape) / 2 in both families.
    let a_fam = match fit.family {
        Family::GenNorm => (p + 1.0) / sh,
        Family::DWeibull => p / sh + 1.0,
    };
    let ln_limit = (2.0 * rel).ln();
    let mut x = 8.0 * s;
    for _ in 0..100 {
        let z = (x / s).powf(sh);
        if math::ln_gamma_q(a_fam, z) < ln_limit {
            return x;
        }
        x *= 2.0;
    }
    x
}

// --- tests -----------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace_pdf(x: f64, mu: f64, s: f64) -> f64 {
        (-(x - mu).abs() / s).exp() / (2.0 * s)
    }

    fn normal_pdf(x: f64, mu: f64, sigma: f64) -> f64 {
        let z = (x - mu) / sigma;
        (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
    }

    #[test]
    fn gennorm_pdf_known_points() {
        let laplace = DistributionFit::gennorm(0.0, 1.0, 1.0).unwrap();
        assert!((gennorm_pdf(0.0, &laplace).unwrap() - 0.5).abs() < 1e-14);
        let gauss = DistributionFit::gennorm(0.0, 1.0, 2.0).unwrap();
        let inv_sqrt_pi = 0.564_189_583_547_756_3;
        assert!((gennorm_pdf(0.0, &gauss).unwrap() - inv_sqrt_pi).abs() < 1e-12);
        let e_inv_sqrt_pi = 0.207_553_748_710_297_4;
        assert!((gennorm_pdf(1.0, &gauss).unwrap() - e_inv_sqrt_pi).abs() < 1e-12);
    }

    #[test]
    fn dweibull_pdf_known_points_and_singularity() {
        let laplace = DistributionFit::dweibull(0.0, 1.0, 1.0).unwrap();
        assert!((dweibull_pdf(0.0, &laplace).unwrap() - 0.5).abs() < 1e-14);
        let wide = DistributionFit::dweibull(0.0, 2.0, 1.0).unwrap();
        let e_inv_over_4 = 0.091_969_860_292_860_58;
        assert!((dweibull_pdf(2.0, &wide).unwrap() - e_inv_over_4).abs() < 1e-12);
        let heavy = DistributionFit::dweibull(0.0, 1.0, 0.5).unwrap();
        assert!(matches!(dweibull_pdf(0.0, &heavy), Err(Error::SingularPoint { .. })));
    }

    #[test]
    fn pdf_rejects_wrong_family() {
        let g = DistributionFit::gennorm(0.0, 1.0, 2.0).unwrap();
        assert!(matches!(dweibull_pdf(0.0, &g), Err(Error::InvalidFamily { .. })));
        let d = DistributionFit::dweibull(0.0, 1.0, 1.0).unwrap();
        assert!(matches!(gennorm_pdf(0.0, &d), Err(Error::InvalidFamily { .. })));
    }

    #[test]
    fn densities_are_symmetric_about_mu() {
        let g = DistributionFit::gennorm(0.7, 1.3, 1.6).unwrap();
        let d = DistributionFit::dweibull(-0.4, 0.8, 0.6).unwrap();
        for i in 1..40 {
            let dx = i as f64 * 0.17;
            assert!((pdf(g.mu + dx, &g).unwrap() - pdf(g.mu - dx, &g).unwrap()).abs() < 1e-14);
            assert!((pdf(d.mu + dx, &d).unwrap() - pdf(d.mu - dx, &d).unwrap()).abs() < 1e-14);
        }
    }

    #[test]
    fn gennorm_special_cases_match_laplace_and_normal() {
        let lap = DistributionFit::gennorm(0.3, 1.4, 1.0).unwrap();
        let sigma = 0.9;
        let gauss = DistributionFit::gennorm(-0.2, sigma * std::f64::consts::SQRT_2, 2.0).unwrap();
        let dlap = DistributionFit::dweibull(0.3, 1.4, 1.0).unwrap();
        for i in 0..100 {
            let x = -5.0 + 0.1 * i as f64;
            assert!((gennorm_pdf(x, &lap).unwrap() - laplace_pdf(x, 0.3, 1.4)).abs() < 1e-10);
            assert!((gennorm_pdf(x, &gauss).unwrap() - normal_pdf(x, -0.2, sigma)).abs() < 1e-10);
            assert!((dweibull_pdf(x, &dlap).unwrap() - laplace_pdf(x, 0.3, 1.4)).abs() < 1e-10);
        }
    }

    #[test]
    fn pdf_mass_is_one_for_all_tested_shapes() {
        // Evaluated with the same smooth-coordinate path production uses; the
        // support is grown adaptively because heavy-tailed shapes hold real
        // mass far beyond any fixed multiple of the scale.
        for &(family, shape) in &[
            (Family::GenNorm, 0.3),
            (Family::GenNorm, 0.5),
            (Family::GenNorm, 1.0),
            (Family::GenNorm, 2.0),
            (Family::GenNorm, 3.0),
            (Family::DWeibull, 0.3),
            (Family::DWeibull, 0.6),
            (Family::DWeibull, 1.0),
        ] {
            let fit = DistributionFit { family, mu: 0.0, scale: 1.3, shape, clamped: false };
            let cutoff = weighted_tail_cutoff(&fit, 0.0, 1e-9);
            let mass = 2.0 * weighted_cell_integral(&fit, 0.0, cutoff, &|_| 1.0);
            assert!((mass - 1.0).abs() < 1e-6, "{family:?} shape {shape}: mass {mass}");
        }
    }

    #[test]
    fn quadrature_matches_closed_form_moments() {
        for &(family, shape, p) in &[
            (Family::GenNorm, 0.6, 1.0),
            (Family::GenNorm, 2.0, 2.0),
            (Family::GenNorm, 1.4, 3.0),
            (Family::DWeibull, 0.3, 1.0),
            (Family::DWeibull, 0.8, 2.0),
        ] {
            let fit = DistributionFit { family, mu: 0.0, scale: 0.7, shape, clamped: false };
            let cutoff = weighted_tail_cutoff(&fit, p, 1e-14);
            let got = 2.0 * weighted_cell_integral(&fit, 0.0, cutoff, &|g| g.powf(p));
            let expect = fit.abs_moment(p);
            assert!(
                ((got - expect) / expect).abs() < 1e-9,
                "{family:?} shape {shape} p {p}: {got} vs {expect}"
            );
        }
    }

    #[test]
    fn abs_quantile_inverts_abs_mass() {
        for &(family, shape) in &[(Family::GenNorm, 1.7), (Family::DWeibull, 0.45)] {
            let fit = DistributionFit { family, mu: 0.0, scale: 2.1, shape, clamped: false };
            for &p in &[0.1, 0.5, 0.9, 0.99] {
                let x = fit.abs_quantile(p);
                let mass = 2.0 * weighted_cell_integral(&fit, 0.0, x, &|_| 1.0);
                assert!((mass - p).abs() < 1e-8, "{family:?} p={p}: mass {mass}");
            }
        }
    }

    #[test]
    fn shape_solvers_invert_exact_moment_ratios() {
        for i in 0..28 {
            let b = 0.2 + 0.3 * i as f64;
            let (got, clamped) = invert_monotone(
                gennorm_moment_ratio,
                gennorm_moment_ratio(b),
                GENNORM_SHAPE_RANGE.0,
                GENNORM_SHAPE_RANGE.1,
                true,
            );
            assert!(!clamped && (got - b).abs() < 1e-9, "gennorm b={b}: got {got}");
        }
        for i in 0..19 {
            let c = 0.06 + 0.05 * i as f64;
            let (got, clamped) = invert_monotone(
                dweibull_moment_ratio,
                dweibull_moment_ratio(c),
                DWEIBULL_SHAPE_RANGE.0,
                DWEIBULL_SHAPE_RANGE.1,
                false,
            );
            assert!(!clamped && (got - c).abs() < 1e-9, "dweibull c={c}: got {got}");
        }
    }

    #[test]
    fn fit_recovers_seeded_draws() {
        let g = DistributionFit::gennorm(0.0, 1.0, 1.0).unwrap();
        let fit = fit_gennorm(&sample(&g, 100_000, 11)).unwrap();
        assert!((0.9..=1.1).contains(&fit.shape), "beta {}", fit.shape);

        let g2 = DistributionFit::gennorm(0.0, 1.0, 2.0).unwrap();
        let fit2 = fit_gennorm(&sample(&g2, 100_000, 12)).unwrap();
        assert!((1.9..=2.1).contains(&fit2.shape), "beta {}", fit2.shape);

        let d = DistributionFit::dweibull(0.0, 1.0, 0.6).unwrap();
        let fit3 = fit_dweibull(&sample(&d, 100_000, 13)).unwrap();
        assert!((0.55..=0.65).contains(&fit3.shape), "c {}", fit3.shape);
    }

    #[test]
    fn dweibull_fit_clamps_light_tailed_samples() {
        // +-Exponential(1) magnitudes have m2/m1^2 = 2 exactly (c = 1); with
        // sampling noise about half of all seeds land just under 2, where the
        // fit must clamp into the family instead of failing.
        let lap = DistributionFit::dweibull(0.0, 1.0, 1.0).unwrap();
        let fit = fit_dweibull(&sample(&lap, 100_000, 21)).unwrap();
        assert!((0.95..=1.0).contains(&fit.shape), "c {}", fit.shape);

        // A Gaussian source sits well outside the family (ratio pi/2 < 2).
        let gauss = DistributionFit::gennorm(0.0, 1.0, 2.0).unwrap();
        let fit2 = fit_dweibull(&sample(&gauss, 50_000, 22)).unwrap();
        assert!(fit2.clamped && fit2.shape == 1.0, "c {} clamped {}", fit2.shape, fit2.clamped);
    }

    #[test]
    fn fit_rejects_degenerate_samples() {
        assert!(matches!(fit_gennorm(&vec![0.0; 100]), Err(Error::DegenerateSample { .. })));
        assert!(matches!(fit_dweibull(&vec![3.5; 100]), Err(Error::DegenerateSample { .. })));
        assert!(matches!(fit_gennorm(&[1.0, 2.0]), Err(Error::InsufficientSamples { .. })));
    }

    #[test]
    fn sampling_is_deterministic_and_moment_consistent() {
        let g = DistributionFit::gennorm(0.0, 1.0, 2.0).unwrap();
        assert_eq!(sample(&g, 1000, 7), sample(&g, 1000, 7));
        let xs = sample(&g, 100_000, 7);
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!(mean.abs() < 0.02, "mean {mean}");

        let d = DistributionFit::dweibull(0.0, 1.0, 1.0).unwrap();
        let ys = sample(&d, 100_000, 8);
        let m1 = ys.iter().map(|x| x.abs()).sum::<f64>() / ys.len() as f64;
        assert!((0.98..=1.02).contains(&m1), "m1 {m1}");
    }

    #[test]
    fn unit_variance_scales_match_sample_variance() {
        // Frozen closed forms: GenNorm beta=2 has s = sqrt(2); DWeibull c=1
        // is Laplace with Var = 2 s^2, so s = 1/sqrt(2).
        assert!((unit_variance_scale(Family::GenNorm, 2.0) - std::f64::consts::SQRT_2).abs() < 1e-12);
        assert!(
            (unit_variance_scale(Family::DWeibull, 1.0) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12
        );
        assert!((unit_variance_scale(Family::DWeibull, 0.3) - 0.019_635_923_580_805_02).abs() < 1e-12);

        for &(family, shape) in
            &[(Family::GenNorm, 0.7), (Family::GenNorm, 2.4), (Family::DWeibull, 0.5)]
        {
            let s = unit_variance_scale(family, shape);
            let fit = DistributionFit { family, mu: 0.0, scale: s, shape, clamped: false };
            let var = fit.abs_moment(2.0);
            assert!((var - 1.0).abs() < 1e-10, "{family:?} {shape}: var {var}");
        }
    }

    #[test]
    fn normalize_examples_and_round_trip() {
        let (z, mean, std) = normalize(&[1.0, 3.0]).unwrap();
        assert_eq!(z, vec![-1.0, 1.0]);
        assert_eq!((mean, std), (2.0, 1.0));

        assert!(matches!(normalize(&[5.0, 5.0]), Err(Error::DegenerateSample { .. })));

        let g = DistributionFit::gennorm(0.4, 2.0, 1.3).unwrap();
        let xs = sample(&g, 5000, 33);
        let (z, mean, std) = normalize(&xs).unwrap();
        let zm = z.iter().sum::<f64>() / z.len() as f64;
        let zv = z.iter().map(|x| (x - zm) * (x - zm)).sum::<f64>() / z.len() as f64;
        assert!(zm.abs() < 1e-9 && (zv - 1.0).abs() < 1e-9);
        for (orig, zi) in xs.iter().zip(&z) {
            assert!((orig - (zi * std + mean)).abs() < 1e-9);
        }
    }
}
