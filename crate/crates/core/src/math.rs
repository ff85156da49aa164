//! Scalar special functions and quadrature shared by the distribution and
//! quantizer modules.
//!
//! All gamma-family ratios elsewhere in the crate are computed in log space
//! through these routines. The integrator is a fixed-order Gauss-Legendre
//! rule under adaptive panel bisection; callers are expected to hand it
//! integrands that are smooth on the panel (the distribution module performs
//! the variable substitutions that remove integrable singularities before
//! calling in here).

use std::sync::OnceLock;

// --- log-gamma ---------------------------------------------------------

/// Lanczos coefficients for g = 7, n = 9.
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

const HALF_LN_TWO_PI: f64 = 0.918_938_533_204_672_74;

/// Natural log of the gamma function, accurate to ~1e-13 relative for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    debug_assert!(x.is_finite(), "ln_gamma: non-finite argument {x}");
    if x < 0.5 {
        // Reflection keeps the Lanczos sum in its accurate half-plane.
        let s = (std::f64::consts::PI * x).sin();
        return std::f64::consts::PI.ln() - s.abs().ln() - ln_gamma(1.0 - x);
    }
    let z = x - 1.0;
    let mut sum = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        sum += c / (z + i as f64);
    }
    let t = z + 7.5;
    HALF_LN_TWO_PI + (z + 0.5) * t.ln() - t + sum.ln()
}

// --- regularized incomplete gamma --------------------------------------

const GAMMA_EPS: f64 = 1e-16;
const GAMMA_MAX_ITER: usize = 500;

/// Series expansion of P(a, x); converges fastest for x < a + 1.
fn gamma_p_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut sum = 1.0 / a;
    let mut del = sum;
    for _ in 0..GAMMA_MAX_ITER {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * GAMMA_EPS {
            break;
        }
    }
    sum * (-x + a * x.ln() - ln_gamma(a)).exp()
}

/// Lentz continued fraction for Q(a, x), returned as ln Q; best for x > a + 1.
fn ln_gamma_q_cf(a: f64, x: f64) -> f64 {
    const FPMIN: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / FPMIN;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..=GAMMA_MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = b + an / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 3.0 * GAMMA_EPS {
            break;
        }
    }
    -x + a * x.ln() - ln_gamma(a) + h.ln()
}

/// Regularized lower incomplete gamma P(a, x) for a > 0, x >= 0.
pub fn gamma_p(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0 && x >= 0.0, "gamma_p: bad args a={a} x={x}");
    if x == 0.0 {
        0.0
    } else if x < a + 1.0 {
        gamma_p_series(a, x)
    } else {
        1.0 - ln_gamma_q_cf(a, x).exp()
    }
}

/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x).
pub fn gamma_q(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0 && x >= 0.0, "gamma_q: bad args a={a} x={x}");
    if x == 0.0 {
        1.0
    } else if x < a + 1.0 {
        1.0 - gamma_p_series(a, x)
    } else {
        ln_gamma_q_cf(a, x).exp()
    }
}

/// ln Q(a, x), usable deep in the tail where Q itself underflows.
pub fn ln_gamma_q(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0 && x >= 0.0, "ln_gamma_q: bad args a={a} x={x}");
    if x == 0.0 {
        0.0
    } else if x < a + 1.0 {
        (-gamma_p_series(a, x)).ln_1p()
    } else {
        ln_gamma_q_cf(a, x)
    }
}

/// Inverse of P(a, .) by bracketed bisection; adequate for quantile seeding.
pub fn inv_gamma_p(a: f64, p: f64) -> f64 {
    debug_assert!(a > 0.0 && (0.0..1.0).contains(&p), "inv_gamma_p: bad args a={a} p={p}");
    if p == 0.0 {
        return 0.0;
    }
    let mut hi = a.max(1.0);
    while gamma_p(a, hi) < p {
        hi *= 2.0;
        if hi > 1e300 {
            break;
        }
    }
    let mut lo = 0.0_f64;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if gamma_p(a, mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

// --- Gauss-Legendre quadrature ------------------------------------------

const GL_ORDER: usize = 32;

/// Nodes and weights for the order-n rule on [-1, 1], by Newton iteration on
/// the Legendre recurrence.
fn compute_gl_nodes(n: usize) -> Vec<(f64, f64)> {
    let mut nodes = vec![(0.0, 0.0); n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = nf * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = (-x, w);
        nodes[n - 1 - i] = (x, w);
    }
    nodes
}

fn gl32() -> &'static [(f64, f64)] {
    static NODES: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    NODES.get_or_init(|| compute_gl_nodes(GL_ORDER))
}

/// Single 32-point Gauss-Legendre panel over [a, b].
pub fn gl_panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let h = 0.5 * (b - a);
    let c = 0.5 * (a + b);
    let mut acc = 0.0;
    for &(x, w) in gl32() {
        acc += w * f(c + h * x);
    }
    acc * h
}

const MAX_DEPTH: usize = 40;

fn integrate_rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, whole: f64, rel_tol: f64, depth: usize) -> f64 {
    let m = 0.5 * (a + b);
    let left = gl_panel(f, a, m);
    let right = gl_panel(f, m, b);
    let split = left + right;
    if depth >= MAX_DEPTH || (split - whole).abs() <= rel_tol * split.abs().max(1e-300) {
        return split;
    }
    integrate_rec(f, a, m, left, rel_tol, depth + 1) + integrate_rec(f, m, b, right, rel_tol, depth + 1)
}

/// Adaptive integral of `f` over [a, b]: panels bisect until the refined
/// estimate agrees with the coarse one to `rel_tol` relative.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rel_tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let whole = gl_panel(f, a, b);
    integrate_rec(f, a, b, whole, rel_tol, 0)
}

/// Default relative tolerance used by the quantizer's cell integrals.
pub const INTEGRATE_REL_TOL: f64 = 1e-10;

// --- log2 binomial -------------------------------------------------------

/// Below this k the coefficient is summed term by term, which is exact to a
/// few ulps; above it the Lanczos difference is both faster and still well
/// inside 1e-9 relative (cancellation is negligible once k is large).
const LOG2_BINOM_SUM_LIMIT: u64 = 200_000;

fn log2_binomial_sum(n: u64, k: u64) -> f64 {
    // Kahan-compensated, all terms nonnegative since k <= n/2.
    let mut acc = 0.0_f64;
    let mut comp = 0.0_f64;
    for i in 0..k {
        let term = ((n - i) as f64 / (i + 1) as f64).log2();
        let y = term - comp;
        let t = acc + y;
        comp = (t - acc) - y;
        acc = t;
    }
    acc
}

fn log2_binomial_lgamma(n: u64, k: u64) -> f64 {
    let n = n as f64;
    let k = k as f64;
    (ln_gamma(n + 1.0) - ln_gamma(k + 1.0) - ln_gamma(n - k + 1.0)) / std::f64::consts::LN_2
}

/// log2 of the binomial coefficient C(n, k), accurate to 1e-9 relative.
pub fn log2_binomial(n: u64, k: u64) -> f64 {
    assert!(k <= n, "log2_binomial: k={k} exceeds n={n}");
    let k = k.min(n - k);
    if k == 0 {
        0.0
    } else if k <= LOG2_BINOM_SUM_LIMIT {
        log2_binomial_sum(n, k)
    } else {
        log2_binomial_lgamma(n, k)
    }
}

// --- tests ---------------------------------------------------------------
