//! Special functions used by the regularizers and the bound evaluators.
//!
//! * `erf`/`erfc`: the all-positive series `erf(x) = 2/√π · e^{-x²} Σ 2ⁿx^{2n+1}/(2n+1)!!`
//!   for `|x| < 3`, and the Laplace continued fraction for `erfc` beyond that,
//!   evaluated with the modified Lentz algorithm.
//! * `dawson`: Rybicki's sampling formula with step `h = 0.2`, giving a
//!   discretization error of order `exp(-(π/2h)²)`.
//! * `erfi(x) = 2/√π · e^{x²} D(x)`.
//! * `normal_tail` / `normal_tail_inverse`: upper tail of the standard normal.
//! * `adaptive_integral`: adaptive Simpson quadrature with Richardson correction.
//!
//! Non-finite inputs propagate: NaN in gives NaN out, and infinities map to
//! the corresponding limits.

use crate::error::{Error, Result};

const FRAC_2_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;
const SQRT_2: f64 = std::f64::consts::SQRT_2;
/// 1/√π
const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;

const SERIES_CUTOFF: f64 = 3.0;

/// Error function.
pub fn erf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    let ax = x.abs();
    let v = if ax < SERIES_CUTOFF {
        erf_series(ax)
    } else {
        1.0 - erfc_continued_fraction(ax)
    };
    v.copysign(x)
}

/// Complementary error function `1 - erf(x)`, accurate in relative terms for large `x`.
pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    if x < SERIES_CUTOFF {
        // erfc(3) ≈ 2e-5, so subtracting from one keeps ~11 significant digits.
        1.0 - erf_series(x)
    } else {
        erfc_continued_fraction(x)
    }
}

fn erf_series(x: f64) -> f64 {
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut n = 0.0;
    loop {
        n += 1.0;
        term *= 2.0 * x2 / (2.0 * n + 1.0);
        sum += term;
        if term <= sum * 1e-17 {
            break;
        }
    }
    FRAC_2_SQRT_PI * (-x2).exp() * sum
}

// erfc(x) = e^{-x²}/√π · 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
fn erfc_continued_fraction(x: f64) -> f64 {
    if x.is_infinite() {
        return 0.0;
    }
    const TINY: f64 = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for k in 1..500 {
        let a = k as f64 / 2.0;
        d = x + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = x + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x * x).exp() * FRAC_1_SQRT_PI / f
}

const DAWSON_STEP: f64 = 0.2;
const DAWSON_TERMS: usize = 16;

/// Dawson's integral `D(x) = e^{-x²} ∫₀ˣ e^{t²} dt`.
pub fn dawson(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    let ax = x.abs();
    if ax.is_infinite() {
        return 0.0_f64.copysign(x);
    }
    if ax < 0.2 {
        // D(x) = Σ (-1)ⁿ 2ⁿ x^{2n+1} / (2n+1)!!
        let x2 = x * x;
        let mut term = x;
        let mut sum = x;
        for n in 1..20 {
            term *= -2.0 * x2 / (2 * n + 1) as f64;
            sum += term;
        }
        return sum;
    }
    if ax > 1e8 {
        // Asymptotic 1/(2x) + 1/(4x³); the sampling sum loses precision here.
        return (0.5 / ax + 0.25 / (ax * ax * ax)).copysign(x);
    }
    let h = DAWSON_STEP;
    let n0 = 2.0 * (0.5 * ax / h).round();
    let xp = ax - n0 * h;
    let mut e1 = (2.0 * xp * h).exp();
    let e2 = e1 * e1;
    let mut d1 = n0 + 1.0;
    let mut d2 = d1 - 2.0;
    let mut sum = 0.0;
    for i in 0..DAWSON_TERMS {
        let c = (-(((2 * i + 1) as f64) * h).powi(2)).exp();
        sum += c * (e1 / d1 + 1.0 / (d2 * e1));
        d1 += 2.0;
        d2 -= 2.0;
        e1 *= e2;
    }
    (FRAC_1_SQRT_PI * (-xp * xp).exp() * sum).copysign(x)
}

/// Imaginary error function `erfi(x) = -i·erf(ix)`.
pub fn erfi(x: f64) -> f64 {
    FRAC_2_SQRT_PI * (x * x).exp() * dawson(x)
}

/// Standard normal upper tail `Φ̄(x) = 1 - Φ(x)`.
pub fn normal_tail(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

// Rational approximation to the normal quantile (P. J. Acklam), relative
// error about 1.15e-9; refined below by Newton steps on `normal_tail`.
const ACKLAM_A: [f64; 6] = [
    -3.969_683_028_665_376e1,
    2.209_460_984_245_205e2,
    -2.759_285_104_469_687e2,
    1.383_577_518_672_69e2,
    -3.066_479_806_614_716e1,
    2.506_628_277_459_239,
];
const ACKLAM_B: [f64; 5] = [
    -5.447_609_879_822_406e1,
    1.615_858_368_580_409e2,
    -1.556_989_798_598_866e2,
    6.680_131_188_771_972e1,
    -1.328_068_155_288_572e1,
];
const ACKLAM_C: [f64; 6] = [
    -7.784_894_002_430_293e-3,
    -3.223_964_580_411_365e-1,
    -2.400_758_277_161_838,
    -2.549_732_539_343_734,
    4.374_664_141_464_968,
    2.938_163_982_698_783,
];
const ACKLAM_D: [f64; 4] = [
    7.784_695_709_041_462e-3,
    3.224_671_290_700_398e-1,
    2.445_134_137_142_996,
    3.754_408_661_907_416,
];

fn acklam_quantile(p: f64) -> f64 {
    let p_low = 0.02425;
    if p < p_low {
        let q = (-2.0 * p.ln()).sqrt();
        (((((ACKLAM_C[0] * q + ACKLAM_C[1]) * q + ACKLAM_C[2]) * q + ACKLAM_C[3]) * q
            + ACKLAM_C[4])
            * q
            + ACKLAM_C[5])
            / ((((ACKLAM_D[0] * q + ACKLAM_D[1]) * q + ACKLAM_D[2]) * q + ACKLAM_D[3]) * q + 1.0)
    } else if p <= 1.0 - p_low {
        let q = p - 0.5;
        let r = q * q;
        (((((ACKLAM_A[0] * r + ACKLAM_A[1]) * r + ACKLAM_A[2]) * r + ACKLAM_A[3]) * r
            + ACKLAM_A[4])
            * r
            + ACKLAM_A[5])
            * q
            / (((((ACKLAM_B[0] * r + ACKLAM_B[1]) * r + ACKLAM_B[2]) * r + ACKLAM_B[3]) * r
                + ACKLAM_B[4])
                * r
                + 1.0)
    } else {
        -acklam_quantile(1.0 - p)
    }
}

/// Inverse of [`normal_tail`]: the `x` with `Φ̄(x) = y`, for `y ∈ (0, 1)`.
pub fn normal_tail_inverse(y: f64) -> Result<f64> {
    if !(y > 0.0 && y < 1.0) {
        return Err(Error::Domain(format!(
            "normal_tail_inverse requires y in (0, 1), got {y}"
        )));
    }
    if y == 0.5 {
        return Ok(0.0);
    }
    // Φ̄(x) = y  ⇔  Φ(-x) = y
    let mut x = -acklam_quantile(y);
    for _ in 0..3 {
        let pdf = normal_pdf(x);
        if pdf == 0.0 {
            break;
        }
        let step = (normal_tail(x) - y) / pdf;
        x += step;
        if step.abs() <= 1e-15 * x.abs().max(1.0) {
            break;
        }
    }
    Ok(x)
}

/// Value and error estimate of a definite integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureResult {
    pub value: f64,
    pub estimated_error: f64,
}

const MAX_DEPTH: u32 = 50;
const MAX_EVALUATIONS: usize = 2_000_000;

/// Adaptive Simpson quadrature of `integrand` over `[a, b]` to absolute tolerance `abs_tol`.
///
/// Fails with [`Error::NotConverged`] (carrying the best estimate) when some
/// subinterval cannot meet its share of the tolerance before the depth cap.
pub fn adaptive_integral<F>(integrand: F, a: f64, b: f64, abs_tol: f64) -> Result<QuadratureResult>
where
    F: Fn(f64) -> f64,
{
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::NonFinite("integration limits".into()));
    }
    if a > b {
        return Err(Error::InvalidArgument(format!(
            "integration limits out of order: {a} > {b}"
        )));
    }
    if abs_tol.is_nan() || abs_tol <= 0.0 {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    if a == b {
        return Ok(QuadratureResult {
            value: 0.0,
            estimated_error: 0.0,
        });
    }
    let fa = integrand(a);
    let fb = integrand(b);
    let m = 0.5 * (a + b);
    let fm = integrand(m);
    if !(fa.is_finite() && fb.is_finite() && fm.is_finite()) {
        return Err(Error::NonFinite("integrand value".into()));
    }
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let mut state = SimpsonState {
        error: 0.0,
        failed: false,
        evaluations: 3,
    };
    // Leave headroom for the sum of per-interval estimates.
    let value = simpson_step(&integrand, a, b, fa, fm, fb, whole, 0.5 * abs_tol, 0, &mut state);
    if state.failed || !value.is_finite() {
        return Err(Error::NotConverged {
            iterations: state.evaluations,
            estimate: value,
            residual: state.error,
        });
    }
    Ok(QuadratureResult {
        value,
        estimated_error: state.error,
    })
}

struct SimpsonState {
    error: f64,
    failed: bool,
    evaluations: usize,
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    state: &mut SimpsonState,
) -> f64
where
    F: Fn(f64) -> f64,
{
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    state.evaluations += 2;
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth >= MAX_DEPTH || state.evaluations >= MAX_EVALUATIONS || !delta.is_finite() {
        state.failed = true;
        state.error += delta.abs() / 15.0;
        return left + right + delta / 15.0;
    }
    if delta.abs() <= 15.0 * tol {
        state.error += delta.abs() / 15.0;
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1, state)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1, state)
}
