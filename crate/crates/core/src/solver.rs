//! Scalar normalization for FTRL with a linearly decomposable regularizer.
//!
//! For scaled cumulative losses `s_i = ηL_i`, the minimizer over densities is
//! `x_i = [f′]⁻¹(τ_{f′}(k − s_i))` where `k` solves
//!
//! ```text
//! g(k) = Σ_i ν_i [f′]⁻¹(τ_{f′}(k − s_i)) = 1.
//! ```
//!
//! `g` is continuous and nondecreasing, and may be flat where `τ` clamps, so
//! the root is found by bisection followed by a single secant polish. Losses
//! are shifted by their minimum before solving; `g` only depends on `k − s_i`,
//! so this keeps `k` near `f′(1/ν(Θ))` regardless of how large `ηL` grows.

use crate::domain::{DensityVector, Prior};
use crate::error::{Error, Result};
use crate::regularizers::DivergenceGenerator;

/// Default bound on `|Σ ν_i x_i − 1|`.
pub const DEFAULT_TOL: f64 = 1e-12;
/// Bisection iteration cap.
pub const MAX_ITERATIONS: usize = 200;

/// Diagnostics of one normalization solve, in unshifted coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    pub k_star: f64,
    pub residual: f64,
    pub iterations: usize,
    pub bracket: (f64, f64),
}

struct Normalization<'a> {
    gen: DivergenceGenerator,
    masses: &'a [f64],
    shifted: Vec<f64>,
    shift: f64,
    deriv_min: f64,
    deriv_max: f64,
}

impl<'a> Normalization<'a> {
    fn new(gen: &DivergenceGenerator, prior: &'a Prior, scaled_losses: &[f64]) -> Result<Self> {
        if scaled_losses.len() != prior.len() {
            return Err(Error::LengthMismatch {
                expected: prior.len(),
                actual: scaled_losses.len(),
            });
        }
        if let Some(i) = scaled_losses.iter().position(|s| !s.is_finite()) {
            return Err(Error::NonFinite(format!(
                "scaled loss {} at expert {i}",
                scaled_losses[i]
            )));
        }
        let gen = gen.for_prior(prior)?;
        let shift = scaled_losses
            .iter()
            .zip(prior.masses())
            .filter(|(_, m)| **m > 0.0)
            .map(|(s, _)| *s)
            .fold(f64::INFINITY, f64::min);
        let shifted = scaled_losses.iter().map(|s| s - shift).collect();
        Ok(Self {
            deriv_min: gen.deriv_min(),
            deriv_max: gen.deriv_max(),
            gen,
            masses: prior.masses(),
            shifted,
            shift,
        })
    }

    #[inline]
    fn density(&self, k: f64, s: f64) -> f64 {
        let y = k - s;
        if y >= self.deriv_max {
            self.gen.upper()
        } else {
            self.gen.inv_deriv_interior(y.max(self.deriv_min))
        }
    }

    /// `g(k)` in shifted coordinates.
    fn mass(&self, k: f64) -> f64 {
        let mut total = 0.0;
        for (&m, &s) in self.masses.iter().zip(&self.shifted) {
            if m > 0.0 {
                total += m * self.density(k, s);
            }
        }
        total
    }

    fn densities(&self, k: f64) -> Vec<f64> {
        self.masses
            .iter()
            .zip(&self.shifted)
            .map(|(&m, &s)| if m > 0.0 { self.density(k, s) } else { 0.0 })
            .collect()
    }

    /// Shifted bracket with `g(lo) ≤ 1 ≤ g(hi)`.
    fn bracket(&self, total_mass: f64) -> Result<(f64, f64)> {
        let mut anchor = self.gen.deriv(1.0 / total_mass);
        if !anchor.is_finite() {
            let mid = if self.gen.upper().is_finite() {
                0.5 * self.gen.upper()
            } else {
                1.0
            };
            anchor = self.gen.deriv(mid);
        }
        if !anchor.is_finite() {
            return Err(Error::Bracket(format!(
                "f′ is not finite at the bracket anchor for {:?}",
                self.gen.kind()
            )));
        }
        let spread = self
            .shifted
            .iter()
            .zip(self.masses)
            .filter(|(_, m)| **m > 0.0)
            .map(|(s, _)| *s)
            .fold(0.0, f64::max);
        let mut lo = anchor;
        let mut hi = anchor + spread;
        let mut step = 1.0_f64.max(spread);
        let mut tries = 0;
        while self.mass(lo) > 1.0 {
            lo -= step;
            step *= 2.0;
            tries += 1;
            if tries > MAX_ITERATIONS || !lo.is_finite() {
                return Err(Error::Bracket("g stays above one".into()));
            }
        }
        let mut step = 1.0_f64.max(spread);
        tries = 0;
        while self.mass(hi) < 1.0 {
            hi += step;
            step *= 2.0;
            tries += 1;
            if tries > MAX_ITERATIONS || !hi.is_finite() {
                return Err(Error::Bracket("g stays below one".into()));
            }
        }
        Ok((lo, hi))
    }
}

/// `g(k) = Σ ν_i [f′]⁻¹(τ_{f′}(k − s_i))` for unshifted `k` and scaled losses `s`.
pub fn normalization_mass(
    gen: &DivergenceGenerator,
    prior: &Prior,
    scaled_losses: &[f64],
    k: f64,
) -> Result<f64> {
    let norm = Normalization::new(gen, prior, scaled_losses)?;
    Ok(norm.mass(k - norm.shift))
}

/// Bracket `(lo, hi)` on `k` with `g(lo) ≤ 1 ≤ g(hi)`, anchored at
/// `f′(1/ν(Θ)) + ηL_min` and `f′(1/ν(Θ)) + ηL_max`.
pub fn initial_bracket(
    gen: &DivergenceGenerator,
    prior: &Prior,
    scaled_losses: &[f64],
) -> Result<(f64, f64)> {
    let norm = Normalization::new(gen, prior, scaled_losses)?;
    let (lo, hi) = norm.bracket(prior.total_mass())?;
    Ok((lo + norm.shift, hi + norm.shift))
}

/// Solves the normalization equation and returns the FTRL densities.
pub fn normalized_densities(
    gen: &DivergenceGenerator,
    prior: &Prior,
    scaled_losses: &[f64],
    tol: f64,
) -> Result<(DensityVector, SolveReport)> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let norm = Normalization::new(gen, prior, scaled_losses)?;
    let (mut lo, mut hi) = norm.bracket(prior.total_mass())?;
    let bracket = (lo + norm.shift, hi + norm.shift);

    let report = |k: f64, residual: f64, iterations: usize| SolveReport {
        k_star: k + norm.shift,
        residual,
        iterations,
        bracket,
    };

    // The minimal-loss atom saturates at 1/ν̲ once k ≥ M_{f′}; if that point
    // already normalizes, the solution is constant there.
    if norm.deriv_max.is_finite() {
        let k = norm.deriv_max;
        let residual = (norm.mass(k) - 1.0).abs();
        if residual <= tol {
            return Ok((DensityVector::from_raw(norm.densities(k)), report(k, residual, 0)));
        }
    }

    let mut g_lo = norm.mass(lo);
    let mut g_hi = norm.mass(hi);
    let mut best = if (g_lo - 1.0).abs() <= (g_hi - 1.0).abs() {
        (lo, (g_lo - 1.0).abs())
    } else {
        (hi, (g_hi - 1.0).abs())
    };
    let mut iterations = 0;
    while best.1 > tol && iterations < MAX_ITERATIONS {
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            break;
        }
        iterations += 1;
        let g_mid = norm.mass(mid);
        let r = (g_mid - 1.0).abs();
        if r < best.1 {
            best = (mid, r);
        }
        if g_mid < 1.0 {
            lo = mid;
            g_lo = g_mid;
        } else {
            hi = mid;
            g_hi = g_mid;
        }
    }

    // Secant polish on the final bracket; kept only if it lowers the residual.
    if g_hi > g_lo {
        let k = lo + (1.0 - g_lo) * (hi - lo) / (g_hi - g_lo);
        if k > lo && k < hi {
            let r = (norm.mass(k) - 1.0).abs();
            if r < best.1 {
                best = (k, r);
            }
        }
    }

    let (k, residual) = best;
    if residual > tol {
        return Err(Error::NotConverged {
            iterations,
            estimate: k + norm.shift,
            residual,
        });
    }
    Ok((
        DensityVector::from_raw(norm.densities(k)),
        report(k, residual, iterations),
    ))
}
