//! Divergence generators `f` for the regularizer `D_f(x) = Σ ν_i f(x_i)`.
//!
//! Each generator exposes `f`, `f′`, `f″`, the inverse derivative, and the
//! derivative range `[m_{f′}, M_{f′}]` over its domain `[0, upper]`. The
//! truncation `τ(y) = max(min(y, M), m)` is applied by [`DivergenceGenerator::inv_deriv`]
//! so that the inverse is total on `ℝ`.

use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::domain::Prior;
use crate::error::{Error, Result};
use crate::special::{dawson, erf};

/// Which scalar function generates the regularizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorKind {
    /// `f(x) = x log x`; FTRL with this generator is Hedge.
    Shannon,
    /// `f(x) = x² − 1`.
    ChiSquared,
    /// `f(x) = ∫₁ˣ √(2 log(1+s)) ds`.
    RootLog,
    /// `f = −h_B` on `[0, 1]` for `n` experts under counting measure.
    Carl { n: usize },
}

/// A strictly convex generator restricted to the density domain `[0, upper]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivergenceGenerator {
    kind: GeneratorKind,
    upper: f64,
}

pub fn make_shannon() -> DivergenceGenerator {
    DivergenceGenerator {
        kind: GeneratorKind::Shannon,
        upper: f64::INFINITY,
    }
}

pub fn make_chi_squared() -> DivergenceGenerator {
    DivergenceGenerator {
        kind: GeneratorKind::ChiSquared,
        upper: f64::INFINITY,
    }
}

pub fn make_root_log() -> DivergenceGenerator {
    DivergenceGenerator {
        kind: GeneratorKind::RootLog,
        upper: f64::INFINITY,
    }
}

pub fn make_carl(n: usize) -> Result<DivergenceGenerator> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "CARL needs at least two experts, got {n}"
        )));
    }
    Ok(DivergenceGenerator {
        kind: GeneratorKind::Carl { n },
        upper: 1.0,
    })
}

/// `√(π/2)`
pub const SQRT_FRAC_PI_2: f64 = 1.253_314_137_315_500_3;

/// `h_A(x) = x √(2 log(1/x))`, with `h_A(0) = 0`.
pub fn h_a(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * (2.0 * (-x.ln()).max(0.0)).sqrt()
    }
}

/// `h_B(x) = x√(2 log(1/x)) − √(π/2)·erf(√log(1/x)) + x(n−1)√(π/2)`, with `h_B(0) = −√(π/2)`.
pub fn h_b(x: f64, n: usize) -> f64 {
    if x <= 0.0 {
        return -SQRT_FRAC_PI_2;
    }
    let l = (-x.ln()).max(0.0);
    x * (2.0 * l).sqrt() - SQRT_FRAC_PI_2 * erf(l.sqrt()) + x * (n as f64 - 1.0) * SQRT_FRAC_PI_2
}

// Antiderivative of √(2 log v):  v√(2 log v) − √(π/2)·erfi(√log v),
// written as v(√(2L) − √2·D(√L)) so it does not overflow for large v.
fn rootlog_antiderivative(log_v: f64) -> f64 {
    let v = log_v.exp();
    v * ((2.0 * log_v).sqrt() - SQRT_2 * dawson(log_v.sqrt()))
}

impl DivergenceGenerator {
    pub fn kind(&self) -> GeneratorKind {
        self.kind
    }

    /// Upper end of the domain (`+∞` when unrestricted).
    pub fn upper(&self) -> f64 {
        self.upper
    }

    /// The same generator on `[0, min(upper, 1/ν̲)]`.
    ///
    /// Fails when the prior's atoms are lighter than the generator's domain
    /// allows (CARL needs `ν̲ ≥ 1`).
    pub fn for_prior(&self, prior: &Prior) -> Result<Self> {
        let needed = prior.density_upper_bound();
        match self.kind {
            GeneratorKind::Carl { n } => {
                if needed > self.upper * (1.0 + 1e-12) {
                    return Err(Error::Domain(format!(
                        "CARL is defined on [0, 1] but the prior needs densities up to {needed}"
                    )));
                }
                if n != prior.len() {
                    return Err(Error::LengthMismatch {
                        expected: n,
                        actual: prior.len(),
                    });
                }
                Ok(*self)
            }
            _ => Ok(Self {
                kind: self.kind,
                upper: self.upper.min(needed),
            }),
        }
    }

    /// `f(x)`.
    pub fn value(&self, x: f64) -> f64 {
        match self.kind {
            GeneratorKind::Shannon => {
                if x == 0.0 {
                    0.0
                } else {
                    x * x.ln()
                }
            }
            GeneratorKind::ChiSquared => x * x - 1.0,
            GeneratorKind::RootLog => {
                rootlog_antiderivative(x.ln_1p()) - rootlog_antiderivative(std::f64::consts::LN_2)
            }
            GeneratorKind::Carl { n } => -h_b(x, n),
        }
    }

    /// `f′(x)`; may be `−∞` at `x = 0`.
    pub fn deriv(&self, x: f64) -> f64 {
        match self.kind {
            GeneratorKind::Shannon => 1.0 + x.ln(),
            GeneratorKind::ChiSquared => 2.0 * x,
            GeneratorKind::RootLog => (2.0 * x.ln_1p()).sqrt(),
            GeneratorKind::Carl { n } => {
                -(2.0 * (-x.ln()).max(0.0)).sqrt() - carl_offset(n)
            }
        }
    }

    /// `f″(x)` for `x` in the interior of the domain.
    pub fn second_deriv(&self, x: f64) -> f64 {
        match self.kind {
            GeneratorKind::Shannon => 1.0 / x,
            GeneratorKind::ChiSquared => 2.0,
            GeneratorKind::RootLog => 1.0 / ((1.0 + x) * (2.0 * x.ln_1p()).sqrt()),
            GeneratorKind::Carl { .. } => 1.0 / h_a(x),
        }
    }

    /// `m_{f′} = inf f′` over the domain.
    pub fn deriv_min(&self) -> f64 {
        match self.kind {
            GeneratorKind::Shannon | GeneratorKind::Carl { .. } => f64::NEG_INFINITY,
            GeneratorKind::ChiSquared | GeneratorKind::RootLog => 0.0,
        }
    }

    /// `M_{f′} = sup f′` over the domain, i.e. `f′(upper)`.
    pub fn deriv_max(&self) -> f64 {
        if self.upper.is_infinite() {
            f64::INFINITY
        } else {
            self.deriv(self.upper)
        }
    }

    /// `τ_{f′}(y)`: clamps `y` into `[m_{f′}, M_{f′}]`.
    pub fn clamp_deriv(&self, y: f64) -> f64 {
        y.min(self.deriv_max()).max(self.deriv_min())
    }

    /// `[f′]⁻¹(τ_{f′}(y))`.
    pub fn inv_deriv(&self, y: f64) -> f64 {
        let max = self.deriv_max();
        if y >= max {
            return self.upper;
        }
        self.inv_deriv_interior(y.max(self.deriv_min()))
    }

    /// `[f′]⁻¹(y)` for `y` already inside `[m_{f′}, M_{f′})`.
    pub(crate) fn inv_deriv_interior(&self, y: f64) -> f64 {
        match self.kind {
            GeneratorKind::Shannon => (y - 1.0).exp(),
            GeneratorKind::ChiSquared => 0.5 * y,
            GeneratorKind::RootLog => (0.5 * y * y).exp_m1(),
            GeneratorKind::Carl { n } => {
                let z = y + carl_offset(n);
                (-0.5 * z * z).exp()
            }
        }
    }

    /// One-dimensional Bregman divergence `f(x) − f(y) − f′(y)(x − y)`.
    pub fn bregman(&self, x: f64, y: f64) -> Result<f64> {
        for (name, v) in [("x", x), ("y", y)] {
            if !(v >= 0.0 && v <= self.upper) {
                return Err(Error::Domain(format!(
                    "{name} = {v} outside [0, {}]",
                    self.upper
                )));
            }
        }
        let slope = self.deriv(y);
        if !slope.is_finite() {
            return Err(Error::Domain(format!(
                "f′ diverges at y = {y}; y must be interior"
            )));
        }
        if x == y {
            return Ok(0.0);
        }
        Ok((self.value(x) - self.value(y) - slope * (x - y)).max(0.0))
    }
}

/// `(n − 1)√(π/2)`, the constant carried in CARL's derivative.
fn carl_offset(n: usize) -> f64 {
    (n as f64 - 1.0) * SQRT_FRAC_PI_2
}
