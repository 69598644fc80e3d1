//! Shared domain types: priors over experts, played weights, densities with
//! respect to the prior, and loss bookkeeping.
//!
//! Experts are indexed `0..n`. Any order statistic over experts breaks ties
//! by the smallest index.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `Σ w = 1` accepted by [`WeightVector`] and [`DensityVector`].
pub const SIMPLEX_TOL: f64 = 1e-9;

/// A finite nonnegative base measure over experts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Prior {
    masses: Vec<f64>,
    total_mass: f64,
    min_positive_mass: f64,
}

impl Prior {
    pub fn new(masses: Vec<f64>) -> Result<Self> {
        if masses.is_empty() {
            return Err(Error::InvalidPrior("no experts".into()));
        }
        if let Some(i) = masses.iter().position(|m| !m.is_finite() || *m < 0.0) {
            return Err(Error::InvalidPrior(format!(
                "mass {} at expert {i} is not a finite nonnegative number",
                masses[i]
            )));
        }
        let min_positive_mass = masses
            .iter()
            .copied()
            .filter(|&m| m > 0.0)
            .fold(f64::INFINITY, f64::min);
        if !min_positive_mass.is_finite() {
            return Err(Error::InvalidPrior("all masses are zero".into()));
        }
        let total_mass = masses.iter().sum();
        Ok(Self {
            masses,
            total_mass,
            min_positive_mass,
        })
    }

    /// Uniform probability measure, mass `1/n` on each expert.
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidPrior("no experts".into()));
        }
        Self::new(vec![1.0 / n as f64; n])
    }

    /// Counting measure, mass `1` on each expert.
    pub fn counting(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidPrior("no experts".into()));
        }
        Self::new(vec![1.0; n])
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn mass(&self, i: usize) -> f64 {
        self.masses[i]
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn min_positive_mass(&self) -> f64 {
        self.min_positive_mass
    }

    /// Upper end of the density domain, `1/ν̲`.
    pub fn density_upper_bound(&self) -> f64 {
        1.0 / self.min_positive_mass
    }

    /// The prior rescaled to a probability measure.
    pub fn normalized(&self) -> Vec<f64> {
        self.masses.iter().map(|m| m / self.total_mass).collect()
    }

    pub fn is_probability(&self) -> bool {
        (self.total_mass - 1.0).abs() <= 1e-12
    }
}

impl TryFrom<Vec<f64>> for Prior {
    type Error = Error;

    fn try_from(masses: Vec<f64>) -> Result<Self> {
        Prior::new(masses)
    }
}

impl From<Prior> for Vec<f64> {
    fn from(p: Prior) -> Self {
        p.masses
    }
}

/// A probability vector over experts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidArgument("empty weight vector".into()));
        }
        if let Some(i) = weights.iter().position(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidArgument(format!(
                "weight {} at expert {i} is negative or non-finite",
                weights[i]
            )));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::Normalization { sum });
        }
        Ok(Self(weights))
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "uniform weights over zero experts");
        Self(vec![1.0 / n as f64; n])
    }

    pub fn one_hot(n: usize, index: usize) -> Self {
        assert!(index < n, "one-hot index out of range");
        let mut w = vec![0.0; n];
        w[index] = 1.0;
        Self(w)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for WeightVector {
    type Error = Error;

    fn try_from(w: Vec<f64>) -> Result<Self> {
        WeightVector::new(w)
    }
}

impl From<WeightVector> for Vec<f64> {
    fn from(w: WeightVector) -> Self {
        w.0
    }
}

impl std::ops::Index<usize> for WeightVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Densities `x_i = w_i / ν_i` of a played distribution with respect to a prior.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityVector(Vec<f64>);

impl DensityVector {
    /// Validates `x` against `prior`: nonnegative, bounded by `1/ν̲`, and
    /// integrating to one.
    pub fn new(prior: &Prior, densities: Vec<f64>) -> Result<Self> {
        if densities.len() != prior.len() {
            return Err(Error::LengthMismatch {
                expected: prior.len(),
                actual: densities.len(),
            });
        }
        let upper = prior.density_upper_bound() + SIMPLEX_TOL;
        if let Some(i) = densities
            .iter()
            .position(|x| !x.is_finite() || *x < 0.0 || *x > upper)
        {
            return Err(Error::InvalidDensity(format!(
                "density {} at expert {i} is outside [0, {upper}]",
                densities[i]
            )));
        }
        let sum = integrate(prior, &densities);
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::Normalization { sum });
        }
        Ok(Self(densities))
    }

    pub(crate) fn from_raw(densities: Vec<f64>) -> Self {
        Self(densities)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn integrate(prior: &Prior, densities: &[f64]) -> f64 {
    prior
        .masses()
        .iter()
        .zip(densities)
        .filter(|(m, _)| **m > 0.0)
        .map(|(m, x)| m * x)
        .sum()
}

/// `w_i = ν_i x_i`. Experts with zero prior mass receive weight zero.
pub fn weights_from_densities(prior: &Prior, x: &DensityVector) -> Result<WeightVector> {
    if x.len() != prior.len() {
        return Err(Error::LengthMismatch {
            expected: prior.len(),
            actual: x.len(),
        });
    }
    let w = prior
        .masses()
        .iter()
        .zip(x.as_slice())
        .map(|(&m, &xi)| if m > 0.0 { m * xi } else { 0.0 })
        .collect();
    WeightVector::new(w)
}

/// `x_i = w_i / ν_i`; requires `w_i = 0` wherever `ν_i = 0`.
pub fn densities_from_weights(prior: &Prior, w: &WeightVector) -> Result<DensityVector> {
    if w.len() != prior.len() {
        return Err(Error::LengthMismatch {
            expected: prior.len(),
            actual: w.len(),
        });
    }
    let mut x = Vec::with_capacity(w.len());
    for (i, (&m, &wi)) in prior.masses().iter().zip(w.as_slice()).enumerate() {
        if m > 0.0 {
            x.push(wi / m);
        } else if wi > 0.0 {
            return Err(Error::AbsoluteContinuity(i));
        } else {
            x.push(0.0);
        }
    }
    DensityVector::new(prior, x)
}

/// `⟨ℓ, w⟩`, the loss incurred by playing `w`.
pub fn mixture_loss(w: &WeightVector, loss: &[f64]) -> Result<f64> {
    if loss.len() != w.len() {
        return Err(Error::LengthMismatch {
            expected: w.len(),
            actual: loss.len(),
        });
    }
    Ok(w.as_slice().iter().zip(loss).map(|(a, b)| a * b).sum())
}

/// Prior over a disjoint union of model classes: every expert in class `m`
/// (1-based) gets mass proportional to `1 / (m² |Θ_m|)`, normalized to one.
pub fn model_selection_prior(class_sizes: &[usize]) -> Result<Prior> {
    if class_sizes.is_empty() {
        return Err(Error::InvalidArgument("no model classes".into()));
    }
    if class_sizes.contains(&0) {
        return Err(Error::InvalidArgument("model class of size zero".into()));
    }
    let mut masses = Vec::with_capacity(class_sizes.iter().sum());
    for (m, &size) in class_sizes.iter().enumerate() {
        let m = (m + 1) as f64;
        let mass = 1.0 / (m * m * size as f64);
        masses.extend(std::iter::repeat_n(mass, size));
    }
    let total: f64 = masses.iter().sum();
    masses.iter_mut().for_each(|m| *m /= total);
    Prior::new(masses)
}

/// Per-round losses and their running sums `L_t(i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LossRecord {
    history: Option<Vec<Vec<f64>>>,
    cumulative: Vec<f64>,
    rounds: usize,
}

impl LossRecord {
    /// Keeps every round's loss vector in memory.
    pub fn with_history(n: usize) -> Self {
        Self {
            history: Some(Vec::new()),
            cumulative: vec![0.0; n],
            rounds: 0,
        }
    }

    /// Keeps only the running sums.
    pub fn cumulative_only(n: usize) -> Self {
        Self {
            history: None,
            cumulative: vec![0.0; n],
            rounds: 0,
        }
    }

    /// Appends one round. With `check_range`, entries outside `[0,1]` are rejected.
    pub fn push(&mut self, loss: &[f64], check_range: bool) -> Result<()> {
        if loss.len() != self.cumulative.len() {
            return Err(Error::LengthMismatch {
                expected: self.cumulative.len(),
                actual: loss.len(),
            });
        }
        for (i, &l) in loss.iter().enumerate() {
            if !l.is_finite() {
                return Err(Error::NonFinite(format!(
                    "loss at round {}, expert {i}",
                    self.rounds + 1
                )));
            }
            if check_range && !(0.0..=1.0).contains(&l) {
                return Err(Error::LossOutOfRange {
                    round: self.rounds + 1,
                    expert: i,
                    value: l,
                });
            }
        }
        for (c, l) in self.cumulative.iter_mut().zip(loss) {
            *c += l;
        }
        if let Some(h) = self.history.as_mut() {
            h.push(loss.to_vec());
        }
        self.rounds += 1;
        Ok(())
    }

    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn per_round(&self) -> Option<&[Vec<f64>]> {
        self.history.as_deref()
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn num_experts(&self) -> usize {
        self.cumulative.len()
    }
}

/// Target of a regret measurement.
#[derive(Debug, Clone, PartialEq)]
pub enum Comparator {
    /// A fixed distribution `q` over experts.
    Distribution(WeightVector),
    /// Point mass on the `i_ε`-th best expert by final cumulative loss (1-based).
    Quantile(usize),
}

impl Comparator {
    pub fn quantile(i_eps: usize, n: usize) -> Result<Self> {
        if i_eps == 0 || i_eps > n {
            return Err(Error::IndexOutOfRange { index: i_eps, n });
        }
        Ok(Comparator::Quantile(i_eps))
    }

    /// `ε = i_ε / N` for quantile comparators.
    pub fn epsilon(&self, n: usize) -> Option<f64> {
        match self {
            Comparator::Quantile(i) => Some(*i as f64 / n as f64),
            Comparator::Distribution(_) => None,
        }
    }
}

/// Expert indices sorted by ascending loss, ties by index.
pub fn rank_experts(cumulative: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..cumulative.len()).collect();
    idx.sort_by(|&a, &b| cumulative[a].total_cmp(&cumulative[b]).then(a.cmp(&b)));
    idx
}
