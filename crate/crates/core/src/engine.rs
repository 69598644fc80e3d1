//! The online loop: learning-rate schedules and FTRL sessions.
//!
//! A [`Session`] alternates [`Session::predict`] and [`Session::update`].
//! Round `t` plays
//!
//! ```text
//! w_t = ν · [f′]⁻¹(τ(k* − η_t L_{t−1}))
//! ```
//!
//! using only the losses of rounds `< t`.

use serde::{Deserialize, Serialize};

use crate::domain::{mixture_loss, weights_from_densities, LossRecord, Prior, WeightVector};
use crate::environments::LossSource;
use crate::error::{Error, Result};
use crate::metrics::RegretTrajectory;
use crate::regularizers::DivergenceGenerator;
use crate::solver::{normalized_densities, SolveReport, DEFAULT_TOL};

/// `c` in `η_t = c/√t` for the root-log generator: `√(c₂)` with `c₂ = 1/√2`.
pub const ABNORMAL_SCALE: f64 = 0.840_896_415_253_714_5;

/// `c` in `η_t = c/√t` for CARL.
pub const CARL_SCALE: f64 = 2.0;

/// Which distribution the variance-adaptive schedule measures variance under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceMode {
    /// Variance under the normalized prior `ν/ν(Θ)`. Requires `1/f″ ≤ C`.
    Prior,
    /// Variance under the played weights `w_s`, standing in for the
    /// intermediate iterates of the `1/f″(x) ≤ Cx` analysis, which the
    /// learner never observes.
    Played,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleKind {
    /// `η_t = c/√t`.
    InverseRoot { c: f64 },
    /// `η_t = 2/√t`. A struct variant so stray keys are rejected.
    CarlDefault {},
    /// `η_t = m·√(log N / t)`, with `log N` floored at `log 2`.
    HedgeDefault {
        #[serde(default = "default_multiplier")]
        multiplier: f64,
    },
    VarianceAdaptive { c: f64, mode: VarianceMode },
}

fn default_multiplier() -> f64 {
    1.0
}

/// A learning-rate schedule together with its accumulated state.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    kind: ScheduleKind,
    // Σ_{s ≤ t} Var ℓ_s, and the most recent term, so that the played mode
    // can use the sum up to t − 1.
    variance_sum: f64,
    last_variance: f64,
}

impl Schedule {
    pub fn new(kind: ScheduleKind) -> Result<Self> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!(
                    "{name} must be finite and positive, got {v}"
                )))
            }
        };
        match kind {
            ScheduleKind::InverseRoot { c } => positive("c", c)?,
            ScheduleKind::CarlDefault {} => {}
            ScheduleKind::HedgeDefault { multiplier } => positive("multiplier", multiplier)?,
            ScheduleKind::VarianceAdaptive { c, .. } => positive("c", c)?,
        }
        Ok(Self {
            kind,
            variance_sum: 0.0,
            last_variance: 0.0,
        })
    }

    pub fn inverse_root(c: f64) -> Result<Self> {
        Self::new(ScheduleKind::InverseRoot { c })
    }

    /// `η_t = 2^{−1/4}/√t`, the tuning used with the root-log generator.
    pub fn abnormal() -> Self {
        Self::new(ScheduleKind::InverseRoot { c: ABNORMAL_SCALE }).expect("valid constant")
    }

    pub fn carl() -> Self {
        Self::new(ScheduleKind::CarlDefault {}).expect("valid constant")
    }

    pub fn hedge() -> Self {
        Self::new(ScheduleKind::HedgeDefault { multiplier: 1.0 }).expect("valid constant")
    }

    pub fn kind(&self) -> ScheduleKind {
        self.kind
    }

    /// `η_t` for round `t ≥ 1`.
    pub fn eta(&self, t: usize, prior: &Prior) -> f64 {
        assert!(t >= 1, "rounds are numbered from 1");
        let t = t as f64;
        match self.kind {
            ScheduleKind::InverseRoot { c } => c / t.sqrt(),
            ScheduleKind::CarlDefault {} => CARL_SCALE / t.sqrt(),
            ScheduleKind::HedgeDefault { multiplier } => {
                let log_n = (prior.len().max(2) as f64).ln();
                multiplier * (log_n / t).sqrt()
            }
            ScheduleKind::VarianceAdaptive { c, mode } => {
                let accumulated = match mode {
                    VarianceMode::Prior => self.variance_sum,
                    VarianceMode::Played => self.variance_sum - self.last_variance,
                };
                variance_adaptive_eta(c, prior.total_mass(), mode, accumulated.max(0.0))
            }
        }
    }

    /// Advances the variance state with round loss `loss` played under `played`.
    pub fn observe(&mut self, loss: &[f64], played: &WeightVector, prior: &Prior) {
        if let ScheduleKind::VarianceAdaptive { mode, .. } = self.kind {
            let v = match mode {
                VarianceMode::Prior => {
                    let total = prior.total_mass();
                    let probs: Vec<f64> = prior.masses().iter().map(|m| m / total).collect();
                    variance(&probs, loss)
                }
                VarianceMode::Played => variance(played.as_slice(), loss),
            };
            self.variance_sum += v;
            self.last_variance = v;
        }
    }
}

fn variance(probs: &[f64], values: &[f64]) -> f64 {
    let mean: f64 = probs.iter().zip(values).map(|(p, v)| p * v).sum();
    probs
        .iter()
        .zip(values)
        .map(|(p, v)| p * (v - mean) * (v - mean))
        .sum::<f64>()
        .max(0.0)
}

/// Variance-adaptive scale from the accumulated variance.
///
/// * `Prior`: `(C·ν(Θ)·[1/4 + V])^{−1/2}`.
/// * `Played`: `(C·[1/2 + V])^{−1/2}`.
pub fn variance_adaptive_eta(c: f64, total_mass: f64, mode: VarianceMode, accumulated: f64) -> f64 {
    match mode {
        VarianceMode::Prior => 1.0 / (c * total_mass * (0.25 + accumulated)).sqrt(),
        VarianceMode::Played => 1.0 / (c * (0.5 + accumulated)).sqrt(),
    }
}

/// Anything that plays a distribution over experts and learns from full-information losses.
pub trait Learner {
    fn num_experts(&self) -> usize;

    /// Distribution for the current round. Calling it twice in one round
    /// returns the same weights.
    fn predict(&mut self) -> Result<WeightVector>;

    /// Ingests the current round's losses and returns the realized mixture loss.
    fn update(&mut self, loss: &[f64]) -> Result<f64>;

    /// Diagnostics of the most recent normalization, for solver-backed learners.
    fn solve_report(&self) -> Option<SolveReport> {
        None
    }
}

/// Linearly decomposable FTRL over a finite expert set.
#[derive(Debug, Clone)]
pub struct Session {
    gen: DivergenceGenerator,
    prior: Prior,
    schedule: Schedule,
    losses: LossRecord,
    strict: bool,
    tol: f64,
    current: Option<WeightVector>,
    last_report: Option<SolveReport>,
    scaled: Vec<f64>,
}

impl Session {
    /// Fails when `gen` cannot serve `prior` (CARL needs the counting measure
    /// over exactly `n` experts).
    pub fn new(gen: DivergenceGenerator, prior: Prior, schedule: Schedule) -> Result<Self> {
        let gen = gen.for_prior(&prior)?;
        let n = prior.len();
        Ok(Self {
            gen,
            prior,
            schedule,
            losses: LossRecord::cumulative_only(n),
            strict: true,
            tol: DEFAULT_TOL,
            current: None,
            last_report: None,
            scaled: vec![0.0; n],
        })
    }

    /// Whether `update` rejects losses outside `[0, 1]` (default `true`).
    pub fn with_strict(mut self, strict: bool) -> Self {
        self.strict = strict;
        self
    }

    /// Residual tolerance for the normalization solve.
    pub fn with_tolerance(mut self, tol: f64) -> Result<Self> {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "tolerance must be positive, got {tol}"
            )));
        }
        self.tol = tol;
        Ok(self)
    }

    pub fn prior(&self) -> &Prior {
        &self.prior
    }

    pub fn generator(&self) -> &DivergenceGenerator {
        &self.gen
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    /// Number of completed rounds.
    pub fn rounds(&self) -> usize {
        self.losses.rounds()
    }

    pub fn cumulative_losses(&self) -> &[f64] {
        self.losses.cumulative()
    }

    /// `η_t` for the round about to be played.
    pub fn eta(&self) -> f64 {
        self.schedule.eta(self.rounds() + 1, &self.prior)
    }

    pub fn last_report(&self) -> Option<&SolveReport> {
        self.last_report.as_ref()
    }

    pub fn predict(&mut self) -> Result<WeightVector> {
        if let Some(w) = &self.current {
            return Ok(w.clone());
        }
        let eta = self.eta();
        for (s, l) in self.scaled.iter_mut().zip(self.losses.cumulative()) {
            *s = eta * l;
        }
        let (x, report) = normalized_densities(&self.gen, &self.prior, &self.scaled, self.tol)?;
        let w = weights_from_densities(&self.prior, &x).or_else(|_| renormalize(&self.prior, &x))?;
        self.last_report = Some(report);
        self.current = Some(w.clone());
        Ok(w)
    }

    pub fn update(&mut self, loss: &[f64]) -> Result<f64> {
        let w = self
            .current
            .take()
            .ok_or(Error::UpdateBeforePredict(self.rounds() + 1))?;
        let realized = match mixture_loss(&w, loss) {
            Ok(v) => v,
            Err(e) => {
                self.current = Some(w);
                return Err(e);
            }
        };
        if let Err(e) = self.losses.push(loss, self.strict) {
            self.current = Some(w);
            return Err(e);
        }
        self.schedule.observe(loss, &w, &self.prior);
        Ok(realized)
    }
}

// Weights from a solve that met a loose user tolerance may miss the simplex
// check; rescale them instead of failing.
fn renormalize(prior: &Prior, x: &crate::domain::DensityVector) -> Result<WeightVector> {
    let raw: Vec<f64> = prior
        .masses()
        .iter()
        .zip(x.as_slice())
        .map(|(&m, &xi)| if m > 0.0 { m * xi } else { 0.0 })
        .collect();
    let sum: f64 = raw.iter().sum();
    if !(sum > 0.0 && sum.is_finite()) {
        return Err(Error::Normalization { sum });
    }
    WeightVector::new(raw.into_iter().map(|w| w / sum).collect())
}

impl Learner for Session {
    fn num_experts(&self) -> usize {
        self.prior.len()
    }

    fn predict(&mut self) -> Result<WeightVector> {
        Session::predict(self)
    }

    fn update(&mut self, loss: &[f64]) -> Result<f64> {
        Session::update(self, loss)
    }

    fn solve_report(&self) -> Option<SolveReport> {
        self.last_report
    }
}

/// Plays `learner` through every round of `source`.
///
/// `observe(t, w_t, ℓ_t, learner)` runs after each update, with `t` 1-based.
pub fn play<L, S, F>(learner: &mut L, source: &S, mut observe: F) -> Result<RegretTrajectory>
where
    L: Learner + ?Sized,
    S: LossSource + ?Sized,
    F: FnMut(usize, &WeightVector, &[f64], &L) -> Result<()>,
{
    let n = source.experts();
    if learner.num_experts() != n {
        return Err(Error::LengthMismatch {
            expected: learner.num_experts(),
            actual: n,
        });
    }
    let mut traj = RegretTrajectory::new(n);
    let mut loss = vec![0.0; n];
    for t in 0..source.rounds() {
        source.fill_round(t, &mut loss);
        let w = learner.predict()?;
        let m = learner.update(&loss)?;
        traj.push(m, &loss)?;
        observe(t + 1, &w, &loss, learner)?;
    }
    Ok(traj)
}
