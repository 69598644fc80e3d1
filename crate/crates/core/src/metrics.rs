//! Regret bookkeeping, divergences between distributions, and closed-form
//! regret bounds.

use crate::domain::{rank_experts, Comparator, Prior, WeightVector};
use crate::error::{Error, Result};
use crate::regularizers::{h_a, h_b, make_shannon, DivergenceGenerator};

/// Running totals of one learner's play.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretTrajectory {
    player: Vec<f64>,
    best: Vec<f64>,
    cumulative: Vec<f64>,
}

impl RegretTrajectory {
    pub fn new(n: usize) -> Self {
        Self {
            player: Vec::new(),
            best: Vec::new(),
            cumulative: vec![0.0; n],
        }
    }

    /// Records one round: the realized mixture loss and the expert losses.
    pub fn push(&mut self, mixture: f64, loss: &[f64]) -> Result<()> {
        if loss.len() != self.cumulative.len() {
            return Err(Error::LengthMismatch {
                expected: self.cumulative.len(),
                actual: loss.len(),
            });
        }
        let prev = self.player.last().copied().unwrap_or(0.0);
        self.player.push(prev + mixture);
        let mut best = f64::INFINITY;
        for (c, l) in self.cumulative.iter_mut().zip(loss) {
            *c += l;
            best = best.min(*c);
        }
        self.best.push(best);
        Ok(())
    }

    pub fn rounds(&self) -> usize {
        self.player.len()
    }

    pub fn num_experts(&self) -> usize {
        self.cumulative.len()
    }

    /// `Σ_{s ≤ t} ⟨ℓ_s, w_s⟩` for `t = 1..=T`.
    pub fn player_cumulative(&self) -> &[f64] {
        &self.player
    }

    /// `L_T(i)` after the last recorded round.
    pub fn expert_cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn player_total(&self) -> f64 {
        self.player.last().copied().unwrap_or(0.0)
    }

    /// Regret against the best expert in hindsight after round `t` (1-based).
    pub fn best_expert_regret_at(&self, t: usize) -> Option<f64> {
        if t == 0 || t > self.rounds() {
            return None;
        }
        Some(self.player[t - 1] - self.best[t - 1])
    }

    /// Best-expert regret after every round.
    pub fn best_expert_regret(&self) -> Vec<f64> {
        self.player.iter().zip(&self.best).map(|(p, b)| p - b).collect()
    }
}

/// `Σ_t ⟨ℓ_t, w_t⟩ − Σ_t ⟨ℓ_t, q⟩` at the end of the trajectory.
pub fn regret_vs(traj: &RegretTrajectory, q: &Comparator) -> Result<f64> {
    let n = traj.num_experts();
    let comparator_loss = match q {
        Comparator::Distribution(w) => {
            if w.len() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    actual: w.len(),
                });
            }
            w.as_slice()
                .iter()
                .zip(traj.expert_cumulative())
                .map(|(a, b)| a * b)
                .sum()
        }
        Comparator::Quantile(i_eps) => {
            if *i_eps == 0 || *i_eps > n {
                return Err(Error::IndexOutOfRange { index: *i_eps, n });
            }
            let order = rank_experts(traj.expert_cumulative());
            traj.expert_cumulative()[order[i_eps - 1]]
        }
    };
    Ok(traj.player_total() - comparator_loss)
}

/// Regret against the `i_ε`-th best expert by final cumulative loss.
pub fn quantile_regret(traj: &RegretTrajectory, i_eps: usize) -> Result<f64> {
    regret_vs(traj, &Comparator::quantile(i_eps, traj.num_experts())?)
}

/// Uniform distribution over the `i_ε` experts with smallest `L_T` (ties by index).
pub fn uniform_top(cumulative: &[f64], i_eps: usize) -> Result<WeightVector> {
    let n = cumulative.len();
    if i_eps == 0 || i_eps > n {
        return Err(Error::IndexOutOfRange { index: i_eps, n });
    }
    let mut w = vec![0.0; n];
    for &i in rank_experts(cumulative).iter().take(i_eps) {
        w[i] = 1.0 / i_eps as f64;
    }
    WeightVector::new(w)
}

/// `Σ ν_i f(q_i/ν_i)` for a probability prior.
pub fn f_divergence(gen: &DivergenceGenerator, q: &WeightVector, prior: &Prior) -> Result<f64> {
    if q.len() != prior.len() {
        return Err(Error::LengthMismatch {
            expected: prior.len(),
            actual: q.len(),
        });
    }
    if !prior.is_probability() {
        return Err(Error::InvalidPrior(format!(
            "f-divergences need a probability prior, total mass is {}",
            prior.total_mass()
        )));
    }
    let mut total = 0.0;
    for (i, (&qi, &m)) in q.as_slice().iter().zip(prior.masses()).enumerate() {
        if m == 0.0 {
            if qi > 0.0 {
                return Err(Error::AbsoluteContinuity(i));
            }
            continue;
        }
        total += m * gen.value(qi / m);
    }
    Ok(total)
}

/// `KL(q ‖ ν)`.
pub fn kl_divergence(q: &WeightVector, prior: &Prior) -> Result<f64> {
    f_divergence(&make_shannon(), q, prior).map(|v| v.max(0.0))
}

/// `2√((T+1)(1 + KL)) + √(8T)`.
pub fn bound_abnormal(t: usize, kl: f64) -> f64 {
    let t = t as f64;
    2.0 * ((t + 1.0) * (1.0 + kl)).sqrt() + (8.0 * t).sqrt()
}

/// `√(2T log N)`.
pub fn bound_carl(t: usize, n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("need N ≥ 2, got {n}")));
    }
    Ok((2.0 * t as f64 * (n as f64).ln()).sqrt())
}

/// Effective-gap description of a semi-adversarial environment.
#[derive(Debug, Clone, PartialEq)]
pub struct SemiAdvProfile {
    n: usize,
    n0: usize,
    // Increasing.
    gaps: Vec<f64>,
}

impl SemiAdvProfile {
    /// `gaps` lists `Δ_i > 0` for the `N − N₀` ineffective experts, in any order.
    pub fn new(n: usize, n0: usize, mut gaps: Vec<f64>) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!("need N ≥ 2, got {n}")));
        }
        if n0 == 0 || n0 > n {
            return Err(Error::InvalidArgument(format!(
                "effective expert count {n0} outside 1..={n}"
            )));
        }
        if gaps.len() != n - n0 {
            return Err(Error::LengthMismatch {
                expected: n - n0,
                actual: gaps.len(),
            });
        }
        if let Some(g) = gaps.iter().find(|g| !(g.is_finite() && **g > 0.0)) {
            return Err(Error::InvalidArgument(format!("gap {g} is not positive")));
        }
        gaps.sort_by(f64::total_cmp);
        Ok(Self { n, n0, gaps })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n0(&self) -> usize {
        self.n0
    }

    /// Gaps in increasing order `Δ_(0) ≤ Δ_(1) ≤ …`.
    pub fn ordered_gaps(&self) -> &[f64] {
        &self.gaps
    }

    /// Smallest gap `Δ₀`, if any expert is ineffective.
    pub fn min_gap(&self) -> Option<f64> {
        self.gaps.first().copied()
    }

    /// `T_i = ⌈8 log N / Δ_i²⌉`, in the order of [`Self::ordered_gaps`].
    pub fn resolution_times(&self) -> Vec<u64> {
        let log_n = (self.n as f64).ln();
        self.gaps
            .iter()
            .map(|d| (8.0 * log_n / (d * d)).ceil() as u64)
            .collect()
    }

    /// `T₀ = max_i T_i` (0 with no ineffective experts).
    pub fn t0(&self) -> u64 {
        self.resolution_times().into_iter().max().unwrap_or(0)
    }

    /// `W_j = (√log(N₀+j+1) − √log(N₀+j)) / √log N` for `j = 0..N−N₀`.
    pub fn weights(&self) -> Vec<f64> {
        let sqrt_log_n = (self.n as f64).ln().sqrt();
        (0..self.n - self.n0)
            .map(|j| {
                let a = ((self.n0 + j + 1) as f64).ln().sqrt();
                let b = ((self.n0 + j) as f64).ln().sqrt();
                (a - b) / sqrt_log_n
            })
            .collect()
    }
}

/// Refined CARL bound for `T > T₀`; the worst-case `√(2T log N)` otherwise.
pub fn bound_carl_refined(t: usize, profile: &SemiAdvProfile) -> f64 {
    let n = profile.n as f64;
    let log_n = n.ln();
    let tf = t as f64;
    if (t as u64) <= profile.t0() {
        return (2.0 * tf * log_n).sqrt();
    }
    let leading = (2.0 * tf * (profile.n0 as f64).ln()).sqrt();
    let gap_sum: f64 = profile
        .weights()
        .iter()
        .zip(&profile.gaps)
        .map(|(w, d)| w / d)
        .sum();
    let indicator = if profile.n0 == 1 { 1.0 } else { 0.0 };
    let resolved: f64 = profile
        .gaps
        .iter()
        .zip(profile.resolution_times())
        .filter(|(_, ti)| t as u64 > *ti)
        .map(|(d, _)| 1.0 / d)
        .sum();
    let tail = 5.0 * std::f64::consts::SQRT_2 / (n * log_n.sqrt()) * ((-0.5f64).exp() + indicator) * resolved;
    leading + 4.0 * log_n * gap_sum + tail + log_n.sqrt()
}

/// `√((T/2)(log(1/ε) − 2 log 2 + 1/π)) − √(2/π) − 2 log N − log 2`, `ε = i_ε/N`.
///
/// May be negative; it is returned as is.
pub fn bound_lower_quantile(t: usize, n: usize, i_eps: usize) -> Result<f64> {
    if i_eps == 0 || 4 * i_eps > n {
        return Err(Error::InvalidArgument(format!(
            "i_eps = {i_eps} must lie in 1..=N/4 for N = {n}"
        )));
    }
    let ln2 = std::f64::consts::LN_2;
    let eps = i_eps as f64 / n as f64;
    let radicand = (-eps.ln() - 2.0 * ln2 + std::f64::consts::FRAC_1_PI).max(0.0);
    Ok((t as f64 / 2.0 * radicand).sqrt()
        - (2.0 * std::f64::consts::FRAC_1_PI).sqrt()
        - 2.0 * (n as f64).ln()
        - ln2)
}

/// `H_A(w) = Σ w_i √(2 log(1/w_i))`.
pub fn entropy_a(w: &WeightVector) -> f64 {
    w.as_slice().iter().map(|&x| h_a(x)).sum()
}

/// `H_B(w) = Σ h_B(w_i)` with `N = w.len()`.
pub fn entropy_b(w: &WeightVector) -> f64 {
    let n = w.len();
    w.as_slice().iter().map(|&x| h_b(x, n)).sum()
}
