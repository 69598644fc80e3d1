//! NormalHedge, the parameter-free reference learner.
//!
//! Weights are `w_i ∝ [R_i]₊ exp([R_i]₊²/(2c))` with `c > 0` solving
//! `Σ_i exp([R_i]₊²/(2c)) = eN`. When no regret is positive the learner
//! plays uniform.

use crate::domain::{mixture_loss, WeightVector};
use crate::engine::Learner;
use crate::error::{Error, Result};

const C_LOWER: f64 = 1e-12;
const MAX_DOUBLINGS: usize = 2100;
const MAX_BISECTIONS: usize = 400;

#[derive(Debug, Clone, PartialEq)]
pub struct NormalHedgeState {
    player_loss: f64,
    cumulative: Vec<f64>,
    regret: Vec<f64>,
    scale: Option<f64>,
    residual: Option<f64>,
    current: Option<WeightVector>,
    rounds: usize,
}

impl NormalHedgeState {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("NormalHedge needs at least one expert".into()));
        }
        Ok(Self {
            player_loss: 0.0,
            cumulative: vec![0.0; n],
            regret: vec![0.0; n],
            scale: None,
            residual: None,
            current: None,
            rounds: 0,
        })
    }

    /// Per-expert regret `R_i = Σ_s ⟨ℓ_s, w_s⟩ − L(i)`.
    pub fn regret(&self) -> &[f64] {
        &self.regret
    }

    pub fn cumulative_losses(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn player_loss(&self) -> f64 {
        self.player_loss
    }

    /// Scale `c` from the last prediction, if some regret was positive.
    pub fn scale(&self) -> Option<f64> {
        self.scale
    }

    /// `|Σ exp([R]₊²/2c) − eN|` at the last solved scale.
    pub fn residual(&self) -> Option<f64> {
        self.residual
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }
}

/// Weights for regrets `r`, with the solved scale and equation residual.
pub fn normalhedge_weights(r: &[f64]) -> Result<(WeightVector, Option<(f64, f64)>)> {
    let n = r.len();
    if n == 0 {
        return Err(Error::InvalidArgument("no experts".into()));
    }
    if let Some(i) = r.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite(format!("regret {} at expert {i}", r[i])));
    }
    let pos: Vec<f64> = r.iter().map(|x| x.max(0.0)).collect();
    if pos.iter().all(|&x| x == 0.0) {
        return Ok((WeightVector::uniform(n), None));
    }
    let target = std::f64::consts::E * n as f64;
    let potential = |c: f64| pos.iter().map(|x| (x * x / (2.0 * c)).exp()).sum::<f64>();

    let mut lo = C_LOWER;
    let mut hi = 1.0;
    let mut doublings = 0;
    while potential(hi) > target {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > MAX_DOUBLINGS {
            return Err(Error::Bracket(format!("NormalHedge scale beyond {hi}")));
        }
    }
    if potential(lo) < target {
        return Err(Error::Bracket(format!(
            "NormalHedge potential below eN at c = {lo}"
        )));
    }
    // The potential decreases in c; bisect geometrically while the bracket
    // spans orders of magnitude, then arithmetically.
    for _ in 0..MAX_BISECTIONS {
        let mid = if hi / lo > 4.0 {
            (lo * hi).sqrt()
        } else {
            lo + 0.5 * (hi - lo)
        };
        if mid <= lo || mid >= hi {
            break;
        }
        if potential(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (r_lo, r_hi) = ((potential(lo) - target).abs(), (potential(hi) - target).abs());
    let (c, residual) = if r_lo <= r_hi { (lo, r_lo) } else { (hi, r_hi) };

    // Log-space normalization: exponents can exceed the f64 range.
    let logs: Vec<f64> = pos
        .iter()
        .map(|&x| if x > 0.0 { x.ln() + x * x / (2.0 * c) } else { f64::NEG_INFINITY })
        .collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let sum: f64 = raw.iter().sum();
    let w = WeightVector::new(raw.into_iter().map(|x| x / sum).collect())?;
    Ok((w, Some((c, residual))))
}

impl Learner for NormalHedgeState {
    fn num_experts(&self) -> usize {
        self.regret.len()
    }

    fn predict(&mut self) -> Result<WeightVector> {
        if let Some(w) = &self.current {
            return Ok(w.clone());
        }
        let (w, solved) = normalhedge_weights(&self.regret)?;
        self.scale = solved.map(|s| s.0);
        self.residual = solved.map(|s| s.1);
        self.current = Some(w.clone());
        Ok(w)
    }

    fn update(&mut self, loss: &[f64]) -> Result<f64> {
        let w = self
            .current
            .as_ref()
            .ok_or(Error::UpdateBeforePredict(self.rounds + 1))?;
        let realized = mixture_loss(w, loss)?;
        if let Some(i) = loss.iter().position(|l| !(0.0..=1.0).contains(l)) {
            return Err(Error::LossOutOfRange {
                round: self.rounds + 1,
                expert: i,
                value: loss[i],
            });
        }
        self.player_loss += realized;
        for ((c, r), l) in self.cumulative.iter_mut().zip(self.regret.iter_mut()).zip(loss) {
            *c += l;
            *r += realized - l;
        }
        self.current = None;
        self.rounds += 1;
        Ok(realized)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_without_positive_regret() {
        let (w, solved) = normalhedge_weights(&[0.0, -1.0, 0.0]).unwrap();
        assert!(solved.is_none());
        assert_eq!(w, WeightVector::uniform(3));
    }

    #[test]
    fn symmetric_regret() {
        for r in [1e-3, 1.0, 50.0] {
            let (w, _) = normalhedge_weights(&[r, r]).unwrap();
            assert!((w[0] - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn single_positive_regret() {
        let (w, solved) = normalhedge_weights(&[1.0, 0.0]).unwrap();
        let (c, residual) = solved.unwrap();
        let expected = 0.5 / (2.0 * std::f64::consts::E - 1.0).ln();
        assert!((c - 0.335_597_469_483_408).abs() < 1e-12);
        assert!((c - expected).abs() < 1e-14);
        assert!(residual <= 1e-8);
        assert_eq!(w.as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn large_regret_does_not_overflow() {
        let (w, solved) = normalhedge_weights(&[1000.0, 999.0, -3.0]).unwrap();
        assert!(solved.unwrap().1 <= 1e-8);
        assert_eq!(w[2], 0.0);
        assert!(w[0] > w[1]);
    }

    #[test]
    fn learner_loop() {
        let mut nh = NormalHedgeState::new(2).unwrap();
        assert!(nh.update(&[0.0, 1.0]).is_err());
        let w = nh.predict().unwrap();
        assert_eq!(w, WeightVector::uniform(2));
        assert_eq!(nh.update(&[0.0, 1.0]).unwrap(), 0.5);
        assert_eq!(nh.regret(), &[0.5, -0.5]);
        let w = nh.predict().unwrap();
        assert_eq!(w.as_slice(), &[1.0, 0.0]);
        assert!(nh.residual().unwrap() <= 1e-8);
    }
}
