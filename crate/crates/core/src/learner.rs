//! Uncoupled no-regret learners over a finite action set.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LearnerKind {
    Hedge,
    RegretMatching,
    Exp3,
    /// Hedge that plays as if the last loss vector will repeat.
    OptimisticHedge,
}

/// What a learner observes after a round.
#[derive(Debug, Clone, Copy)]
pub enum Feedback<'a> {
    /// Loss of every action.
    Full(&'a [f64]),
    /// Loss of the played action only.
    Bandit { action: usize, loss: f64 },
}

/// State of one agent's learner.
///
/// `weights` holds log-weights for Hedge and Exp3 and cumulative regrets
/// for regret matching. With `entropy_bonus = α > 0` the played
/// distribution is mixed with uniform at rate `α / (1 + α)`, so every
/// action keeps probability at least `α / (m (1 + α))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerState {
    pub kind: LearnerKind,
    pub weights: Vec<f64>,
    pub learning_rate: f64,
    pub entropy_bonus: f64,
    pub step_count: u64,
    /// Most recent full loss vector (optimistic Hedge only).
    #[serde(default)]
    pub last_loss: Vec<f64>,
}

impl LearnerState {
    pub fn new(kind: LearnerKind, actions: usize, learning_rate: f64, entropy_bonus: f64) -> Result<Self> {
        if actions == 0 {
            return Err(Error::param("learner needs at least one action"));
        }
        if !(learning_rate.is_finite() && learning_rate > 0.0) {
            return Err(Error::param("learning rate must be positive and finite"));
        }
        if !(entropy_bonus.is_finite() && entropy_bonus >= 0.0) {
            return Err(Error::param("entropy bonus must be nonnegative"));
        }
        Ok(LearnerState {
            kind,
            weights: vec![0.0; actions],
            learning_rate,
            entropy_bonus,
            step_count: 0,
            last_loss: Vec::new(),
        })
    }

    pub fn hedge(actions: usize, learning_rate: f64) -> Result<Self> {
        LearnerState::new(LearnerKind::Hedge, actions, learning_rate, 0.0)
    }

    pub fn actions(&self) -> usize {
        self.weights.len()
    }

    /// Distribution before the entropy mix.
    fn base_strategy(&self) -> Vec<f64> {
        match self.kind {
            LearnerKind::Hedge | LearnerKind::Exp3 => softmax(&self.weights),
            LearnerKind::OptimisticHedge => {
                if self.last_loss.is_empty() {
                    softmax(&self.weights)
                } else {
                    let eta = self.learning_rate;
                    let w: Vec<f64> = self.weights.iter().zip(&self.last_loss).map(|(w, l)| w - eta * l).collect();
                    softmax(&w)
                }
            }
            LearnerKind::RegretMatching => {
                let pos: f64 = self.weights.iter().map(|r| r.max(0.0)).sum();
                if pos > 0.0 {
                    self.weights.iter().map(|r| r.max(0.0) / pos).collect()
                } else {
                    vec![1.0 / self.actions() as f64; self.actions()]
                }
            }
        }
    }

    /// The distribution the learner currently plays.
    pub fn strategy(&self) -> Vec<f64> {
        let mut p = self.base_strategy();
        if self.entropy_bonus > 0.0 {
            let mix = self.entropy_bonus / (1.0 + self.entropy_bonus);
            let u = 1.0 / self.actions() as f64;
            p.iter_mut().for_each(|v| *v = (1.0 - mix) * *v + mix * u);
        }
        p
    }

    /// Applies one round of feedback and returns the new played strategy.
    pub fn step(&mut self, feedback: Feedback<'_>) -> Result<Vec<f64>> {
        let m = self.actions();
        let played = self.strategy();
        let losses: Vec<f64> = match feedback {
            Feedback::Full(l) => {
                if l.len() != m {
                    return Err(Error::shape("loss vector length differs from action count"));
                }
                if l.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("loss vector"));
                }
                l.to_vec()
            }
            Feedback::Bandit { action, loss } => {
                if action >= m {
                    return Err(Error::shape("bandit action out of range"));
                }
                if !loss.is_finite() {
                    return Err(Error::NonFinite("bandit loss"));
                }
                importance_estimate(action, loss, &played)
            }
        };
        match self.kind {
            LearnerKind::Hedge | LearnerKind::Exp3 => {
                for (w, l) in self.weights.iter_mut().zip(&losses) {
                    *w -= self.learning_rate * l;
                }
            }
            LearnerKind::OptimisticHedge => {
                for (w, l) in self.weights.iter_mut().zip(&losses) {
                    *w -= self.learning_rate * l;
                }
                self.last_loss = losses;
            }
            LearnerKind::RegretMatching => {
                let expected: f64 = played.iter().zip(&losses).map(|(p, l)| p * l).sum();
                for (r, l) in self.weights.iter_mut().zip(&losses) {
                    *r += expected - l;
                }
            }
        }
        self.step_count += 1;
        Ok(self.strategy())
    }
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let top = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = logits.iter().map(|w| math::exp(w - top)).collect();
    let z: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= z);
    p
}

/// Importance-weighted loss vector `e_a · loss / p_a`; unbiased for the
/// full loss vector when `a ~ p`.
pub fn importance_estimate(action: usize, loss: f64, probs: &[f64]) -> Vec<f64> {
    let mut est = vec![0.0; probs.len()];
    if probs[action] > 0.0 {
        est[action] = loss / probs[action];
    }
    est
}

/// Learning rate `√(8 ln m / T)` for Hedge with losses in `[0, 1]`.
pub fn hedge_rate(actions: usize, horizon: usize) -> f64 {
    let m = actions.max(2) as f64;
    math::sqrt(8.0 * math::ln(m) / horizon.max(1) as f64)
}

/// External regret of a played sequence against full loss vectors:
/// `Σ_t p_t·ℓ_t − min_a Σ_t ℓ_t(a)`.
pub fn external_regret(played: &[Vec<f64>], losses: &[Vec<f64>]) -> f64 {
    let m = losses.first().map_or(0, |l| l.len());
    let mut cumulative = vec![0.0; m];
    let mut incurred = 0.0;
    for (p, l) in played.iter().zip(losses) {
        incurred += p.iter().zip(l).map(|(a, b)| a * b).sum::<f64>();
        for (c, v) in cumulative.iter_mut().zip(l) {
            *c += v;
        }
    }
    incurred - cumulative.iter().cloned().fold(f64::INFINITY, f64::min)
}
