//! Expected utilities, deviation regrets and ε-CCE membership.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{ActionSpace, Game, StageGame};
use crate::strategy::{EgoStrategy, PlayMixture};

/// Expectation of `table` under a mixture of products.
pub fn mixture_expectation(space: &ActionSpace, table: &[f64], mixture: &PlayMixture) -> f64 {
    mixture
        .components
        .iter()
        .map(|(w, s)| w * space.contract(table, s, None)[0])
        .sum()
}

/// `table(a_k, x_{-k})` for every action of non-ego agent `k` (0-based).
/// The marginal `x_{-k}` drops factor `k` from every component.
pub fn mixture_deviation(space: &ActionSpace, table: &[f64], mixture: &PlayMixture, k: usize) -> Vec<f64> {
    let mut out = vec![0.0; space.counts()[k]];
    for (w, s) in &mixture.components {
        for (o, d) in out.iter_mut().zip(space.contract(table, s, Some(k))) {
            *o += w * d;
        }
    }
    out
}

/// Per-agent regrets and the full per-action deviation vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretReport {
    /// `Reg_i` for agents `1..=n` (index `i - 1`).
    pub per_agent_regret: Vec<f64>,
    /// `ū_i(a_i, x_{-i}) − ū_i(x)` blocked by agent, `Σ m_i` entries.
    pub deviation_vector: Vec<f64>,
}

impl RegretReport {
    /// One entry per agent: the max over its block (the streamlined form).
    pub fn streamlined(&self) -> Vec<f64> {
        self.per_agent_regret.clone()
    }

    pub fn max_regret(&self) -> f64 {
        self.per_agent_regret.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

impl StageGame {
    pub fn expected_utility(&self, agent: usize, mixture: &PlayMixture) -> Result<f64> {
        self.check_agent(agent)?;
        mixture.validate(self.counts())?;
        Ok(mixture_expectation(self.space(), self.table(agent), mixture))
    }

    /// Regret report of a mixture; inputs are assumed validated.
    pub fn regret_unchecked(&self, mixture: &PlayMixture) -> RegretReport {
        let n = self.num_agents();
        let mut per_agent_regret = Vec::with_capacity(n);
        let mut deviation_vector = Vec::with_capacity(self.space().total_actions());
        for k in 0..n {
            let table = self.table(k + 1);
            let dev = mixture_deviation(self.space(), table, mixture, k);
            let value = mixture_expectation(self.space(), table, mixture);
            let mut best = f64::NEG_INFINITY;
            for d in dev {
                best = best.max(d - value);
                deviation_vector.push(d - value);
            }
            per_agent_regret.push(best);
        }
        RegretReport {
            per_agent_regret,
            deviation_vector,
        }
    }

    pub fn regret(&self, mixture: &PlayMixture) -> Result<RegretReport> {
        mixture.validate(self.counts())?;
        Ok(self.regret_unchecked(mixture))
    }

    pub fn is_epsilon_cce(&self, mixture: &PlayMixture, eps: &[f64], tol: f64) -> Result<bool> {
        check_slack(eps, self.num_agents())?;
        let report = self.regret(mixture)?;
        Ok(report
            .per_agent_regret
            .iter()
            .zip(eps)
            .all(|(r, e)| *r <= e + tol))
    }
}

pub(crate) fn check_slack(eps: &[f64], n: usize) -> Result<()> {
    if eps.len() != n {
        return Err(Error::shape("need one slack per non-ego agent"));
    }
    for (index, &value) in eps.iter().enumerate() {
        if value.is_nan() {
            return Err(Error::NonFinite("slack"));
        }
        if value < 0.0 {
            return Err(Error::NegativeSlack { index, value });
        }
    }
    Ok(())
}

/// `ū_i(x₀, x)` for agent `i` (0 = ego).
pub fn expected_utility<G: Game + ?Sized>(
    game: &G,
    agent: usize,
    ego: &EgoStrategy,
    joint: &PlayMixture,
) -> Result<f64> {
    StageGame::new(game, ego)?.expected_utility(agent, joint)
}

pub fn regret<G: Game + ?Sized>(game: &G, ego: &EgoStrategy, joint: &PlayMixture) -> Result<RegretReport> {
    StageGame::new(game, ego)?.regret(joint)
}

/// True iff every agent's regret is within its slack plus `tol`.
pub fn is_epsilon_cce<G: Game + ?Sized>(
    game: &G,
    ego: &EgoStrategy,
    joint: &PlayMixture,
    eps: &[f64],
    tol: f64,
) -> Result<bool> {
    StageGame::new(game, ego)?.is_epsilon_cce(joint, eps, tol)
}
