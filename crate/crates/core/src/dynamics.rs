//! Simultaneous no-regret dynamics over a cost game.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::ActionSpace;
use crate::learner::{Feedback, LearnerState};
use crate::rng::{self, PortableRng};
use crate::strategy::{PlayMixture, ProductStrategy};

/// Cap on stored iterates; longer runs are thinned uniformly.
pub const MAX_MIXTURE_COMPONENTS: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeedbackMode {
    /// Expected loss vector against the others' current product strategy.
    #[default]
    FullInformation,
    /// Losses evaluated at sampled actions of the others; Exp3 learners
    /// only see their own sampled action's loss.
    Sampled,
}

/// Per-agent cost tables over joint profiles; the cost oracle of a run.
#[derive(Debug, Clone)]
pub struct CostGame {
    space: ActionSpace,
    costs: Vec<Vec<f64>>,
}

impl CostGame {
    pub fn new(space: ActionSpace, costs: Vec<Vec<f64>>) -> Result<Self> {
        if costs.len() != space.num_agents() || costs.iter().any(|c| c.len() != space.size()) {
            return Err(Error::shape("cost tables must be n × ∏m_i"));
        }
        if costs.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("cost tables"));
        }
        Ok(CostGame { space, costs })
    }

    /// Tabulates `oracle(k, joint)` for every agent `k` (0-based) and
    /// profile.
    pub fn from_oracle(counts: &[usize], oracle: impl Fn(usize, &[usize]) -> Result<f64>) -> Result<Self> {
        let space = ActionSpace::new(counts)?;
        let mut costs = vec![vec![0.0; space.size()]; counts.len()];
        let mut joint = vec![0; counts.len()];
        for idx in 0..space.size() {
            space.decode(idx, &mut joint);
            for (k, table) in costs.iter_mut().enumerate() {
                table[idx] = oracle(k, &joint)?;
            }
        }
        CostGame::new(space, costs)
    }

    pub fn space(&self) -> &ActionSpace {
        &self.space
    }

    pub fn cost_table(&self, k: usize) -> &[f64] {
        &self.costs[k]
    }

    /// Affinely maps each agent's costs into `[0, 1]` (constant tables go
    /// to zero). Returns the per-agent scale used.
    pub fn rescale_unit(&mut self) -> Vec<f64> {
        self.costs
            .iter_mut()
            .map(|t| {
                let lo = t.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = t.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let range = hi - lo;
                if range > 0.0 {
                    t.iter_mut().for_each(|v| *v = (*v - lo) / range);
                    range
                } else {
                    t.iter_mut().for_each(|v| *v = 0.0);
                    1.0
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicsResult {
    /// Uniform mixture over the played product strategies (thinned).
    pub empirical_mixture: PlayMixture,
    pub thinning_factor: usize,
    pub final_strategies: ProductStrategy,
    /// Time-averaged external regret of each agent in cost units, recorded
    /// every `trace_stride` steps.
    pub per_agent_regret_trace: Vec<Vec<f64>>,
    pub trace_stride: usize,
    pub steps: usize,
}

impl DynamicsResult {
    pub fn final_regret(&self) -> &[f64] {
        self.per_agent_regret_trace.last().map_or(&[], |v| v.as_slice())
    }
}

/// Runs `steps` rounds of simultaneous play. `learners` are updated in
/// place so callers can continue a run.
pub fn run_dynamics(
    game: &CostGame,
    steps: usize,
    learners: &mut [LearnerState],
    mode: FeedbackMode,
    seed: u64,
) -> Result<DynamicsResult> {
    let space = game.space();
    let n = space.num_agents();
    if steps == 0 {
        return Err(Error::param("dynamics need at least one step"));
    }
    if learners.len() != n {
        return Err(Error::shape("need exactly one learner per agent"));
    }
    for (l, &m) in learners.iter().zip(space.counts()) {
        if l.actions() != m {
            return Err(Error::shape("learner action count differs from game"));
        }
    }
    let mut rng: PortableRng = rng::seeded(seed);
    let thin = steps.div_ceil(MAX_MIXTURE_COMPONENTS);
    let trace_stride = steps.div_ceil(MAX_MIXTURE_COMPONENTS);
    let mut kept = Vec::with_capacity(steps / thin + 1);
    let mut trace = Vec::with_capacity(steps / trace_stride + 1);
    let mut cumulative: Vec<Vec<f64>> = space.counts().iter().map(|&m| vec![0.0; m]).collect();
    let mut incurred = vec![0.0; n];
    let mut current = ProductStrategy::new(learners.iter().map(|l| l.strategy()).collect());
    let mut joint = vec![0usize; n];

    for t in 0..steps {
        if (t + 1) % thin == 0 {
            kept.push(current.clone());
        }
        let losses: Vec<Vec<f64>> = (0..n)
            .map(|k| space.contract(game.cost_table(k), &current, Some(k)))
            .collect();
        for k in 0..n {
            incurred[k] += current.agent(k).iter().zip(&losses[k]).map(|(p, l)| p * l).sum::<f64>();
            for (c, l) in cumulative[k].iter_mut().zip(&losses[k]) {
                *c += l;
            }
        }
        let next: Vec<Vec<f64>> = match mode {
            FeedbackMode::FullInformation => learners
                .iter_mut()
                .zip(&losses)
                .map(|(l, loss)| l.step(Feedback::Full(loss)))
                .collect::<Result<_>>()?,
            FeedbackMode::Sampled => {
                for (k, slot) in joint.iter_mut().enumerate() {
                    *slot = rng::categorical(&mut rng, current.agent(k));
                }
                let base = space.encode(&joint);
                learners
                    .iter_mut()
                    .enumerate()
                    .map(|(k, l)| {
                        let table = game.cost_table(k);
                        if l.kind == crate::learner::LearnerKind::Exp3 {
                            l.step(Feedback::Bandit {
                                action: joint[k],
                                loss: table[base],
                            })
                        } else {
                            let realized: Vec<f64> = (0..space.counts()[k])
                                .map(|a| table[space.with_action(base, k, a)])
                                .collect();
                            l.step(Feedback::Full(&realized))
                        }
                    })
                    .collect::<Result<_>>()?
            }
        };
        current = ProductStrategy::new(next);
        if (t + 1) % trace_stride == 0 || t + 1 == steps {
            let steps_done = (t + 1) as f64;
            trace.push(
                (0..n)
                    .map(|k| {
                        let best = cumulative[k].iter().cloned().fold(f64::INFINITY, f64::min);
                        (incurred[k] - best) / steps_done
                    })
                    .collect(),
            );
        }
    }
    Ok(DynamicsResult {
        empirical_mixture: PlayMixture::uniform_over(kept),
        thinning_factor: thin,
        final_strategies: current,
        per_agent_regret_trace: trace,
        trace_stride,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learner::LearnerKind;

    #[test]
    fn single_agent_constant_costs_keep_initial_strategy() {
        let space = ActionSpace::new(&[3]).unwrap();
        let g = CostGame::new(space, vec![vec![0.5; 3]]).unwrap();
        for kind in [LearnerKind::Hedge, LearnerKind::RegretMatching, LearnerKind::Exp3] {
            let mut ls = vec![LearnerState::new(kind, 3, 0.1, 0.0).unwrap()];
            let res = run_dynamics(&g, 100, &mut ls, FeedbackMode::FullInformation, 1).unwrap();
            for (_, s) in &res.empirical_mixture.components {
                for p in s.agent(0) {
                    assert!((p - 1.0 / 3.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn same_seed_is_reproducible() {
        let g = CostGame::from_oracle(&[2, 3], |k, j| Ok(((k + 1) * (j[0] + 2 * j[1])) as f64 / 10.0)).unwrap();
        let run = |seed| {
            let mut ls = vec![
                LearnerState::new(LearnerKind::Exp3, 2, 0.1, 0.05).unwrap(),
                LearnerState::new(LearnerKind::Hedge, 3, 0.1, 0.0).unwrap(),
            ];
            run_dynamics(&g, 500, &mut ls, FeedbackMode::Sampled, seed).unwrap()
        };
        assert_eq!(run(5), run(5));
        assert_ne!(run(5).final_strategies, run(6).final_strategies);
    }

    #[test]
    fn thinning_caps_components() {
        let g = CostGame::from_oracle(&[2], |_, j| Ok(j[0] as f64)).unwrap();
        let mut ls = vec![LearnerState::hedge(2, 0.01).unwrap()];
        let res = run_dynamics(&g, 10_000, &mut ls, FeedbackMode::FullInformation, 0).unwrap();
        assert!(res.empirical_mixture.len() <= MAX_MIXTURE_COMPONENTS);
        assert_eq!(res.thinning_factor, 3);
        res.empirical_mixture.validate(&[2]).unwrap();
    }
}
