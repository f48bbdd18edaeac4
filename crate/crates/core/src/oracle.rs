//! Exact worst/best-case (ε-)CCE by linear programming.
//!
//! The joint distribution is a dense vector over all `∏ m_i` profiles; this
//! module is the only place such vectors appear. For each agent `i` and
//! deviation `a_i` the program carries the constraint
//! `Σ_a [u_i(a_i, a_{-i}) − u_i(a)] x(a) ≤ ε_i`; agents with infinite slack
//! are unconstrained.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{Game, Objective, StageGame};
use crate::regret::{check_slack, RegretReport};
use crate::simplex::{self, Constraint, LinearProgram, Relation};
use crate::strategy::{EgoStrategy, PlayMixture, ProductStrategy};

pub use crate::simplex::Sense;

/// Default cap on `∏ m_i` for dense joints.
pub const DEFAULT_DENSE_CAP: usize = 1_000_000;

/// Two LP values closer than this are considered equal.
pub const LP_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseJoint {
    pub probs: Vec<f64>,
    pub counts: Vec<usize>,
}

impl DenseJoint {
    /// Expands the joint into a mixture of point masses (zero-mass
    /// profiles dropped).
    pub fn to_mixture(&self) -> Result<PlayMixture> {
        let space = crate::game::ActionSpace::new(&self.counts)?;
        let comps: Vec<_> = self
            .probs
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(i, &p)| (p, ProductStrategy::pure(&space.decode_vec(i), &self.counts)))
            .collect();
        Ok(PlayMixture::new(comps))
    }

    pub fn expectation(&self, table: &[f64]) -> f64 {
        self.probs.iter().zip(table).map(|(p, v)| p * v).sum()
    }
}

/// Regret of a dense joint by direct summation.
pub fn dense_regret(stage: &StageGame, joint: &DenseJoint) -> RegretReport {
    let space = stage.space();
    let mut per_agent_regret = Vec::new();
    let mut deviation_vector = Vec::new();
    for k in 0..stage.num_agents() {
        let table = stage.table(k + 1);
        let value = joint.expectation(table);
        let mut best = f64::NEG_INFINITY;
        for a in 0..space.counts()[k] {
            let dev: f64 = joint
                .probs
                .iter()
                .enumerate()
                .map(|(p, &x)| x * table[space.with_action(p, k, a)])
                .sum();
            best = best.max(dev - value);
            deviation_vector.push(dev - value);
        }
        per_agent_regret.push(best);
    }
    RegretReport {
        per_agent_regret,
        deviation_vector,
    }
}

/// Deviation-constraint rows of the (ε-)CCE polytope for a stage game.
pub(crate) fn cce_constraints(stage: &StageGame, eps: &[f64]) -> Vec<Constraint> {
    let space = stage.space();
    let size = space.size();
    let mut rows = Vec::new();
    for k in 0..stage.num_agents() {
        if !eps[k].is_finite() {
            continue;
        }
        let table = stage.table(k + 1);
        for a in 0..space.counts()[k] {
            let coeffs: Vec<f64> = (0..size).map(|p| table[space.with_action(p, k, a)] - table[p]).collect();
            rows.push(Constraint {
                coeffs,
                relation: Relation::Le,
                rhs: eps[k],
            });
        }
    }
    rows.push(Constraint {
        coeffs: vec![1.0; size],
        relation: Relation::Eq,
        rhs: 1.0,
    });
    rows
}

/// Optimizes ν̄ over the ε-CCE polytope of an already conditioned game.
pub fn solve_stage_lp(stage: &StageGame, nu: &[f64], sense: Sense, eps: &[f64], cap: usize) -> Result<(DenseJoint, f64)> {
    check_slack(eps, stage.num_agents())?;
    let size = stage.space().size();
    if size > cap {
        return Err(Error::CapExceeded { size, cap });
    }
    if nu.len() != size {
        return Err(Error::shape("objective table must cover every joint profile"));
    }
    let lp = LinearProgram {
        objective: nu.to_vec(),
        sense,
        constraints: cce_constraints(stage, eps),
    };
    let sol = match simplex::solve(&lp) {
        Ok(s) => s,
        Err(Error::Infeasible) => {
            return Err(Error::Internal("CCE polytope reported infeasible for nonnegative slack".into()))
        }
        Err(e) => return Err(e),
    };
    let total: f64 = sol.x.iter().sum();
    let probs: Vec<f64> = sol.x.iter().map(|v| v / total).collect();
    let joint = DenseJoint {
        probs,
        counts: stage.counts().to_vec(),
    };
    let value = joint.expectation(nu);
    Ok((joint, value))
}

/// Optimizes the linear objective ν̄ over the ε-CCE polytope.
pub fn solve_cce_lp<G: Game + ?Sized>(
    game: &G,
    ego: &EgoStrategy,
    objective: &Objective,
    sense: Sense,
    eps: &[f64],
) -> Result<(DenseJoint, f64)> {
    solve_cce_lp_capped(game, ego, objective, sense, eps, DEFAULT_DENSE_CAP)
}

pub fn solve_cce_lp_capped<G: Game + ?Sized>(
    game: &G,
    ego: &EgoStrategy,
    objective: &Objective,
    sense: Sense,
    eps: &[f64],
    cap: usize,
) -> Result<(DenseJoint, f64)> {
    let size: usize = game.action_counts().iter().product();
    if size > cap {
        return Err(Error::CapExceeded { size, cap });
    }
    let stage = StageGame::new(game, ego)?;
    let nu = stage.objective_table(objective)?;
    solve_stage_lp(&stage, &nu, sense, eps, cap)
}

/// Minimum of the ego's utility over the ε-CCE polytope.
pub fn worst_case_value<G: Game + ?Sized>(game: &G, ego: &EgoStrategy, eps: &[f64]) -> Result<f64> {
    Ok(solve_cce_lp(game, ego, &Objective::Utility(0), Sense::Minimize, eps)?.1)
}

/// Whether some exact CCE has ν̄ strictly above the CCE minimum.
pub fn decide_nontrivial_cce<G: Game + ?Sized>(game: &G, ego: &EgoStrategy, nu: &Objective) -> Result<bool> {
    let zero = vec![0.0; game.num_agents()];
    let (_, hi) = solve_cce_lp(game, ego, nu, Sense::Maximize, &zero)?;
    let (_, lo) = solve_cce_lp(game, ego, nu, Sense::Minimize, &zero)?;
    Ok(hi - lo > LP_TOL)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::DenseGame;

    fn pd() -> DenseGame {
        let u1 = [[3.0, 0.0], [4.0, 1.0]];
        DenseGame::from_fn(1, vec![2, 2], None, |i, _, j| match i {
            0 => u1[j[0]][j[1]],
            1 => u1[j[0]][j[1]],
            _ => u1[j[1]][j[0]],
        })
        .unwrap()
    }

    fn pennies() -> DenseGame {
        DenseGame::from_fn(1, vec![2, 2], None, |i, _, j| {
            let s = if j[0] == j[1] { 1.0 } else { -1.0 };
            if i == 2 {
                -s
            } else {
                s
            }
        })
        .unwrap()
    }

    #[test]
    fn pd_unique_cce_is_defect() {
        let g = pd();
        let ego = EgoStrategy::uniform(1);
        let (joint, value) = solve_cce_lp(&g, &ego, &Objective::Utility(1), Sense::Minimize, &[0.0, 0.0]).unwrap();
        assert!((value - 1.0).abs() < 1e-9);
        assert!((joint.probs[3] - 1.0).abs() < 1e-9);
        assert!(!decide_nontrivial_cce(&g, &ego, &Objective::Utility(1)).unwrap());
    }

    #[test]
    fn pennies_value_zero_both_ways() {
        let g = pennies();
        let ego = EgoStrategy::uniform(1);
        for sense in [Sense::Maximize, Sense::Minimize] {
            let (_, v) = solve_cce_lp(&g, &ego, &Objective::Utility(1), sense, &[0.0, 0.0]).unwrap();
            assert!(v.abs() < 1e-9, "{v}");
        }
    }

    #[test]
    fn infinite_slack_gives_pure_extremes() {
        let g = pd();
        let ego = EgoStrategy::uniform(1);
        let inf = [f64::INFINITY, f64::INFINITY];
        let (_, hi) = solve_cce_lp(&g, &ego, &Objective::Utility(1), Sense::Maximize, &inf).unwrap();
        let (_, lo) = solve_cce_lp(&g, &ego, &Objective::Utility(1), Sense::Minimize, &inf).unwrap();
        assert!((hi - 4.0).abs() < 1e-9 && lo.abs() < 1e-9);
    }

    #[test]
    fn coordination_game_is_nontrivial() {
        let u = [[2.0, 0.0], [0.0, 1.0]];
        let g = DenseGame::from_fn(1, vec![2, 2], None, |_, _, j| u[j[0]][j[1]]).unwrap();
        let ego = EgoStrategy::uniform(1);
        assert!(decide_nontrivial_cce(&g, &ego, &Objective::Utility(0)).unwrap());
        let constant = Objective::Table(vec![1.0; 4]);
        assert!(!decide_nontrivial_cce(&g, &ego, &constant).unwrap());
    }

    #[test]
    fn cap_is_enforced() {
        let g = pd();
        let ego = EgoStrategy::uniform(1);
        let err = solve_cce_lp_capped(&g, &ego, &Objective::Utility(0), Sense::Minimize, &[0.0, 0.0], 3).unwrap_err();
        assert_eq!(err, Error::CapExceeded { size: 4, cap: 3 });
    }

    #[test]
    fn optimizer_is_member() {
        let g = pennies();
        let ego = EgoStrategy::uniform(1);
        let stage = StageGame::new(&g, &ego).unwrap();
        let (joint, _) = solve_cce_lp(&g, &ego, &Objective::Utility(1), Sense::Maximize, &[0.1, 0.2]).unwrap();
        let r = dense_regret(&stage, &joint);
        assert!(r.per_agent_regret[0] <= 0.1 + 1e-6 && r.per_agent_regret[1] <= 0.2 + 1e-6);
        let via_mixture = stage.regret(&joint.to_mixture().unwrap()).unwrap();
        for (a, b) in r.per_agent_regret.iter().zip(&via_mixture.per_agent_regret) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}
