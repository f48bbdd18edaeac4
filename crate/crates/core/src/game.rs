//! Game representation.
//!
//! Agents are indexed `0..=n`: agent 0 is the ego, agents `1..=n` are the
//! strategic players whose joint play is the object of every equilibrium
//! computation. Joint profiles of the non-ego agents are flattened in
//! row-major order (agent `n` varies fastest).

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::strategy::{EgoStrategy, ProductStrategy};

/// Shape of the non-ego joint action space with row-major strides.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionSpace {
    counts: Vec<usize>,
    strides: Vec<usize>,
    size: usize,
}

impl ActionSpace {
    pub fn new(counts: &[usize]) -> Result<Self> {
        if counts.contains(&0) {
            return Err(Error::shape("every agent needs at least one action"));
        }
        let mut strides = vec![1usize; counts.len()];
        let mut size = 1usize;
        for k in (0..counts.len()).rev() {
            strides[k] = size;
            size = size
                .checked_mul(counts[k])
                .ok_or_else(|| Error::shape("joint action space overflows usize"))?;
        }
        Ok(ActionSpace {
            counts: counts.to_vec(),
            strides,
            size,
        })
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn num_agents(&self) -> usize {
        self.counts.len()
    }

    /// Number of joint profiles, `∏ m_i`.
    pub fn size(&self) -> usize {
        self.size
    }

    /// Total number of individual actions, `Σ m_i`.
    pub fn total_actions(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn encode(&self, actions: &[usize]) -> usize {
        actions
            .iter()
            .zip(&self.strides)
            .map(|(a, s)| a * s)
            .sum()
    }

    pub fn decode(&self, mut index: usize, out: &mut [usize]) {
        for (o, &s) in out.iter_mut().zip(&self.strides) {
            *o = index / s;
            index %= s;
        }
    }

    pub fn decode_vec(&self, index: usize) -> Vec<usize> {
        let mut out = vec![0; self.counts.len()];
        self.decode(index, &mut out);
        out
    }

    /// Index of the profile obtained by replacing agent `k`'s action
    /// (0-based over non-ego agents) in `index` with `action`.
    pub fn with_action(&self, index: usize, k: usize, action: usize) -> usize {
        let current = (index / self.strides[k]) % self.counts[k];
        index - current * self.strides[k] + action * self.strides[k]
    }

    pub fn action_of(&self, index: usize, k: usize) -> usize {
        (index / self.strides[k]) % self.counts[k]
    }

    /// Contracts `table` against the product strategy along every axis
    /// except `keep`. Returns the length-`m_keep` deviation vector, or a
    /// single expectation when `keep` is `None`.
    pub fn contract(&self, table: &[f64], strategy: &ProductStrategy, keep: Option<usize>) -> Vec<f64> {
        debug_assert_eq!(table.len(), self.size);
        let mut shape = self.counts.clone();
        let mut cur: Vec<f64> = table.to_vec();
        for axis in (0..self.counts.len()).rev() {
            if Some(axis) == keep {
                continue;
            }
            let probs = strategy.agent(axis);
            let mid = shape[axis];
            let outer: usize = shape[..axis].iter().product();
            let inner: usize = shape[axis + 1..].iter().product();
            let mut next = vec![0.0; outer * inner];
            for o in 0..outer {
                for (a, &p) in probs.iter().enumerate() {
                    if p == 0.0 {
                        continue;
                    }
                    let src = &cur[(o * mid + a) * inner..(o * mid + a + 1) * inner];
                    let dst = &mut next[o * inner..(o + 1) * inner];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d += p * s;
                    }
                }
            }
            shape.remove(axis);
            cur = next;
        }
        cur
    }

    /// Joint probability of every profile under a product strategy.
    pub fn joint_probabilities(&self, strategy: &ProductStrategy) -> Vec<f64> {
        let mut out = vec![1.0; self.size];
        let mut actions = vec![0usize; self.counts.len()];
        for (idx, slot) in out.iter_mut().enumerate() {
            self.decode(idx, &mut actions);
            for (k, &a) in actions.iter().enumerate() {
                *slot *= strategy.agent(k)[a];
            }
        }
        out
    }
}

/// A game between an ego agent and `n` strategic agents, accessed through a
/// deterministic payoff evaluator.
pub trait Game {
    /// Number of non-ego agents `n`.
    fn num_agents(&self) -> usize;

    fn ego_actions(&self) -> usize;

    /// Action counts `m_1..m_n` of the non-ego agents.
    fn action_counts(&self) -> &[usize];

    /// Payoff of `agent` (0 = ego) at ego action `ego_action` and non-ego
    /// joint action `joint`.
    fn payoff(&self, agent: usize, ego_action: usize, joint: &[usize]) -> f64;

    /// Declared `(u_min, u_max)` covering every payoff.
    fn payoff_bounds(&self) -> (f64, f64);
}

/// Dense tensor game; payoffs flattened row-major over
/// `(agent, a0, a1, ..., an)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseGame {
    num_agents: usize,
    ego_actions: usize,
    action_counts: Vec<usize>,
    payoffs: Vec<f64>,
    payoff_bounds: (f64, f64),
    #[serde(skip)]
    space: Option<ActionSpace>,
}

impl DenseGame {
    pub fn new(
        ego_actions: usize,
        action_counts: Vec<usize>,
        payoffs: Vec<f64>,
        payoff_bounds: Option<(f64, f64)>,
    ) -> Result<Self> {
        if ego_actions == 0 {
            return Err(Error::shape("ego needs at least one action"));
        }
        if action_counts.is_empty() {
            return Err(Error::shape("a game needs at least one non-ego agent"));
        }
        let space = ActionSpace::new(&action_counts)?;
        let n = action_counts.len();
        let expected = (n + 1) * ego_actions * space.size();
        if payoffs.len() != expected {
            return Err(Error::shape(alloc::format!(
                "expected {} payoffs ((n+1)·m0·∏m_i), got {}",
                expected,
                payoffs.len()
            )));
        }
        if payoffs.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("payoffs"));
        }
        let lo = payoffs.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = payoffs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let bounds = match payoff_bounds {
            Some((blo, bhi)) => {
                if !(blo.is_finite() && bhi.is_finite()) || blo > bhi {
                    return Err(Error::param("payoff bounds must be finite with lo <= hi"));
                }
                if lo < blo {
                    return Err(Error::PayoffOutOfBounds { value: lo, lo: blo, hi: bhi });
                }
                if hi > bhi {
                    return Err(Error::PayoffOutOfBounds { value: hi, lo: blo, hi: bhi });
                }
                (blo, bhi)
            }
            None => (lo, hi),
        };
        Ok(DenseGame {
            num_agents: n,
            ego_actions,
            action_counts,
            payoffs,
            payoff_bounds: bounds,
            space: Some(space),
        })
    }

    /// Builds a dense game by evaluating `f(agent, a0, joint)` on every
    /// profile.
    pub fn from_fn(
        ego_actions: usize,
        action_counts: Vec<usize>,
        payoff_bounds: Option<(f64, f64)>,
        mut f: impl FnMut(usize, usize, &[usize]) -> f64,
    ) -> Result<Self> {
        let space = ActionSpace::new(&action_counts)?;
        let n = action_counts.len();
        let mut payoffs = Vec::with_capacity((n + 1) * ego_actions * space.size());
        let mut joint = vec![0; n];
        for agent in 0..=n {
            for a0 in 0..ego_actions {
                for idx in 0..space.size() {
                    space.decode(idx, &mut joint);
                    payoffs.push(f(agent, a0, &joint));
                }
            }
        }
        DenseGame::new(ego_actions, action_counts, payoffs, payoff_bounds)
    }

    /// Copies any [`Game`] into dense form.
    pub fn from_game<G: Game + ?Sized>(game: &G) -> Result<Self> {
        let bounds = game.payoff_bounds();
        DenseGame::from_fn(game.ego_actions(), game.action_counts().to_vec(), Some(bounds), |i, a0, j| {
            game.payoff(i, a0, j)
        })
    }

    pub fn space(&self) -> ActionSpace {
        match &self.space {
            Some(s) => s.clone(),
            None => ActionSpace::new(&self.action_counts).expect("validated on construction"),
        }
    }

    pub fn payoffs(&self) -> &[f64] {
        &self.payoffs
    }

    /// Re-derives cached fields after deserialization and re-validates.
    pub fn validated(self) -> Result<Self> {
        DenseGame::new(self.ego_actions, self.action_counts, self.payoffs, Some(self.payoff_bounds))
    }

    fn offset(&self, agent: usize, ego_action: usize) -> usize {
        let size: usize = self.action_counts.iter().product();
        (agent * self.ego_actions + ego_action) * size
    }

    /// Payoff slice of `agent` at ego action `a0`, indexed by joint profile.
    pub fn table(&self, agent: usize, ego_action: usize) -> &[f64] {
        let size: usize = self.action_counts.iter().product();
        let off = self.offset(agent, ego_action);
        &self.payoffs[off..off + size]
    }
}

impl Game for DenseGame {
    fn num_agents(&self) -> usize {
        self.num_agents
    }

    fn ego_actions(&self) -> usize {
        self.ego_actions
    }

    fn action_counts(&self) -> &[usize] {
        &self.action_counts
    }

    fn payoff(&self, agent: usize, ego_action: usize, joint: &[usize]) -> f64 {
        let mut idx = 0;
        for (a, m) in joint.iter().zip(&self.action_counts) {
            idx = idx * m + a;
        }
        self.payoffs[self.offset(agent, ego_action) + idx]
    }

    fn payoff_bounds(&self) -> (f64, f64) {
        self.payoff_bounds
    }
}

/// A linear objective ν over `(a0, joint)` profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// ν = u_i.
    Utility(usize),
    /// ν = −u_i; with `i = 0` this is the pessimistic objective.
    NegUtility(usize),
    /// Explicit table over `(a0, joint)`, row-major.
    Table(Vec<f64>),
}

/// A game with the ego strategy folded in: payoff tables for agents `0..=n`
/// over non-ego joint profiles, each averaged over the ego's mixed action.
#[derive(Debug, Clone)]
pub struct StageGame {
    space: ActionSpace,
    ego: Vec<f64>,
    /// `tables[i][p]`, agent `i` in `0..=n`.
    tables: Vec<Vec<f64>>,
    bounds: (f64, f64),
}

impl StageGame {
    pub fn new<G: Game + ?Sized>(game: &G, ego: &EgoStrategy) -> Result<Self> {
        ego.validate(game.ego_actions())?;
        let space = ActionSpace::new(game.action_counts())?;
        let n = game.num_agents();
        let mut tables = vec![vec![0.0; space.size()]; n + 1];
        let mut joint = vec![0; n];
        for idx in 0..space.size() {
            space.decode(idx, &mut joint);
            for (agent, table) in tables.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (a0, &w) in ego.dist.iter().enumerate() {
                    if w != 0.0 {
                        acc += w * game.payoff(agent, a0, &joint);
                    }
                }
                table[idx] = acc;
            }
        }
        Ok(StageGame {
            space,
            ego: ego.dist.clone(),
            tables,
            bounds: game.payoff_bounds(),
        })
    }

    /// Builds a stage game directly from per-agent tables (agent 0 first).
    pub fn from_tables(counts: &[usize], tables: Vec<Vec<f64>>) -> Result<Self> {
        let space = ActionSpace::new(counts)?;
        if tables.len() != counts.len() + 1 || tables.iter().any(|t| t.len() != space.size()) {
            return Err(Error::shape("stage tables must be (n+1) × ∏m_i"));
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for v in tables.iter().flatten() {
            if !v.is_finite() {
                return Err(Error::NonFinite("stage tables"));
            }
            lo = lo.min(*v);
            hi = hi.max(*v);
        }
        Ok(StageGame {
            space,
            ego: vec![1.0],
            tables,
            bounds: (lo, hi),
        })
    }

    pub fn space(&self) -> &ActionSpace {
        &self.space
    }

    pub fn num_agents(&self) -> usize {
        self.space.num_agents()
    }

    pub fn counts(&self) -> &[usize] {
        self.space.counts()
    }

    pub fn bounds(&self) -> (f64, f64) {
        self.bounds
    }

    /// Payoff table of agent `i` (0 = ego).
    pub fn table(&self, agent: usize) -> &[f64] {
        &self.tables[agent]
    }

    pub fn tables(&self) -> &[Vec<f64>] {
        &self.tables
    }

    pub fn check_agent(&self, agent: usize) -> Result<()> {
        if agent > self.num_agents() {
            Err(Error::InvalidAgent { agent, max: self.num_agents() })
        } else {
            Ok(())
        }
    }

    /// Conditions `obj` on the ego strategy, returning a table over joint
    /// profiles.
    pub fn objective_table(&self, obj: &Objective) -> Result<Vec<f64>> {
        match obj {
            Objective::Utility(i) => {
                self.check_agent(*i)?;
                Ok(self.tables[*i].clone())
            }
            Objective::NegUtility(i) => {
                self.check_agent(*i)?;
                Ok(self.tables[*i].iter().map(|v| -v).collect())
            }
            Objective::Table(t) => {
                let size = self.space.size();
                if t.len() != self.ego.len() * size {
                    return Err(Error::shape("objective table must be m0 × ∏m_i"));
                }
                let mut out = vec![0.0; size];
                for (a0, &w) in self.ego.iter().enumerate() {
                    for (o, v) in out.iter_mut().zip(&t[a0 * size..(a0 + 1) * size]) {
                        *o += w * v;
                    }
                }
                Ok(out)
            }
        }
    }

    /// Replaces the agent tables, keeping the shape.
    pub fn with_tables(&self, tables: Vec<Vec<f64>>) -> Result<Self> {
        let mut g = StageGame::from_tables(self.counts(), tables)?;
        g.ego = self.ego.clone();
        Ok(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encode_decode_row_major() {
        let s = ActionSpace::new(&[2, 3, 4]).unwrap();
        assert_eq!(s.size(), 24);
        assert_eq!(s.encode(&[1, 2, 3]), 12 + 8 + 3);
        assert_eq!(s.decode_vec(23), vec![1, 2, 3]);
        assert_eq!(s.with_action(s.encode(&[1, 0, 2]), 1, 2), s.encode(&[1, 2, 2]));
        assert_eq!(s.action_of(s.encode(&[0, 2, 1]), 1), 2);
    }

    #[test]
    fn dense_length_is_validated() {
        let err = DenseGame::new(1, vec![2, 2], vec![0.0; 11], None).unwrap_err();
        assert!(matches!(err, Error::Shape(_)));
        assert!(DenseGame::new(1, vec![2, 2], vec![0.0; 12], None).is_ok());
    }

    #[test]
    fn declared_bounds_must_cover_payoffs() {
        let err = DenseGame::new(1, vec![1], vec![0.0, 2.0], Some((0.0, 1.0))).unwrap_err();
        assert!(matches!(err, Error::PayoffOutOfBounds { .. }));
    }

    #[test]
    fn dense_lookup_matches_layout() {
        let g = DenseGame::from_fn(2, vec![2, 3], None, |i, a0, j| (i * 100 + a0 * 10 + j[0] * 3 + j[1]) as f64)
            .unwrap();
        assert_eq!(g.payoff(2, 1, &[1, 2]), 215.0);
        assert_eq!(g.table(1, 0)[g.space().encode(&[1, 1])], 104.0);
    }

    #[test]
    fn contraction_matches_enumeration() {
        let s = ActionSpace::new(&[2, 3]).unwrap();
        let table: Vec<f64> = (0..6).map(|v| v as f64).collect();
        let x = ProductStrategy::new(vec![vec![0.25, 0.75], vec![0.2, 0.3, 0.5]]);
        let dev = s.contract(&table, &x, Some(0));
        // row 0: 0*.2+1*.3+2*.5 = 1.3; row 1: 3*.2+4*.3+5*.5 = 4.3
        assert!((dev[0] - 1.3).abs() < 1e-12 && (dev[1] - 4.3).abs() < 1e-12);
        let all = s.contract(&table, &x, None);
        assert!((all[0] - (0.25 * 1.3 + 0.75 * 4.3)).abs() < 1e-12);
        let joint = s.joint_probabilities(&x);
        let direct: f64 = joint.iter().zip(&table).map(|(p, t)| p * t).sum();
        assert!((direct - all[0]).abs() < 1e-12);
    }

    #[test]
    fn stage_game_averages_over_ego() {
        let g = DenseGame::from_fn(2, vec![1], None, |i, a0, _| (i + 1) as f64 * a0 as f64).unwrap();
        let st = StageGame::new(&g, &EgoStrategy::new(vec![0.5, 0.5])).unwrap();
        assert_eq!(st.table(0), &[0.5]);
        assert_eq!(st.table(1), &[1.0]);
        let obj = st.objective_table(&Objective::Table(vec![2.0, 4.0])).unwrap();
        assert_eq!(obj, vec![3.0]);
    }
}
