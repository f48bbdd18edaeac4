//! Test environments: random N-player matrix games, the 4×4 grid bimatrix
//! game with a passive gambler, agent reward transforms and welfare
//! functions.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{DenseGame, Game};
use crate::math;
use crate::oracle::DEFAULT_DENSE_CAP;
use crate::rng;

/// Random game with i.i.d. payoffs uniform in `[-1, 1]`. `num_agents`
/// counts the gambler, which is agent 0 and plays like everyone else.
pub fn make_nmatrix(num_agents: usize, actions: usize, seed: u64) -> Result<DenseGame> {
    if num_agents < 2 {
        return Err(Error::param("need the gambler and at least one other agent"));
    }
    if actions == 0 {
        return Err(Error::param("agents need at least one action"));
    }
    let mut size: usize = 1;
    for _ in 0..num_agents {
        size = size.saturating_mul(actions);
    }
    let cap = DEFAULT_DENSE_CAP;
    if size > cap {
        return Err(Error::CapExceeded { size, cap });
    }
    random_game(actions, vec![actions; num_agents - 1], seed)
}

/// Game of the given shape with every payoff (ego included) i.i.d.
/// uniform in `[-1, 1]`, declared bounds `[-1, 1]`.
pub fn random_game(ego_actions: usize, action_counts: Vec<usize>, seed: u64) -> Result<DenseGame> {
    let mut rng = rng::seeded(seed);
    DenseGame::from_fn(ego_actions, action_counts, Some((-1.0, 1.0)), |_, _, _| {
        2.0 * rng::unit(&mut rng) - 1.0
    })
}

/// Prisoner's dilemma between two agents (C = 0, D = 1) with a passive
/// one-action ego whose payoff equals agent 1's.
pub fn prisoners_dilemma() -> DenseGame {
    let u = [[3.0, 0.0], [4.0, 1.0]];
    DenseGame::from_fn(1, vec![2, 2], None, |i, _, j| match i {
        2 => u[j[1]][j[0]],
        _ => u[j[0]][j[1]],
    })
    .expect("fixed shape")
}

/// Matching pennies for agents 1 and 2; the passive ego shares agent 1's
/// payoff.
pub fn matching_pennies() -> DenseGame {
    DenseGame::from_fn(1, vec![2, 2], None, |i, _, j| {
        let s = if j[0] == j[1] { 1.0 } else { -1.0 };
        if i == 2 {
            -s
        } else {
            s
        }
    })
    .expect("fixed shape")
}

/// Pure coordination on two equilibria of unequal value; the ego gets the
/// common payoff.
pub fn coordination() -> DenseGame {
    let u = [[2.0, 0.0], [0.0, 1.0]];
    DenseGame::from_fn(1, vec![2, 2], None, |_, _, j| u[j[0]][j[1]]).expect("fixed shape")
}

/// The ego picks T or B (rows), a single agent picks L or R. T is best if
/// the agent is exactly rational; the agent loses only 1 by playing R
/// against T, which costs the ego 50.
pub fn samuelson() -> DenseGame {
    let ego = [[100.0, 50.0], [99.0, 99.0]];
    let agent = [[100.0, 99.0], [100.0, 99.0]];
    DenseGame::from_fn(2, vec![2], None, |i, a0, j| match i {
        0 => ego[a0][j[0]],
        _ => agent[a0][j[0]],
    })
    .expect("fixed shape")
}

pub const GRID: usize = 4;
pub const DEFAULT_EPISODE_LENGTH: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Toroidal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowMove {
    Up,
    Down,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColMove {
    Left,
    Right,
}

/// Two agents on a 4×4 grid earning `r1`, `r2` at the current cell while
/// a passive gambler earns `rg`. Tables are indexed `[row][col]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridBimatrixGame {
    pub r1: [[f64; GRID]; GRID],
    pub r2: [[f64; GRID]; GRID],
    pub rg: [[f64; GRID]; GRID],
    pub nash_cell: (usize, usize),
    pub episode_length: usize,
    pub boundary: Boundary,
}

/// Builds the grid game around a seed-chosen defect cell `(a, b)`:
///
/// ```text
/// r1(i, j) = 0.5 + 0.1 (3 − |i − a|) − 0.2 (3 − |j − b|)
/// r2(i, j) = 0.5 + 0.1 (3 − |j − b|) − 0.2 (3 − |i − a|)
/// rg(i, j) = ((3 − |i − a|) + (3 − |j − b|)) / 6
/// ```
///
/// Moving toward the defect cell always pays for the mover and costs the
/// other agent twice as much, so `(a, b)` is the unique pure Nash cell of
/// the stage game while cells far from it pay both agents more.
pub fn make_grid_bimatrix(seed: u64) -> Result<GridBimatrixGame> {
    let mut rng = rng::seeded(seed);
    let a = (rng::unit(&mut rng) * GRID as f64) as usize % GRID;
    let b = (rng::unit(&mut rng) * GRID as f64) as usize % GRID;
    let top = (GRID - 1) as f64;
    let close = |x: usize, c: usize| top - (x as f64 - c as f64).abs();
    let mut g = GridBimatrixGame {
        r1: [[0.0; GRID]; GRID],
        r2: [[0.0; GRID]; GRID],
        rg: [[0.0; GRID]; GRID],
        nash_cell: (a, b),
        episode_length: DEFAULT_EPISODE_LENGTH,
        boundary: Boundary::Toroidal,
    };
    for i in 0..GRID {
        for j in 0..GRID {
            let (ci, cj) = (close(i, a), close(j, b));
            g.r1[i][j] = 0.5 + 0.1 * ci - 0.2 * cj;
            g.r2[i][j] = 0.5 + 0.1 * cj - 0.2 * ci;
            g.rg[i][j] = (ci + cj) / (2.0 * top);
        }
    }
    g.validate()?;
    Ok(g)
}

impl GridBimatrixGame {
    /// Checks the dilemma structure by enumeration.
    pub fn validate(&self) -> Result<()> {
        let (a, b) = self.nash_cell;
        let mut nash = Vec::new();
        for i in 0..GRID {
            for j in 0..GRID {
                let row_best = (0..GRID).all(|k| self.r1[k][j] <= self.r1[i][j]);
                let col_best = (0..GRID).all(|k| self.r2[i][k] <= self.r2[i][j]);
                if row_best && col_best {
                    nash.push((i, j));
                }
            }
        }
        if nash != [(a, b)] {
            return Err(Error::Internal(alloc::format!("pure Nash cells {:?}, expected [{:?}]", nash, (a, b))));
        }
        // strict best responses on the Nash row and column
        if (0..GRID).any(|k| k != a && self.r1[k][b] >= self.r1[a][b])
            || (0..GRID).any(|k| k != b && self.r2[a][k] >= self.r2[a][b])
        {
            return Err(Error::Internal("Nash cell is not a strict best-response pair".into()));
        }
        let g_best = self.rg.iter().flatten().cloned().fold(f64::NEG_INFINITY, f64::max);
        if self.rg[a][b] < g_best {
            return Err(Error::Internal("gambler payoff is not maximal at the Nash cell".into()));
        }
        let nash_sum = self.r1[a][b] + self.r2[a][b];
        let coop = self.cooperative_cell();
        if self.r1[coop.0][coop.1] + self.r2[coop.0][coop.1] <= nash_sum {
            return Err(Error::Internal("no cell beats the Nash cell's joint payoff".into()));
        }
        Ok(())
    }

    /// Cell with the highest `r1 + r2`.
    pub fn cooperative_cell(&self) -> (usize, usize) {
        let mut best = (0, 0);
        for i in 0..GRID {
            for j in 0..GRID {
                if self.r1[i][j] + self.r2[i][j] > self.r1[best.0][best.1] + self.r2[best.0][best.1] {
                    best = (i, j);
                }
            }
        }
        best
    }

    /// Stage game in which the row agent picks a row and the column agent
    /// a column; the gambler is the ego with a single action.
    pub fn stage_game(&self) -> Result<DenseGame> {
        DenseGame::from_fn(1, vec![GRID, GRID], None, |agent, _, joint| {
            let (i, j) = (joint[0], joint[1]);
            match agent {
                0 => self.rg[i][j],
                1 => self.r1[i][j],
                _ => self.r2[i][j],
            }
        })
    }

    /// One-step game at `state`: each agent picks a move and everyone is
    /// paid at the resulting cell. Actions are `[Up, Down]` and
    /// `[Left, Right]`.
    pub fn move_game(&self, state: (usize, usize)) -> Result<DenseGame> {
        DenseGame::from_fn(1, vec![2, 2], None, |agent, _, joint| {
            let rm = if joint[0] == 0 { RowMove::Up } else { RowMove::Down };
            let cm = if joint[1] == 0 { ColMove::Left } else { ColMove::Right };
            let (i, j) = step_grid(state, rm, cm);
            match agent {
                0 => self.rg[i][j],
                1 => self.r1[i][j],
                _ => self.r2[i][j],
            }
        })
    }

    /// Plays an episode from `start`, returning summed `(r1, r2, rg)`.
    pub fn episode(
        &self,
        start: (usize, usize),
        steps: usize,
        mut policy: impl FnMut((usize, usize)) -> (RowMove, ColMove),
    ) -> (f64, f64, f64) {
        let mut s = start;
        let mut totals = (0.0, 0.0, 0.0);
        for _ in 0..steps {
            let (rm, cm) = policy(s);
            s = step_grid(s, rm, cm);
            totals.0 += self.r1[s.0][s.1];
            totals.1 += self.r2[s.0][s.1];
            totals.2 += self.rg[s.0][s.1];
        }
        totals
    }
}

/// Moves on the 4×4 torus.
pub fn step_grid(state: (usize, usize), row: RowMove, col: ColMove) -> (usize, usize) {
    let (i, j) = (state.0 % GRID, state.1 % GRID);
    let i = match row {
        RowMove::Up => (i + GRID - 1) % GRID,
        RowMove::Down => (i + 1) % GRID,
    };
    let j = match col {
        ColMove::Left => (j + GRID - 1) % GRID,
        ColMove::Right => (j + 1) % GRID,
    };
    (i, j)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RewardTransform {
    Identity,
    /// `r − Q r_g`.
    Adversarial { q: f64 },
    /// `(r^{1−η} − 1) / (1 − η)` on a positive reward.
    RiskAverse { eta: f64 },
    Isoelastic { eta: f64 },
}

impl RewardTransform {
    pub fn validate(&self) -> Result<()> {
        match *self {
            RewardTransform::Identity => Ok(()),
            RewardTransform::Adversarial { q } => {
                if q.is_finite() && q >= 0.0 {
                    Ok(())
                } else {
                    Err(Error::param("adversarial Q must be finite and nonnegative"))
                }
            }
            RewardTransform::RiskAverse { eta } | RewardTransform::Isoelastic { eta } => {
                if eta.is_finite() && eta > 0.0 && eta != 1.0 {
                    Ok(())
                } else {
                    Err(Error::param("eta must be positive and different from 1"))
                }
            }
        }
    }
}

/// Applies `t` to an agent reward `r_i` given the gambler reward `r_g`.
/// The power transforms need `r_i > 0`; see [`shift_positive`].
pub fn apply_transform(t: &RewardTransform, r_i: f64, r_g: f64) -> Result<f64> {
    t.validate()?;
    match *t {
        RewardTransform::Identity => Ok(r_i),
        RewardTransform::Adversarial { q } => Ok(r_i - q * r_g),
        RewardTransform::RiskAverse { eta } | RewardTransform::Isoelastic { eta } => {
            if r_i.is_nan() || r_i <= 0.0 {
                return Err(Error::param(alloc::format!(
                    "power transform needs a positive reward, got {r_i}; shift rewards first"
                )));
            }
            Ok((math::powf(r_i, 1.0 - eta) - 1.0) / (1.0 - eta))
        }
    }
}

/// Affine map of `[lo, hi]` onto `[0.1, 1.1]`.
pub fn shift_positive(r: f64, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        0.1 + (r - lo) / (hi - lo)
    } else {
        0.6
    }
}

/// Copy of `game` in which every non-ego agent's payoff is transformed
/// against the ego's payoff at the same profile. Power transforms first
/// shift the game's payoff range onto `[0.1, 1.1]`.
pub fn transform_game<G: Game + ?Sized>(game: &G, t: &RewardTransform) -> Result<DenseGame> {
    t.validate()?;
    let (lo, hi) = game.payoff_bounds();
    let power = matches!(t, RewardTransform::RiskAverse { .. } | RewardTransform::Isoelastic { .. });
    let mut err = None;
    let out = DenseGame::from_fn(game.ego_actions(), game.action_counts().to_vec(), None, |agent, a0, joint| {
        let r = game.payoff(agent, a0, joint);
        if agent == 0 {
            return r;
        }
        let base = if power { shift_positive(r, lo, hi) } else { r };
        match apply_transform(t, base, game.payoff(0, a0, joint)) {
            Ok(v) => v,
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        }
    });
    match err {
        Some(e) => Err(e),
        None => out,
    }
}

/// Mean-absolute-difference Gini coefficient, `None` when every income
/// is zero.
pub fn gini(z: &[f64]) -> Result<Option<f64>> {
    check_incomes(z)?;
    let total: f64 = z.iter().sum();
    if total == 0.0 {
        return Ok(None);
    }
    let mut diff = 0.0;
    for a in z {
        for b in z {
            diff += (a - b).abs();
        }
    }
    Ok(Some(diff / (2.0 * z.len() as f64 * total)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Welfare {
    pub gini: f64,
    pub equality: f64,
    pub productivity: f64,
    pub swf: f64,
    /// Set when all incomes are zero and the Gini coefficient is undefined.
    pub degenerate: bool,
}

/// `(1 − N/(N−1) gini(z)) · Σ z`.
pub fn welfare(z: &[f64]) -> Result<Welfare> {
    let productivity: f64 = z.iter().sum();
    match gini(z)? {
        None => Ok(Welfare {
            gini: 0.0,
            equality: 1.0,
            productivity,
            swf: 0.0,
            degenerate: true,
        }),
        Some(g) => {
            let n = z.len() as f64;
            let equality = 1.0 - n / (n - 1.0) * g;
            Ok(Welfare {
                gini: g,
                equality,
                productivity,
                swf: equality * productivity,
                degenerate: false,
            })
        }
    }
}

pub fn swf(z: &[f64]) -> Result<f64> {
    Ok(welfare(z)?.swf)
}

fn check_incomes(z: &[f64]) -> Result<()> {
    if z.len() < 2 {
        return Err(Error::param("welfare needs at least two incomes"));
    }
    if z.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::param("incomes must be finite and nonnegative"));
    }
    Ok(())
}
