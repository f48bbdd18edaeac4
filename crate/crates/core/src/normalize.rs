//! Affine rescaling of payoffs into the unit ball `[-1, 1]`.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::game::{DenseGame, Game};

/// `normalized = (original − offset) / scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineMap {
    pub offset: f64,
    pub scale: f64,
}

impl AffineMap {
    pub const IDENTITY: AffineMap = AffineMap { offset: 0.0, scale: 1.0 };

    pub fn to_normalized(&self, v: f64) -> f64 {
        (v - self.offset) / self.scale
    }

    pub fn to_original(&self, v: f64) -> f64 {
        v * self.scale + self.offset
    }

    /// Converts a payoff difference (regret, slack) into normalized units.
    pub fn diff_to_normalized(&self, d: f64) -> f64 {
        d / self.scale
    }

    pub fn diff_to_original(&self, d: f64) -> f64 {
        d * self.scale
    }
}

#[derive(Debug, Clone)]
pub struct NormalizedGame {
    pub game: DenseGame,
    pub map: AffineMap,
    /// Set when the source game was constant; `game` is then all zeros.
    pub degenerate: bool,
}

/// Rescales payoffs to `[-1, 1]` using the declared payoff bounds. Games
/// already inside the unit ball are returned unchanged.
pub fn normalize_payoffs<G: Game + ?Sized>(game: &G) -> Result<NormalizedGame> {
    let dense = DenseGame::from_game(game)?;
    let (lo, hi) = game.payoff_bounds();
    let counts = dense.action_counts().to_vec();
    let m0 = dense.ego_actions();
    if hi <= lo {
        let zeros: Vec<f64> = dense.payoffs().iter().map(|_| 0.0).collect();
        return Ok(NormalizedGame {
            game: DenseGame::new(m0, counts, zeros, Some((0.0, 0.0)))?,
            map: AffineMap { offset: lo, scale: 1.0 },
            degenerate: true,
        });
    }
    if lo >= -1.0 && hi <= 1.0 {
        return Ok(NormalizedGame {
            game: dense,
            map: AffineMap::IDENTITY,
            degenerate: false,
        });
    }
    let map = AffineMap {
        offset: 0.5 * (lo + hi),
        scale: 0.5 * (hi - lo),
    };
    let payoffs: Vec<f64> = dense
        .payoffs()
        .iter()
        .map(|&p| map.to_normalized(p).clamp(-1.0, 1.0))
        .collect();
    Ok(NormalizedGame {
        game: DenseGame::new(m0, counts, payoffs, Some((-1.0, 1.0)))?,
        map,
        degenerate: false,
    })
}
