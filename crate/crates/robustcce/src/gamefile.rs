//! Game files: the dense JSON format and the built-in generators.

use std::path::Path;

use anyhow::{bail, Context, Result};
use robustcce_core::envs::{self, GridBimatrixGame};
use robustcce_core::DenseGame;
use serde::{Deserialize, Serialize};

use crate::output::write_atomic;

/// Where a game comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GameSource {
    File {
        path: String,
    },
    /// Random game with every agent (ego included) having `actions`
    /// actions; `agents` counts the ego.
    Nmatrix {
        #[serde(default = "default_agents")]
        agents: usize,
        #[serde(default = "default_actions")]
        actions: usize,
        #[serde(default)]
        seed: u64,
    },
    /// The 4×4 grid game with a passive gambler as ego.
    Grid {
        #[serde(default)]
        seed: u64,
    },
    /// Payoffs uniform in [-1, 1] for the given non-ego shape.
    Random {
        shape: Vec<usize>,
        #[serde(default = "one")]
        ego_actions: usize,
        #[serde(default)]
        seed: u64,
    },
    PrisonersDilemma,
    MatchingPennies,
    Coordination,
    Samuelson,
}

fn default_agents() -> usize {
    4
}

fn default_actions() -> usize {
    7
}

fn one() -> usize {
    1
}

impl GameSource {
    pub fn build(&self) -> Result<DenseGame> {
        Ok(match self {
            GameSource::File { path } => load_game(Path::new(path))?,
            GameSource::Nmatrix { agents, actions, seed } => envs::make_nmatrix(*agents, *actions, *seed)?,
            GameSource::Grid { seed } => envs::make_grid_bimatrix(*seed)?.stage_game()?,
            GameSource::Random {
                shape,
                ego_actions,
                seed,
            } => envs::random_game(*ego_actions, shape.clone(), *seed)?,
            GameSource::PrisonersDilemma => envs::prisoners_dilemma(),
            GameSource::MatchingPennies => envs::matching_pennies(),
            GameSource::Coordination => envs::coordination(),
            GameSource::Samuelson => envs::samuelson(),
        })
    }

    /// The grid description, for sources that have one.
    pub fn grid(&self) -> Result<Option<GridBimatrixGame>> {
        match self {
            GameSource::Grid { seed } => Ok(Some(envs::make_grid_bimatrix(*seed)?)),
            _ => Ok(None),
        }
    }
}

/// Grid games are written as the stage game plus the grid tables under
/// `"grid"`, so the file still loads as a plain dense game.
#[derive(Serialize)]
struct GridFile<'a> {
    #[serde(flatten)]
    game: &'a DenseGame,
    grid: &'a GridBimatrixGame,
}

pub fn game_json(game: &DenseGame, grid: Option<&GridBimatrixGame>) -> Result<String> {
    let mut s = match grid {
        Some(grid) => serde_json::to_string_pretty(&GridFile { game, grid })?,
        None => serde_json::to_string_pretty(game)?,
    };
    s.push('\n');
    Ok(s)
}

pub fn parse_game(text: &str) -> Result<DenseGame> {
    #[derive(Deserialize)]
    struct Header {
        num_agents: usize,
    }
    let header: Header = serde_json::from_str(text).context("game file is not a JSON game object")?;
    let game: DenseGame = serde_json::from_str(text)?;
    let game = game.validated()?;
    if header.num_agents != robustcce_core::Game::num_agents(&game) {
        bail!(
            "num_agents = {} disagrees with action_counts of length {}",
            header.num_agents,
            robustcce_core::Game::num_agents(&game)
        );
    }
    Ok(game)
}

pub fn load_game(path: &Path) -> Result<DenseGame> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading game file {}", path.display()))?;
    parse_game(&text).with_context(|| format!("loading game file {}", path.display()))
}

pub fn save_game(path: &Path, game: &DenseGame, grid: Option<&GridBimatrixGame>) -> Result<()> {
    write_atomic(path, game_json(game, grid)?.as_bytes())
}
