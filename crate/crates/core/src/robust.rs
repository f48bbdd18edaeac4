//! Robust ego training: a bandit over ego actions rewarded with the
//! pessimistic value an inner sampler reports for each action, plus the
//! train/test cross evaluation against agent populations.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::blackwell::{worst_case_cce, BlackwellConfig};
use crate::dynamics::{run_dynamics, CostGame, FeedbackMode};
use crate::envs::{transform_game, RewardTransform};
use crate::error::{Error, Result};
use crate::game::{DenseGame, Game, Objective, StageGame};
use crate::lagrangian::{
    sample_pessimistic_stage, Blackbox, LagrangianState, MultiplierMode, RegretEstimator, DEFAULT_ALPHA, DEFAULT_LAMBDA0,
    DEFAULT_LAMBDA_MAX,
};
use crate::learner::{Feedback, LearnerKind, LearnerState};
use crate::math;
use crate::oracle::{solve_stage_lp, Sense, DEFAULT_DENSE_CAP};
use crate::regret::mixture_expectation;
use crate::rng::{self, derive_seed};
use crate::strategy::EgoStrategy;

/// Multiplier settings for a Lagrangian inner loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LagrangianParams {
    pub lambda0: f64,
    pub alpha_lambda: f64,
    pub lambda_max: f64,
    pub rounds: usize,
    pub selfplay_steps: usize,
    pub mode: MultiplierMode,
    pub blackbox: Blackbox,
    pub estimator: RegretEstimator,
}

impl Default for LagrangianParams {
    fn default() -> Self {
        LagrangianParams {
            lambda0: DEFAULT_LAMBDA0,
            alpha_lambda: DEFAULT_ALPHA,
            lambda_max: DEFAULT_LAMBDA_MAX,
            rounds: 300,
            selfplay_steps: 200,
            mode: MultiplierMode::Dynamic,
            blackbox: Blackbox::default(),
            estimator: RegretEstimator::EXACT,
        }
    }
}

impl LagrangianParams {
    pub fn state(&self, n: usize, eps: f64) -> LagrangianState {
        LagrangianState {
            lambdas: vec![self.lambda0; n],
            alpha_lambda: self.alpha_lambda,
            lambda_max: self.lambda_max,
            mode: self.mode,
            ..LagrangianState::new(n, eps, self.rounds, self.selfplay_steps)
        }
    }
}

/// A group of agents with a shared reward transform and learner, used as
/// a fixed test opponent or a non-robust training target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Population {
    pub name: String,
    pub transform: RewardTransform,
    pub blackbox: Blackbox,
    pub selfplay_steps: usize,
    /// Self-play runs averaged when the population serves as a training
    /// target.
    pub train_episodes: usize,
}

impl Default for Population {
    fn default() -> Self {
        Population {
            name: "original".into(),
            transform: RewardTransform::Identity,
            blackbox: Blackbox::default(),
            selfplay_steps: 300,
            train_episodes: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InnerSampler {
    Blackwell(BlackwellConfig),
    Lagrangian(LagrangianParams),
    /// Exact ε-CCE minimum of the ego's utility.
    LpOracle,
    /// Plain self-play of a population; not pessimistic.
    Population(Population),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EgoBandit {
    /// `None` uses `√(2 ln m₀ / (m₀ T))`.
    pub learning_rate: Option<f64>,
    /// Entropy bonus mixing the bandit with uniform play.
    pub entropy_floor: f64,
}

impl Default for EgoBandit {
    fn default() -> Self {
        EgoBandit {
            learning_rate: None,
            entropy_floor: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobustTrainerConfig {
    pub inner: InnerSampler,
    /// Regret slack granted to every non-ego agent.
    pub eps: f64,
    pub outer_steps: usize,
    pub ego_bandit: EgoBandit,
}

impl Default for RobustTrainerConfig {
    fn default() -> Self {
        RobustTrainerConfig {
            inner: InnerSampler::LpOracle,
            eps: 0.0,
            outer_steps: 1000,
            ego_bandit: EgoBandit::default(),
        }
    }
}

impl RobustTrainerConfig {
    pub fn validate<G: Game + ?Sized>(&self, game: &G) -> Result<()> {
        if self.outer_steps == 0 {
            return Err(Error::param("outer_steps must be positive"));
        }
        if !(self.eps.is_finite() && self.eps >= 0.0) {
            return Err(Error::param("eps must be finite and nonnegative"));
        }
        let fl = self.ego_bandit.entropy_floor;
        if !(fl.is_finite() && fl >= 0.0) {
            return Err(Error::param("entropy floor must be nonnegative"));
        }
        if let InnerSampler::LpOracle = self.inner {
            let size: usize = game.action_counts().iter().product();
            if size > DEFAULT_DENSE_CAP {
                return Err(Error::CapExceeded {
                    size,
                    cap: DEFAULT_DENSE_CAP,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InnerFailure {
    pub step: usize,
    pub ego_action: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustTraining {
    /// Time-averaged bandit strategy.
    pub ego: EgoStrategy,
    /// Bandit strategy after the last step.
    pub last: EgoStrategy,
    /// Inner value fed to the bandit at each step, in payoff units.
    pub value_trace: Vec<f64>,
    pub actions: Vec<usize>,
    /// Inner value per ego action (`None` if never evaluated).
    pub action_values: Vec<Option<f64>>,
    pub failures: Vec<InnerFailure>,
}

/// Ego payoff of a population's self-play against `ego`, in the original
/// game's units.
pub fn population_value<G: Game + ?Sized>(game: &G, ego: &EgoStrategy, pop: &Population, seed: u64) -> Result<f64> {
    let transformed = transform_game(game, &pop.transform)?;
    let stage = StageGame::new(&transformed, ego)?;
    let costs: Vec<Vec<f64>> = (1..=stage.num_agents())
        .map(|i| stage.table(i).iter().map(|u| -u).collect())
        .collect();
    let mut cost_game = CostGame::new(stage.space().clone(), costs)?;
    cost_game.rescale_unit();
    let mut learners = pop.blackbox.learners(stage.counts(), pop.selfplay_steps, derive_seed(seed, 1))?;
    let res = run_dynamics(
        &cost_game,
        pop.selfplay_steps,
        &mut learners,
        FeedbackMode::FullInformation,
        derive_seed(seed, 2),
    )?;
    Ok(mixture_expectation(stage.space(), stage.table(0), &res.empirical_mixture))
}

/// Pessimistic value of ego action `a0` under `inner`.
pub fn inner_value<G: Game + ?Sized>(game: &G, a0: usize, inner: &InnerSampler, eps: f64, seed: u64) -> Result<f64> {
    let ego = EgoStrategy::pure(a0, game.ego_actions());
    let n = game.num_agents();
    match inner {
        InnerSampler::LpOracle => {
            let stage = StageGame::new(game, &ego)?;
            let (_, v) = solve_stage_lp(&stage, stage.table(0), Sense::Minimize, &vec![eps; n], DEFAULT_DENSE_CAP)?;
            Ok(v)
        }
        InnerSampler::Blackwell(cfg) => {
            let cfg = BlackwellConfig { seed, ..cfg.clone() };
            let res = worst_case_cce(game, &ego, &Objective::NegUtility(0), &vec![eps; n], &cfg)?;
            Ok(-res.value)
        }
        InnerSampler::Lagrangian(p) => {
            let stage = StageGame::new(game, &ego)?;
            let mut state = p.state(n, eps);
            Ok(sample_pessimistic_stage(&stage, &mut state, &p.blackbox, &p.estimator, seed)?.lower_bound)
        }
        InnerSampler::Population(pop) => {
            let runs = pop.train_episodes.max(1);
            let mut total = 0.0;
            for e in 0..runs {
                total += population_value(game, &ego, pop, derive_seed(seed, e as u64))?;
            }
            Ok(total / runs as f64)
        }
    }
}

/// Runs the outer bandit. Inner runs are deterministic in
/// `(game, a0, seed)`, so each ego action is evaluated once and reused.
pub fn train_robust<G: Game + ?Sized>(game: &G, config: &RobustTrainerConfig, seed: u64) -> Result<RobustTraining> {
    config.validate(game)?;
    let m0 = game.ego_actions();
    let (lo, hi) = game.payoff_bounds();
    let range = if hi > lo { hi - lo } else { 1.0 };
    let steps = config.outer_steps;
    let rate = config.ego_bandit.learning_rate.unwrap_or_else(|| {
        let m = m0.max(2) as f64;
        math::sqrt(2.0 * math::ln(m) / (m * steps as f64))
    });
    let mut bandit = LearnerState::new(LearnerKind::Exp3, m0, rate, config.ego_bandit.entropy_floor)?;
    let mut rng = rng::seeded(derive_seed(seed, 0));
    let mut cache: Vec<Option<f64>> = vec![None; m0];
    let mut average = vec![0.0; m0];
    let mut trace = Vec::with_capacity(steps);
    let mut actions = Vec::with_capacity(steps);
    let mut failures = Vec::new();

    for step in 0..steps {
        let p = bandit.strategy();
        for (a, v) in average.iter_mut().zip(&p) {
            *a += v / steps as f64;
        }
        let a0 = rng::categorical(&mut rng, &p);
        let value = match cache[a0] {
            Some(v) => v,
            None => {
                let v = match inner_value(game, a0, &config.inner, config.eps, derive_seed(seed, 1 + a0 as u64)) {
                    Ok(v) => v,
                    Err(e) => {
                        failures.push(InnerFailure {
                            step,
                            ego_action: a0,
                            message: e.to_string(),
                        });
                        lo
                    }
                };
                cache[a0] = Some(v);
                v
            }
        };
        let reward = ((value - lo) / range).clamp(0.0, 1.0);
        bandit.step(Feedback::Bandit {
            action: a0,
            loss: 1.0 - reward,
        })?;
        trace.push(value);
        actions.push(a0);
    }
    let total: f64 = average.iter().sum();
    average.iter_mut().for_each(|v| *v /= total);
    Ok(RobustTraining {
        ego: EgoStrategy::new(average),
        last: EgoStrategy::new(bandit.strategy()),
        value_trace: trace,
        actions,
        action_values: cache,
        failures,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellStat {
    pub mean: f64,
    pub stderr: f64,
}

/// Rows are trained ego strategies, columns are test populations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossTable {
    pub cells: Vec<Vec<CellStat>>,
}

pub fn mean_stderr(xs: &[f64]) -> CellStat {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let stderr = if xs.len() > 1 {
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        math::sqrt(var / n)
    } else {
        0.0
    };
    CellStat { mean, stderr }
}

/// Mean ego reward of every trained strategy against every population,
/// over `episodes` independently seeded self-play runs.
pub fn evaluate_cross<G: Game + ?Sized>(
    game: &G,
    egos: &[EgoStrategy],
    populations: &[Population],
    episodes: usize,
    seed: u64,
) -> Result<CrossTable> {
    if episodes == 0 {
        return Err(Error::param("episodes must be positive"));
    }
    let dense = DenseGame::from_game(game)?;
    let mut cells = Vec::with_capacity(egos.len());
    for ego in egos {
        ego.validate(game.ego_actions())?;
        let mut row = Vec::with_capacity(populations.len());
        for (c, pop) in populations.iter().enumerate() {
            let values = (0..episodes)
                .map(|e| population_value(&dense, ego, pop, derive_seed(seed, (c * episodes + e) as u64)))
                .collect::<Result<Vec<f64>>>()?;
            row.push(mean_stderr(&values));
        }
        cells.push(row);
    }
    Ok(CrossTable { cells })
}
