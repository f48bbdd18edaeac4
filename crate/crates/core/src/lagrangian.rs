//! Decoupled sampling of pessimistic equilibria.
//!
//! Each round estimates every agent's regret under the current play,
//! moves the multipliers by dual ascent on `Reg_i − ε`, then lets the
//! agents self-play on the modified utilities
//! `û_i = (λ_i u_i − u_0) / (1 + λ_i)`. Small `λ_i` makes agent `i`
//! adversarial to the ego; large `λ_i` makes it self-interested.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dynamics::{run_dynamics, CostGame, FeedbackMode};
use crate::error::{Error, Result};
use crate::game::{Game, StageGame};
use crate::learner::{hedge_rate, Feedback, LearnerKind, LearnerState};
use crate::regret::mixture_expectation;
use crate::rng::{self, derive_seed, PortableRng};
use crate::strategy::{EgoStrategy, PlayMixture, ProductStrategy};

pub const DEFAULT_LAMBDA0: f64 = 8.0;
pub const DEFAULT_ALPHA: f64 = 0.01;
pub const DEFAULT_LAMBDA_MAX: f64 = 1e4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum MultiplierMode {
    #[default]
    Dynamic,
    Frozen,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagrangianState {
    /// One multiplier per non-ego agent.
    pub lambdas: Vec<f64>,
    /// Regret slack.
    pub eps: f64,
    pub alpha_lambda: f64,
    pub lambda_max: f64,
    pub rounds: usize,
    pub selfplay_steps: usize,
    pub mode: MultiplierMode,
    /// ū₀ of each round's self-play distribution.
    pub bound_trace: Vec<f64>,
}

impl LagrangianState {
    pub fn new(num_agents: usize, eps: f64, rounds: usize, selfplay_steps: usize) -> Self {
        LagrangianState {
            lambdas: vec![DEFAULT_LAMBDA0; num_agents],
            eps,
            alpha_lambda: DEFAULT_ALPHA,
            lambda_max: DEFAULT_LAMBDA_MAX,
            rounds,
            selfplay_steps,
            mode: MultiplierMode::Dynamic,
            bound_trace: Vec::new(),
        }
    }

    /// Multipliers held at `lambda0` for the whole run.
    pub fn frozen(num_agents: usize, eps: f64, rounds: usize, selfplay_steps: usize, lambda0: f64) -> Self {
        LagrangianState {
            lambdas: vec![lambda0; num_agents],
            mode: MultiplierMode::Frozen,
            ..LagrangianState::new(num_agents, eps, rounds, selfplay_steps)
        }
    }

    pub fn validate(&self, num_agents: usize) -> Result<()> {
        if self.lambdas.len() != num_agents {
            return Err(Error::shape("need one multiplier per non-ego agent"));
        }
        if !(self.eps.is_finite() && self.eps >= 0.0) {
            return Err(Error::param("eps must be finite and nonnegative"));
        }
        if !(self.alpha_lambda.is_finite() && self.alpha_lambda >= 0.0) {
            return Err(Error::param("alpha_lambda must be finite and nonnegative"));
        }
        if !(self.lambda_max.is_finite() && self.lambda_max > 0.0) {
            return Err(Error::param("lambda_max must be positive"));
        }
        if self.lambdas.iter().any(|l| !(l.is_finite() && *l >= 0.0 && *l <= self.lambda_max)) {
            return Err(Error::param("multipliers must lie in [0, lambda_max]"));
        }
        if self.rounds == 0 || self.selfplay_steps == 0 {
            return Err(Error::param("rounds and selfplay_steps must be positive"));
        }
        Ok(())
    }

    /// Dual ascent `λ_i ← clamp(λ_i + α (r̂_i − ε), 0, λ_max)`; a no-op in
    /// frozen mode.
    pub fn update(&mut self, estimates: &[f64]) {
        if self.mode == MultiplierMode::Frozen {
            return;
        }
        for (l, r) in self.lambdas.iter_mut().zip(estimates) {
            *l = (*l + self.alpha_lambda * (r - self.eps)).clamp(0.0, self.lambda_max);
        }
    }
}

/// `(λ u_i − u_0) / (1 + λ)`.
pub fn modified_utility(lambda: f64, u_i: f64, u_0: f64) -> f64 {
    (lambda * u_i - u_0) / (1.0 + lambda)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    Exact,
    MonteCarloProbe,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegretEstimator {
    pub kind: EstimatorKind,
    /// Training steps of the probe learner.
    pub probe_steps: usize,
    /// Opponent samples used to score the probe.
    pub probe_batches: usize,
}

impl Default for RegretEstimator {
    fn default() -> Self {
        RegretEstimator::EXACT
    }
}

impl RegretEstimator {
    pub const EXACT: RegretEstimator = RegretEstimator {
        kind: EstimatorKind::Exact,
        probe_steps: 0,
        probe_batches: 0,
    };

    pub fn probe(probe_steps: usize, probe_batches: usize) -> Self {
        RegretEstimator {
            kind: EstimatorKind::MonteCarloProbe,
            probe_steps,
            probe_batches,
        }
    }
}

/// Draws pure profiles from a mixture of products.
struct ProfileSampler<'a> {
    mixture: &'a PlayMixture,
    cumulative: Vec<f64>,
}

impl<'a> ProfileSampler<'a> {
    fn new(mixture: &'a PlayMixture) -> Self {
        let mut acc = 0.0;
        let cumulative = mixture
            .components
            .iter()
            .map(|(w, _)| {
                acc += w;
                acc
            })
            .collect();
        ProfileSampler { mixture, cumulative }
    }

    fn draw(&self, rng: &mut PortableRng, out: &mut [usize]) {
        let total = *self.cumulative.last().unwrap_or(&1.0);
        let r = rng::unit(rng) * total;
        let c = self.cumulative.partition_point(|&c| c <= r).min(self.cumulative.len() - 1);
        let strategy = &self.mixture.components[c].1;
        for (k, slot) in out.iter_mut().enumerate() {
            *slot = rng::categorical(rng, strategy.agent(k));
        }
    }
}

/// Trains a fresh Hedge learner for agent `k` (0-based) on sampled
/// opponents and returns the mean gain of its final strategy over the
/// agent's own sampled action, on common opponent draws.
fn probe_regret(stage: &StageGame, mixture: &PlayMixture, k: usize, estimator: &RegretEstimator, seed: u64) -> Result<f64> {
    if estimator.probe_steps == 0 || estimator.probe_batches == 0 {
        return Err(Error::param("probe needs positive probe_steps and probe_batches"));
    }
    let space = stage.space();
    let table = stage.table(k + 1);
    let m = space.counts()[k];
    let lo = table.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = table.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let range = if hi > lo { hi - lo } else { 1.0 };
    let sampler = ProfileSampler::new(mixture);
    let mut rng = rng::seeded(seed);
    let mut learner = LearnerState::hedge(m, hedge_rate(m, estimator.probe_steps))?;
    let mut joint = vec![0; space.num_agents()];
    let mut losses = vec![0.0; m];
    for step in 0..estimator.probe_steps {
        sampler.draw(&mut rng, &mut joint);
        let base = space.encode(&joint);
        for (a, l) in losses.iter_mut().enumerate() {
            *l = (hi - table[space.with_action(base, k, a)]) / range;
        }
        let p = learner.step(Feedback::Full(&losses))?;
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::ProbeDiverged {
                agent: k + 1,
                step,
                detail: alloc::format!("{:?}", p),
            });
        }
    }
    let p = learner.strategy();
    let mut gain = 0.0;
    for _ in 0..estimator.probe_batches {
        sampler.draw(&mut rng, &mut joint);
        let base = space.encode(&joint);
        let probe: f64 = (0..m).map(|a| p[a] * table[space.with_action(base, k, a)]).sum();
        gain += probe - table[base];
    }
    let est = gain / estimator.probe_batches as f64;
    if !est.is_finite() {
        return Err(Error::ProbeDiverged {
            agent: k + 1,
            step: estimator.probe_steps,
            detail: "non-finite estimate".into(),
        });
    }
    Ok(est)
}

/// Regret of non-ego `agent` (1-based, as in [`Game`]) under `mixture`.
pub fn estimate_regret_stage(
    estimator: &RegretEstimator,
    stage: &StageGame,
    mixture: &PlayMixture,
    agent: usize,
    seed: u64,
) -> Result<f64> {
    if agent == 0 || agent > stage.num_agents() {
        return Err(Error::InvalidAgent {
            agent,
            max: stage.num_agents(),
        });
    }
    match estimator.kind {
        EstimatorKind::Exact => Ok(stage.regret_unchecked(mixture).per_agent_regret[agent - 1]),
        EstimatorKind::MonteCarloProbe => probe_regret(stage, mixture, agent - 1, estimator, seed),
    }
}

pub fn estimate_regret<G: Game + ?Sized>(
    estimator: &RegretEstimator,
    game: &G,
    ego: &EgoStrategy,
    mixture: &PlayMixture,
    agent: usize,
    seed: u64,
) -> Result<f64> {
    let stage = StageGame::new(game, ego)?;
    mixture.validate(stage.counts())?;
    estimate_regret_stage(estimator, &stage, mixture, agent, seed)
}

/// The no-regret learners used for self-play.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Blackbox {
    pub kind: LearnerKind,
    /// `None` tunes Hedge-style rates to `selfplay_steps`.
    pub learning_rate: Option<f64>,
    pub entropy_bonus: f64,
    /// Keep learner state from one round to the next.
    pub warm_start: bool,
    /// Half-width of the seeded uniform perturbation of initial learner
    /// weights (log-weights, or cumulative regrets for regret matching).
    pub init_noise: f64,
}

impl Default for Blackbox {
    fn default() -> Self {
        Blackbox {
            kind: LearnerKind::Hedge,
            learning_rate: None,
            entropy_bonus: 0.0,
            warm_start: true,
            init_noise: 0.0,
        }
    }
}

impl Blackbox {
    pub fn learners(&self, counts: &[usize], horizon: usize, seed: u64) -> Result<Vec<LearnerState>> {
        let mut rng = rng::seeded(seed);
        counts
            .iter()
            .map(|&m| {
                let rate = match (self.learning_rate, self.kind) {
                    (Some(r), _) => r,
                    (None, LearnerKind::RegretMatching) => 1.0,
                    (None, _) => hedge_rate(m, horizon),
                };
                let mut l = LearnerState::new(self.kind, m, rate, self.entropy_bonus)?;
                if self.init_noise > 0.0 {
                    for w in l.weights.iter_mut() {
                        let u = rng::unit(&mut rng);
                        *w = match self.kind {
                            LearnerKind::RegretMatching => self.init_noise * u,
                            _ => self.init_noise * (2.0 * u - 1.0),
                        };
                    }
                }
                Ok(l)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    /// Multipliers used for this round's self-play.
    pub lambdas: Vec<f64>,
    /// Regret estimates of the previous round's play.
    pub regret_estimates: Vec<f64>,
    /// ū₀ of this round's self-play distribution.
    pub u0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PessimisticSample {
    /// Uniform average of the rounds' self-play distributions.
    pub mixture: PlayMixture,
    /// Mean ū₀ over rounds, equal to ū₀ of `mixture`.
    pub lower_bound: f64,
    pub trace: Vec<RoundRecord>,
    /// Whether the multipliers settled over the last tenth of the rounds.
    pub converged: bool,
}

/// Relative multiplier drift tolerated over the final window.
const STABILITY_TOL: f64 = 0.05;

fn multipliers_settled(trace: &[RoundRecord]) -> bool {
    let Some(last) = trace.last() else { return false };
    let window = (trace.len() / 10).max(1);
    let earlier = &trace[trace.len().saturating_sub(window + 1)];
    last.lambdas
        .iter()
        .zip(&earlier.lambdas)
        .all(|(a, b)| (a - b).abs() <= STABILITY_TOL * (1.0 + a.abs()))
}

pub fn sample_pessimistic_stage(
    stage: &StageGame,
    state: &mut LagrangianState,
    blackbox: &Blackbox,
    estimator: &RegretEstimator,
    seed: u64,
) -> Result<PessimisticSample> {
    let n = stage.num_agents();
    state.validate(n)?;
    let space = stage.space();
    let u0 = stage.table(0);
    let mut learners = blackbox.learners(stage.counts(), state.selfplay_steps, derive_seed(seed, u64::MAX))?;
    let mut current = PlayMixture::single(ProductStrategy::uniform(stage.counts()));
    let mut rounds = Vec::with_capacity(state.rounds);
    let mut trace = Vec::with_capacity(state.rounds);

    for round in 0..state.rounds {
        let round_seed = derive_seed(seed, round as u64);
        let estimates = (1..=n)
            .map(|i| estimate_regret_stage(estimator, stage, &current, i, derive_seed(round_seed, i as u64)))
            .collect::<Result<Vec<f64>>>()?;
        state.update(&estimates);

        let costs: Vec<Vec<f64>> = (0..n)
            .map(|k| {
                let lambda = state.lambdas[k];
                stage
                    .table(k + 1)
                    .iter()
                    .zip(u0)
                    .map(|(ui, u0)| -modified_utility(lambda, *ui, *u0))
                    .collect()
            })
            .collect();
        let mut game = CostGame::new(space.clone(), costs)?;
        game.rescale_unit();
        if !blackbox.warm_start {
            learners = blackbox.learners(stage.counts(), state.selfplay_steps, derive_seed(round_seed, u64::MAX))?;
        }
        let res = run_dynamics(
            &game,
            state.selfplay_steps,
            &mut learners,
            FeedbackMode::FullInformation,
            derive_seed(round_seed, 0),
        )?;
        current = res.empirical_mixture;
        let value = mixture_expectation(space, u0, &current);
        state.bound_trace.push(value);
        trace.push(RoundRecord {
            round,
            lambdas: state.lambdas.clone(),
            regret_estimates: estimates,
            u0: value,
        });
        rounds.push(current.clone());
    }

    let w = 1.0 / rounds.len() as f64;
    let parts: Vec<(f64, &PlayMixture)> = rounds.iter().map(|m| (w, m)).collect();
    let mixture = PlayMixture::combine(&parts);
    let recent = &state.bound_trace[state.bound_trace.len() - rounds.len()..];
    let lower_bound = recent.iter().sum::<f64>() / recent.len() as f64;
    let converged = state.mode == MultiplierMode::Frozen || multipliers_settled(&trace);
    Ok(PessimisticSample {
        mixture,
        lower_bound,
        trace,
        converged,
    })
}

pub fn sample_pessimistic<G: Game + ?Sized>(
    game: &G,
    ego: &EgoStrategy,
    state: &mut LagrangianState,
    blackbox: &Blackbox,
    estimator: &RegretEstimator,
    seed: u64,
) -> Result<PessimisticSample> {
    let stage = StageGame::new(game, ego)?;
    sample_pessimistic_stage(&stage, state, blackbox, estimator, seed)
}
