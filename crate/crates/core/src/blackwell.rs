//! Approachability-based sampler for approximately ν-maximizing ε-CCE.
//!
//! For a target value `y` the sampler drives the running mean of
//!
//! ```text
//! v(x) = [ ū_i(a_i, x_{-i}) − ū_i(x)  for every agent i and action a_i ;  y − ν̄(x) ]
//! ```
//!
//! into the orthant shifted by the per-agent slacks. Each step projects the
//! running mean, takes the normalized excess `β`, and asks a halfspace
//! oracle for a mixture with `β·(v(x) − shift) ≤ tol`. The oracle is
//! simultaneous no-regret play on the costs
//! `c_i = −β_{m+1} ν / n − ‖β_i‖₁ u_i` (the benchmark term of the full cost
//! does not depend on the agent's own action and is dropped). A failed
//! oracle check marks `y` as too large; an outer binary search over `y`
//! keeps the best certified mixture.
//!
//! `β` is normalized in L2; the halfspace test `β·w ≤ 0` is invariant to
//! the choice of norm.
//!
//! Besides the uniform running average, every oracle output is kept in a
//! pool shared across targets. After each iteration a small LP looks for a
//! convex combination of pooled outputs that already meets the slacks
//! (within half of `eps_tol`) with ν̄ ≥ `y`. Since `v` is linear in the
//! mixture weights, such a combination certifies `y` just as the uniform
//! average would, usually after far fewer iterations.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dynamics::{run_dynamics, CostGame, FeedbackMode};
use crate::error::{Error, Result};
use crate::game::{Game, Objective, StageGame};
use crate::learner::{hedge_rate, LearnerKind, LearnerState};
use crate::math;
use crate::normalize::normalize_payoffs;
use crate::regret::{check_slack, mixture_deviation, mixture_expectation};
use crate::rng::derive_seed;
use crate::simplex::{self, Constraint, LinearProgram, Relation, Sense};
use crate::strategy::{EgoStrategy, PlayMixture, ProductStrategy};

/// `v(x)` for a conditioned game: `Σ m_i` deviation entries then `y − ν̄(x)`.
pub fn v_vector_stage(stage: &StageGame, nu: &[f64], mixture: &PlayMixture, y: f64) -> Vec<f64> {
    let space = stage.space();
    let mut v = Vec::with_capacity(space.total_actions() + 1);
    for k in 0..stage.num_agents() {
        let table = stage.table(k + 1);
        let value = mixture_expectation(space, table, mixture);
        v.extend(mixture_deviation(space, table, mixture, k).into_iter().map(|d| d - value));
    }
    v.push(y - mixture_expectation(space, nu, mixture));
    v
}

pub fn v_vector<G: Game + ?Sized>(
    game: &G,
    ego: &EgoStrategy,
    joint: &PlayMixture,
    nu: &Objective,
    y: f64,
) -> Result<Vec<f64>> {
    let stage = StageGame::new(game, ego)?;
    joint.validate(stage.counts())?;
    let nu = stage.objective_table(nu)?;
    Ok(v_vector_stage(&stage, &nu, joint, y))
}

/// Per-agent maxima of the deviation blocks followed by `sigma`.
pub fn streamlined_v(stage: &StageGame, mixture: &PlayMixture, sigma: f64) -> Vec<f64> {
    let mut v = stage.regret_unchecked(mixture).per_agent_regret;
    v.push(sigma);
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    /// Nearest point of the nonpositive orthant.
    pub nearest: Vec<f64>,
    /// Unit-L2 direction `(v − a) / ‖v − a‖`; `None` when `v` is inside.
    pub beta: Option<Vec<f64>>,
    pub dist: f64,
}

pub fn project_negative_orthant(v: &[f64]) -> Result<Projection> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("v vector"));
    }
    let nearest: Vec<f64> = v.iter().map(|&x| x.min(0.0)).collect();
    let excess: Vec<f64> = v.iter().map(|&x| x.max(0.0)).collect();
    let dist = math::sqrt(excess.iter().map(|e| e * e).sum());
    let beta = (dist > 0.0).then(|| excess.iter().map(|e| e / dist).collect());
    Ok(Projection { nearest, beta, dist })
}

fn shifted_projection(v: &[f64], shift: &[f64]) -> Projection {
    let w: Vec<f64> = v.iter().zip(shift).map(|(a, b)| a - b).collect();
    project_negative_orthant(&w).expect("finite v")
}

/// Fraction of `eps_tol` a certified combination of iterates may exceed
/// the slacks by.
const CERTIFY_SLACK: f64 = 0.5;

/// Oracle runs are lengthened until `β·v` falls below this fraction of
/// `eps_tol`; only a miss of the full `eps_tol` counts as failure.
const ORACLE_TARGET: f64 = 0.5;

const FIRST_PROBE_FACTOR: usize = 10;

/// Slack value standing in for an unconstrained agent.
const UNCONSTRAINED: f64 = 1e300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    /// Dynamics length; runs start at `min(initial_steps, steps)` and
    /// quadruple until the check passes or `steps` is reached.
    pub steps: usize,
    pub initial_steps: usize,
    pub learner: LearnerKind,
    /// Fixed learning rate; `None` uses the horizon-tuned Hedge rate
    /// (and 0.5 for optimistic Hedge).
    pub learning_rate: Option<f64>,
}

/// Runs the no-regret halfspace oracle for direction `beta` (length
/// `Σ m_i + 1`, nonnegative). Returns the empirical mixture of the last
/// run; `accept` is consulted after each run to stop early.
pub fn halfspace_oracle_with(
    stage: &StageGame,
    nu: &[f64],
    beta: &[f64],
    config: &OracleConfig,
    seed: u64,
    mut accept: impl FnMut(&PlayMixture) -> bool,
) -> Result<PlayMixture> {
    let space = stage.space();
    let n = stage.num_agents();
    if beta.len() != space.total_actions() + 1 {
        return Err(Error::shape("beta must have Σ m_i + 1 entries"));
    }
    if beta.iter().any(|b| !(b.is_finite() && *b >= 0.0)) {
        return Err(Error::param("beta must be finite and nonnegative"));
    }
    let nu_weight = beta[beta.len() - 1] / n as f64;
    let mut offset = 0;
    let mut costs = Vec::with_capacity(n);
    for k in 0..n {
        let m = space.counts()[k];
        let block: f64 = beta[offset..offset + m].iter().sum();
        offset += m;
        let table = stage.table(k + 1);
        costs.push(
            nu.iter()
                .zip(table)
                .map(|(v, u)| -nu_weight * v - block * u)
                .collect::<Vec<f64>>(),
        );
    }
    let mut cost_game = CostGame::new(space.clone(), costs)?;
    cost_game.rescale_unit();
    let max_steps = config.steps.max(1);
    let mut steps = config.initial_steps.clamp(1, max_steps);
    let mut attempt = 0u64;
    loop {
        let mut learners: Vec<LearnerState> = space
            .counts()
            .iter()
            .map(|&m| {
                let rate = match (config.learner, config.learning_rate) {
                    (LearnerKind::RegretMatching, _) => 1.0,
                    (_, Some(r)) => r,
                    (LearnerKind::OptimisticHedge, None) => 0.5,
                    _ => hedge_rate(m, steps),
                };
                LearnerState::new(config.learner, m, rate, 0.0)
            })
            .collect::<Result<_>>()?;
        let res = run_dynamics(
            &cost_game,
            steps,
            &mut learners,
            FeedbackMode::FullInformation,
            derive_seed(seed, attempt),
        )?;
        if steps >= max_steps || accept(&res.empirical_mixture) {
            return Ok(res.empirical_mixture);
        }
        steps = (steps * 4).min(max_steps);
        attempt += 1;
    }
}

/// Halfspace oracle with the fixed budget `steps`.
pub fn halfspace_oracle<G: Game + ?Sized>(
    game: &G,
    ego: &EgoStrategy,
    beta: &[f64],
    nu: &Objective,
    steps: usize,
    seed: u64,
) -> Result<PlayMixture> {
    let stage = StageGame::new(game, ego)?;
    let nu = stage.objective_table(nu)?;
    let config = OracleConfig {
        steps,
        initial_steps: steps,
        learner: LearnerKind::Hedge,
        learning_rate: None,
    };
    halfspace_oracle_with(&stage, &nu, beta, &config, seed, |_| true)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlackwellConfig {
    /// Approximation tolerance, in normalized payoff units.
    pub eps_tol: f64,
    /// Approachability iterations per target value.
    pub max_outer: usize,
    /// Oracle dynamics budget; `None` means `⌈100 / eps_tol²⌉` capped at 10⁶.
    pub max_inner: Option<usize>,
    /// First oracle run length before escalating.
    pub initial_inner: usize,
    /// Bits of binary search over the normalized range `[-1, 1]`.
    pub resolution_bits: u32,
    /// `false` fixes the last component of `v` to `sigma` instead of
    /// searching over `y`.
    pub binary_search: bool,
    pub sigma: f64,
    /// Learner used inside the halfspace oracle.
    pub learner: LearnerKind,
    pub learning_rate: Option<f64>,
    pub seed: u64,
}

impl Default for BlackwellConfig {
    fn default() -> Self {
        BlackwellConfig {
            eps_tol: 0.01,
            max_outer: 20,
            max_inner: None,
            initial_inner: 512,
            resolution_bits: 30,
            binary_search: true,
            sigma: -1e-3,
            learner: LearnerKind::OptimisticHedge,
            learning_rate: None,
            seed: 0,
        }
    }
}

impl BlackwellConfig {
    pub fn inner_budget(&self) -> usize {
        self.max_inner.unwrap_or_else(|| {
            let t = math::ceil(100.0 / (self.eps_tol * self.eps_tol));
            if t >= 1e6 {
                1_000_000
            } else {
                t as usize
            }
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps_tol > 0.0 && self.eps_tol.is_finite()) {
            return Err(Error::param("eps_tol must be positive"));
        }
        if self.max_outer == 0 {
            return Err(Error::param("max_outer must be at least 1"));
        }
        Ok(())
    }
}

/// Running state of one approachability run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproachabilityState {
    pub avg_v: Vec<f64>,
    pub iterate_mixtures: Vec<PlayMixture>,
    pub y: f64,
    pub beta: Vec<f64>,
    pub eps_tol: f64,
    /// Slack shift applied to each deviation entry (last entry 0).
    pub shift: Vec<f64>,
}

impl ApproachabilityState {
    fn new(y: f64, eps_tol: f64, shift: Vec<f64>) -> Self {
        ApproachabilityState {
            avg_v: vec![0.0; shift.len()],
            iterate_mixtures: Vec::new(),
            y,
            beta: vec![0.0; shift.len()],
            eps_tol,
            shift,
        }
    }

    fn push(&mut self, mixture: PlayMixture, v: &[f64]) {
        self.iterate_mixtures.push(mixture);
        let t = self.iterate_mixtures.len() as f64;
        for (a, x) in self.avg_v.iter_mut().zip(v) {
            *a += (x - *a) / t;
        }
    }

    /// Distance of the running mean from the shifted orthant.
    pub fn distance(&self) -> f64 {
        shifted_projection(&self.avg_v, &self.shift).dist
    }

    fn inside(&self, v: &[f64]) -> bool {
        let slack = CERTIFY_SLACK * self.eps_tol;
        v.iter().zip(&self.shift).all(|(a, s)| *a <= s + slack)
    }

    pub fn average_mixture(&self) -> PlayMixture {
        let w = 1.0 / self.iterate_mixtures.len() as f64;
        let parts: Vec<(f64, &PlayMixture)> = self.iterate_mixtures.iter().map(|m| (w, m)).collect();
        PlayMixture::combine(&parts)
    }
}

/// One point of an approachability trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApproachStep {
    pub y: f64,
    /// Number of oracle-successful iterations so far.
    pub t: usize,
    pub dist: f64,
}

/// A stored oracle output with its deviation entries and objective value.
struct Column {
    mixture: PlayMixture,
    dev: Vec<f64>,
    nu: f64,
}

struct Certified {
    mixture: PlayMixture,
    value: f64,
}

struct ApproachOutcome {
    certified: Option<Certified>,
    /// Uniform average of the iterates when nothing was certified.
    fallback: Option<PlayMixture>,
    oracle_calls: usize,
}

struct Sampler<'a> {
    stage: &'a StageGame,
    nu: &'a [f64],
    shift: Vec<f64>,
    config: &'a BlackwellConfig,
    oracle: OracleConfig,
    trace: Vec<ApproachStep>,
    pool: Vec<Column>,
    calls: u64,
}

impl Sampler<'_> {
    fn next_seed(&mut self) -> u64 {
        self.calls += 1;
        derive_seed(self.config.seed, self.calls)
    }

    fn column(&self, mixture: PlayMixture) -> Column {
        let mut v = v_vector_stage(self.stage, self.nu, &mixture, 0.0);
        let nu = -v.pop().unwrap_or(0.0);
        Column { mixture, dev: v, nu }
    }

    fn v_of(col: &Column, y: f64) -> Vec<f64> {
        let mut v = col.dev.clone();
        v.push(y - col.nu);
        v
    }

    /// Best convex combination of stored columns: maximizes ν̄ subject to
    /// every deviation entry staying within its slack (plus half the
    /// tolerance) and ν̄ ≥ `y`.
    fn corrective(&self, y: Option<f64>) -> Result<Option<Certified>> {
        if self.pool.is_empty() {
            return Ok(None);
        }
        let p = self.pool.len();
        let m = self.shift.len() - 1;
        let slack = CERTIFY_SLACK * self.config.eps_tol;
        let mut constraints = Vec::with_capacity(m + 2);
        for j in 0..m {
            if self.shift[j] >= UNCONSTRAINED {
                continue;
            }
            constraints.push(Constraint {
                coeffs: self.pool.iter().map(|c| c.dev[j]).collect(),
                relation: Relation::Le,
                rhs: self.shift[j] + slack,
            });
        }
        if let Some(y) = y {
            constraints.push(Constraint {
                coeffs: self.pool.iter().map(|c| c.nu).collect(),
                relation: Relation::Ge,
                rhs: y,
            });
        }
        constraints.push(Constraint {
            coeffs: vec![1.0; p],
            relation: Relation::Eq,
            rhs: 1.0,
        });
        let lp = LinearProgram {
            objective: self.pool.iter().map(|c| c.nu).collect(),
            sense: Sense::Maximize,
            constraints,
        };
        let sol = match simplex::solve(&lp) {
            Ok(s) => s,
            Err(Error::Infeasible) => return Ok(None),
            Err(e) => return Err(e),
        };
        let total: f64 = sol.x.iter().sum();
        let parts: Vec<(f64, &PlayMixture)> = sol
            .x
            .iter()
            .zip(&self.pool)
            .filter(|(w, _)| **w > 1e-12)
            .map(|(w, c)| (w / total, &c.mixture))
            .collect();
        let mixture = PlayMixture::combine(&parts);
        let value = mixture_expectation(self.stage.space(), self.nu, &mixture);
        Ok(Some(Certified { mixture, value }))
    }

    fn score(beta: &[f64], v: &[f64], shift: &[f64]) -> f64 {
        beta.iter()
            .zip(v)
            .zip(shift)
            .map(|((b, a), s)| if *b > 0.0 { b * (a - s) } else { 0.0 })
            .sum()
    }

    /// Approachability for a fixed target `y`.
    fn approach(&mut self, y: f64, max_outer: usize) -> Result<ApproachOutcome> {
        let tol = self.config.eps_tol;
        if let Some(c) = self.corrective(Some(y))? {
            return Ok(ApproachOutcome {
                certified: Some(c),
                fallback: None,
                oracle_calls: 0,
            });
        }
        let mut state = ApproachabilityState::new(y, tol, self.shift.clone());
        let init = self.column(PlayMixture::single(ProductStrategy::uniform(self.stage.counts())));
        let mut base = Self::v_of(&init, y);
        self.pool.push(init);
        let mut calls = 0;
        let outcome = |state: &ApproachabilityState, certified, calls| ApproachOutcome {
            certified,
            fallback: (!state.iterate_mixtures.is_empty()).then(|| state.average_mixture()),
            oracle_calls: calls,
        };
        for _ in 0..max_outer {
            let proj = shifted_projection(&base, &self.shift);
            let Some(beta) = proj.beta else { break };
            state.beta = beta.clone();
            let seed = self.next_seed();
            let (stage, nu, shift) = (self.stage, self.nu, &self.shift);
            let x = halfspace_oracle_with(stage, nu, &beta, &self.oracle, seed, |x| {
                Self::score(&beta, &v_vector_stage(stage, nu, x, y), shift) < ORACLE_TARGET * tol
            })?;
            calls += 1;
            let col = self.column(x);
            let v = Self::v_of(&col, y);
            if Self::score(&beta, &v, shift) >= tol {
                return Ok(outcome(&state, None, calls));
            }
            state.push(col.mixture.clone(), &v);
            self.pool.push(col);
            self.trace.push(ApproachStep {
                y,
                t: state.iterate_mixtures.len(),
                dist: state.distance(),
            });
            if state.inside(&state.avg_v) {
                let mixture = state.average_mixture();
                let value = mixture_expectation(stage.space(), nu, &mixture);
                return Ok(outcome(&state, Some(Certified { mixture, value }), calls));
            }
            if let Some(c) = self.corrective(Some(y))? {
                return Ok(outcome(&state, Some(c), calls));
            }
            base = state.avg_v.clone();
        }
        Ok(outcome(&state, None, calls))
    }

    /// Fixed-σ variant: `β_{m+1}` is the indicator that every regret entry
    /// is within its slack.
    fn no_search(&mut self) -> Result<(ApproachabilityState, usize)> {
        let tol = self.config.eps_tol;
        let m = self.shift.len() - 1;
        let sigma = self.config.sigma;
        let mut state = ApproachabilityState::new(sigma, tol, self.shift.clone());
        let init = self.column(PlayMixture::single(ProductStrategy::uniform(self.stage.counts())));
        let mut base = Self::v_of(&init, 0.0);
        self.pool.push(init);
        let mut calls = 0;
        for _ in 0..self.config.max_outer {
            let mut beta: Vec<f64> = base[..m]
                .iter()
                .zip(&self.shift)
                .map(|(v, s)| (v - s).max(0.0))
                .collect();
            let norm = math::sqrt(beta.iter().map(|b| b * b).sum());
            if norm <= tol {
                beta.iter_mut().for_each(|b| *b = 0.0);
                beta.push(1.0);
            } else {
                beta.iter_mut().for_each(|b| *b /= norm);
                beta.push(0.0);
            }
            state.beta = beta.clone();
            let seed = self.next_seed();
            let x = halfspace_oracle_with(self.stage, self.nu, &beta, &self.oracle, seed, |_| true)?;
            calls += 1;
            let col = self.column(x);
            let mut v = Self::v_of(&col, 0.0);
            *v.last_mut().unwrap() = sigma;
            state.push(col.mixture.clone(), &v);
            self.pool.push(col);
            self.trace.push(ApproachStep {
                y: sigma,
                t: state.iterate_mixtures.len(),
                dist: state.distance(),
            });
            base = state.avg_v.clone();
        }
        Ok((state, calls))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstCaseResult {
    pub mixture: PlayMixture,
    /// ν̄ of `mixture`, in the units of the input objective.
    pub value: f64,
    /// Largest target certified feasible, in objective units.
    pub y_best: f64,
    pub converged: bool,
    /// Total halfspace-oracle calls.
    pub iterations: usize,
    pub trace: Vec<ApproachStep>,
}

/// Searches for an ε-CCE approximately maximizing ν̄ on a game whose
/// payoffs and objective already lie in `[-1, 1]`. `eps` is per-agent
/// slack in the same units.
pub fn worst_case_cce_stage(
    stage: &StageGame,
    nu: &[f64],
    eps: &[f64],
    config: &BlackwellConfig,
) -> Result<WorstCaseResult> {
    config.validate()?;
    check_slack(eps, stage.num_agents())?;
    if nu.len() != stage.space().size() {
        return Err(Error::shape("objective table must cover every joint profile"));
    }
    let mut shift = Vec::with_capacity(stage.space().total_actions() + 1);
    for (k, &m) in stage.counts().iter().enumerate() {
        // an infinite slack leaves the block unconstrained
        let s = if eps[k].is_finite() { eps[k] } else { UNCONSTRAINED };
        shift.extend(core::iter::repeat_n(s, m));
    }
    shift.push(0.0);
    let inner = config.inner_budget();
    let mut sampler = Sampler {
        stage,
        nu,
        shift,
        config,
        oracle: OracleConfig {
            steps: inner,
            initial_steps: config.initial_inner.min(inner),
            learner: config.learner,
            learning_rate: config.learning_rate,
        },
        trace: Vec::new(),
        pool: Vec::new(),
        calls: 0,
    };

    if !config.binary_search {
        let (state, calls) = sampler.no_search()?;
        let mixture = match sampler.corrective(None)? {
            Some(c) => c.mixture,
            None => state.average_mixture(),
        };
        let value = mixture_expectation(stage.space(), nu, &mixture);
        let converged = within_slack(stage, &mixture, eps, config.eps_tol);
        return Ok(WorstCaseResult {
            mixture,
            value,
            y_best: value,
            converged,
            iterations: calls,
            trace: sampler.trace,
        });
    }

    let lo_nu = nu.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi_nu = nu.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut calls = 0;
    let mut best: Option<Certified> = None;
    let mut fallback: Option<PlayMixture> = None;
    let mut lo = lo_nu;
    let mut hi = hi_nu;
    let mut probe = |sampler: &mut Sampler, y: f64, budget: usize, best: &mut Option<Certified>| -> Result<Option<f64>> {
        let out = sampler.approach(y, budget)?;
        calls += out.oracle_calls;
        match out.certified {
            Some(c) => {
                let v = c.value;
                if best.as_ref().is_none_or(|b| v > b.value) {
                    *best = Some(c);
                }
                Ok(Some(v))
            }
            None => {
                if fallback.is_none() {
                    fallback = out.fallback;
                }
                Ok(None)
            }
        }
    };
    // the bottom of the range is always feasible, so it gets a longer run
    let first_budget = config.max_outer.saturating_mul(FIRST_PROBE_FACTOR);
    if probe(&mut sampler, lo, first_budget, &mut best)?.is_some() {
        for _ in 0..config.resolution_bits {
            lo = lo.max(best.as_ref().map_or(lo, |b| b.value));
            if hi - lo <= 0.5 * config.eps_tol {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if probe(&mut sampler, mid, config.max_outer, &mut best)?.is_none() {
                hi = mid;
            }
        }
    }

    let converged = best.is_some();
    let (y_best, mixture) = match best {
        Some(c) => (c.value.max(lo).min(hi_nu), c.mixture),
        None => (
            lo_nu,
            fallback.unwrap_or_else(|| PlayMixture::single(ProductStrategy::uniform(stage.counts()))),
        ),
    };
    let value = mixture_expectation(stage.space(), nu, &mixture);
    Ok(WorstCaseResult {
        mixture,
        value,
        y_best,
        converged,
        iterations: calls,
        trace: sampler.trace,
    })
}

fn within_slack(stage: &StageGame, mixture: &PlayMixture, eps: &[f64], tol: f64) -> bool {
    stage
        .regret_unchecked(mixture)
        .per_agent_regret
        .iter()
        .zip(eps)
        .all(|(r, e)| *r <= e + tol)
}

/// Normalizes the game and objective into `[-1, 1]`, runs the sampler, and
/// reports the value in the objective's original units. `eps` is given in
/// original payoff units; `config.eps_tol` is in normalized units.
pub fn worst_case_cce<G: Game + ?Sized>(
    game: &G,
    ego: &EgoStrategy,
    nu: &Objective,
    eps: &[f64],
    config: &BlackwellConfig,
) -> Result<WorstCaseResult> {
    check_slack(eps, game.num_agents())?;
    let normalized = normalize_payoffs(game)?;
    let stage = StageGame::new(&normalized.game, ego)?;
    let raw_nu = StageGame::new(game, ego)?.objective_table(nu)?;
    let lo = raw_nu.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = raw_nu.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (offset, scale) = if hi > lo { (0.5 * (lo + hi), 0.5 * (hi - lo)) } else { (lo, 1.0) };
    let nu_n: Vec<f64> = raw_nu.iter().map(|v| if hi > lo { (v - offset) / scale } else { 0.0 }).collect();
    let eps_n: Vec<f64> = eps.iter().map(|e| normalized.map.diff_to_normalized(*e)).collect();
    let mut res = worst_case_cce_stage(&stage, &nu_n, &eps_n, config)?;
    res.value = mixture_expectation(stage.space(), &raw_nu, &res.mixture);
    res.y_best = res.y_best * scale + offset;
    for step in res.trace.iter_mut() {
        step.y = step.y * scale + offset;
    }
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::DenseGame;

    #[test]
    fn projection_examples() {
        let p = project_negative_orthant(&[0.5, -0.2]).unwrap();
        assert_eq!(p.nearest, vec![0.0, -0.2]);
        assert_eq!(p.beta.unwrap(), vec![1.0, 0.0]);
        assert_eq!(p.dist, 0.5);
        let inside = project_negative_orthant(&[-1.0, -2.0]).unwrap();
        assert_eq!(inside.dist, 0.0);
        assert!(inside.beta.is_none());
        let p = project_negative_orthant(&[3.0, 4.0]).unwrap();
        let b = p.beta.unwrap();
        assert!((b[0] - 0.6).abs() < 1e-12 && (b[1] - 0.8).abs() < 1e-12);
        assert_eq!(p.dist, 5.0);
    }

    fn pd() -> DenseGame {
        let u1 = [[3.0, 0.0], [4.0, 1.0]];
        DenseGame::from_fn(1, vec![2, 2], None, |i, _, j| match i {
            0 => u1[j[0]][j[1]],
            1 => u1[j[0]][j[1]],
            _ => u1[j[1]][j[0]],
        })
        .unwrap()
    }

    #[test]
    fn pd_v_vector_at_defect() {
        let g = pd();
        let ego = EgoStrategy::uniform(1);
        let dd = PlayMixture::single(ProductStrategy::pure(&[1, 1], &[2, 2]));
        let v = v_vector(&g, &ego, &dd, &Objective::Utility(1), 1.0).unwrap();
        assert_eq!(v, vec![-1.0, 0.0, -1.0, 0.0, 0.0]);
    }

    #[test]
    fn streamlined_is_block_max() {
        let g = pd();
        let stage = StageGame::new(&g, &EgoStrategy::uniform(1)).unwrap();
        let x = PlayMixture::single(ProductStrategy::new(vec![vec![0.3, 0.7], vec![0.9, 0.1]]));
        let full = v_vector_stage(&stage, stage.table(1), &x, 0.0);
        let short = streamlined_v(&stage, &x, -1e-3);
        assert_eq!(short[0], full[0].max(full[1]));
        assert_eq!(short[1], full[2].max(full[3]));
        assert_eq!(short[2], -1e-3);
    }

    #[test]
    fn pure_nu_direction_maximizes_nu() {
        // with β = e_{m+1} every agent just maximizes ν
        let g = pd();
        let ego = EgoStrategy::uniform(1);
        let mut beta = vec![0.0; 5];
        beta[4] = 1.0;
        let nu = Objective::Table(vec![0.0, 0.0, 1.0, 0.0]);
        let x = halfspace_oracle(&g, &ego, &beta, &nu, 4000, 1).unwrap();
        let stage = StageGame::new(&g, &ego).unwrap();
        let nu_t = stage.objective_table(&nu).unwrap();
        assert!(mixture_expectation(stage.space(), &nu_t, &x) > 0.95);
    }

    #[test]
    fn default_inner_budget() {
        let c = BlackwellConfig {
            eps_tol: 0.1,
            ..Default::default()
        };
        assert_eq!(c.inner_budget(), 10_000);
        let c = BlackwellConfig {
            eps_tol: 1e-4,
            ..Default::default()
        };
        assert_eq!(c.inner_budget(), 1_000_000);
    }
}
