//! Command-line interface.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use robustcce_core::blackwell::{worst_case_cce, BlackwellConfig};
use robustcce_core::lagrangian::{sample_pessimistic, Blackbox, MultiplierMode, RegretEstimator};
use robustcce_core::learner::LearnerKind;
use robustcce_core::regret::{expected_utility, regret};
use robustcce_core::robust::{train_robust, EgoBandit, InnerSampler, LagrangianParams, RobustTrainerConfig};
use robustcce_core::{EgoStrategy, Game, Objective};
use serde_json::json;

use crate::config::{load_config, ExperimentKind};
use crate::experiments::run_experiment;
use crate::gamefile::{game_json, load_game, GameSource};
use crate::output::write_atomic;
use crate::verify::{load_verify_config, run_verify, VerifyAlgo, VerifyConfig};

#[derive(Parser, Debug)]
#[command(name = "robustcce", version, about = "Worst-case equilibria and robust ego training for matrix games")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write a generated game as JSON.
    MakeGame(MakeGameArgs),
    /// Approximate worst-case ε-CCE with the approachability sampler.
    WorstCce(WorstCceArgs),
    /// Lagrangian pessimistic-equilibrium sampling.
    SamplePessimistic(SamplePessimisticArgs),
    /// Bandit training of the ego against an inner pessimistic sampler.
    TrainRobust(TrainRobustArgs),
    /// Run a cross-eval experiment config and write the result matrix.
    CrossEval(ConfigArgs),
    /// Compare samplers with the exact LP and check invariants.
    Verify(VerifyArgs),
    /// Run any experiment config.
    Run(ConfigArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum GameKind {
    Nmatrix,
    Grid,
    Random,
    PrisonersDilemma,
    MatchingPennies,
    Coordination,
    Samuelson,
}

#[derive(clap::Args, Debug)]
pub struct MakeGameArgs {
    #[arg(long, value_enum)]
    pub kind: GameKind,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Agents including the ego (nmatrix).
    #[arg(long, default_value_t = 4)]
    pub agents: usize,
    /// Actions per agent (nmatrix).
    #[arg(long, default_value_t = 7)]
    pub actions: usize,
    /// Non-ego action counts (random), e.g. `2,2,2`.
    #[arg(long, value_delimiter = ',', default_value = "2,2")]
    pub shape: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    pub ego_actions: usize,
    /// Output file; stdout if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(clap::Args, Debug)]
pub struct WorstCceArgs {
    #[arg(long)]
    pub game: PathBuf,
    /// `agentK` targets agent K's utility (worst case unless --maximize);
    /// anything else is read as a JSON table over (a0, joint) to maximize.
    #[arg(long, default_value = "agent0")]
    pub nu: String,
    #[arg(long)]
    pub maximize: bool,
    #[arg(long, default_value_t = 0.0)]
    pub eps: f64,
    /// Tolerance in normalized payoff units.
    #[arg(long, default_value_t = 0.01)]
    pub tol: f64,
    #[arg(long)]
    pub no_binary_search: bool,
    #[arg(long, default_value_t = -1e-3)]
    pub sigma: f64,
    #[arg(long, default_value_t = 20)]
    pub max_outer: usize,
    #[arg(long)]
    pub max_inner: Option<usize>,
    #[arg(long, default_value_t = 512)]
    pub initial_inner: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 64)]
    pub max_components: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum EstimatorArg {
    Exact,
    Probe,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum LearnerArg {
    Hedge,
    RegretMatching,
    OptimisticHedge,
}

impl From<LearnerArg> for LearnerKind {
    fn from(l: LearnerArg) -> Self {
        match l {
            LearnerArg::Hedge => LearnerKind::Hedge,
            LearnerArg::RegretMatching => LearnerKind::RegretMatching,
            LearnerArg::OptimisticHedge => LearnerKind::OptimisticHedge,
        }
    }
}

#[derive(clap::Args, Debug, Clone)]
pub struct LagrangianArgs {
    #[arg(long, default_value_t = 300)]
    pub rounds: usize,
    #[arg(long, default_value_t = 200)]
    pub selfplay_steps: usize,
    #[arg(long, value_enum, default_value_t = EstimatorArg::Exact)]
    pub estimator: EstimatorArg,
    #[arg(long, default_value_t = 2000)]
    pub probe_steps: usize,
    #[arg(long, default_value_t = 64)]
    pub probe_batches: usize,
    /// Initial multiplier.
    #[arg(long, default_value_t = 8.0)]
    pub lambda0: f64,
    /// Hold multipliers fixed (at the given value, else at --lambda0).
    #[arg(long, num_args = 0..=1)]
    pub frozen_lambda: Option<Option<f64>>,
    #[arg(long, default_value_t = 0.01)]
    pub alpha_lambda: f64,
    #[arg(long, default_value_t = 1e4)]
    pub lambda_max: f64,
    #[arg(long, value_enum, default_value_t = LearnerArg::Hedge)]
    pub learner: LearnerArg,
    #[arg(long, default_value_t = 0.0)]
    pub init_noise: f64,
    /// Reset learners every round.
    #[arg(long)]
    pub cold_start: bool,
}

impl LagrangianArgs {
    pub fn params(&self) -> LagrangianParams {
        let (mode, lambda0) = match self.frozen_lambda {
            Some(v) => (MultiplierMode::Frozen, v.unwrap_or(self.lambda0)),
            None => (MultiplierMode::Dynamic, self.lambda0),
        };
        LagrangianParams {
            lambda0,
            alpha_lambda: self.alpha_lambda,
            lambda_max: self.lambda_max,
            rounds: self.rounds,
            selfplay_steps: self.selfplay_steps,
            mode,
            blackbox: Blackbox {
                kind: self.learner.into(),
                warm_start: !self.cold_start,
                init_noise: self.init_noise,
                ..Blackbox::default()
            },
            estimator: match self.estimator {
                EstimatorArg::Exact => RegretEstimator::EXACT,
                EstimatorArg::Probe => RegretEstimator::probe(self.probe_steps, self.probe_batches),
            },
        }
    }
}

#[derive(clap::Args, Debug)]
pub struct SamplePessimisticArgs {
    #[arg(long)]
    pub game: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    #[command(flatten)]
    pub lagrangian: LagrangianArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 64)]
    pub max_components: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum InnerArg {
    Blackwell,
    Lagrangian,
    Lp,
}

#[derive(clap::Args, Debug)]
pub struct TrainRobustArgs {
    #[arg(long)]
    pub game: PathBuf,
    #[arg(long, value_enum, default_value_t = InnerArg::Lp)]
    pub inner: InnerArg,
    #[arg(long, default_value_t = 0.0)]
    pub eps: f64,
    #[arg(long, default_value_t = 1000)]
    pub outer_steps: usize,
    #[arg(long, default_value_t = 0.05)]
    pub entropy_floor: f64,
    #[arg(long)]
    pub bandit_rate: Option<f64>,
    /// Blackwell tolerance in normalized payoff units.
    #[arg(long, default_value_t = 0.01)]
    pub tol: f64,
    #[command(flatten)]
    pub lagrangian: LagrangianArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(clap::Args, Debug)]
pub struct ConfigArgs {
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(clap::Args, Debug)]
pub struct VerifyArgs {
    /// TOML with [game], optional [algo] and [run] sections.
    #[arg(long, conflicts_with = "game", required_unless_present = "game")]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub game: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub seeds: Vec<u64>,
    /// Also write the report as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn emit(out: &Option<PathBuf>, value: &serde_json::Value) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    match out {
        Some(p) => write_atomic(p, s.as_bytes()),
        None => {
            print!("{s}");
            Ok(())
        }
    }
}

fn agent_objective(nu: &str) -> Option<usize> {
    nu.strip_prefix("agent").and_then(|k| k.parse().ok())
}

fn worst_cce_cmd(a: &WorstCceArgs) -> Result<()> {
    let game = load_game(&a.game)?;
    let ego = EgoStrategy::uniform(game.ego_actions());
    let eps = vec![a.eps; game.num_agents()];
    let cfg = BlackwellConfig {
        eps_tol: a.tol,
        max_outer: a.max_outer,
        max_inner: a.max_inner,
        initial_inner: a.initial_inner,
        binary_search: !a.no_binary_search,
        sigma: a.sigma,
        seed: a.seed,
        ..BlackwellConfig::default()
    };
    let (objective, agent) = match agent_objective(&a.nu) {
        Some(k) if a.maximize => (Objective::Utility(k), Some(k)),
        Some(k) => (Objective::NegUtility(k), Some(k)),
        None => {
            let text = std::fs::read_to_string(&a.nu).with_context(|| format!("reading objective {}", a.nu))?;
            (Objective::Table(serde_json::from_str(&text)?), None)
        }
    };
    let res = worst_case_cce(&game, &ego, &objective, &eps, &cfg)?;
    let value = match agent {
        Some(k) => expected_utility(&game, k, &ego, &res.mixture)?,
        None => res.value,
    };
    let max_regret = regret(&game, &ego, &res.mixture)?.max_regret();
    let mut mixture = res.mixture.clone();
    mixture.thin(a.max_components);
    emit(
        &a.out,
        &json!({
            "value": value,
            "objective": res.value,
            "max_regret": max_regret,
            "mixture": mixture,
            "converged": res.converged,
            "iterations": res.iterations,
        }),
    )
}

fn sample_pessimistic_cmd(a: &SamplePessimisticArgs) -> Result<()> {
    let game = load_game(&a.game)?;
    let ego = EgoStrategy::uniform(game.ego_actions());
    let p = a.lagrangian.params();
    let mut state = p.state(game.num_agents(), a.eps);
    let res = sample_pessimistic(&game, &ego, &mut state, &p.blackbox, &p.estimator, a.seed)?;
    let mut mixture = res.mixture.clone();
    mixture.thin(a.max_components);
    emit(
        &a.out,
        &json!({
            "lower_bound": res.lower_bound,
            "converged": res.converged,
            "rounds": res.trace,
            "mixture": mixture,
        }),
    )
}

fn train_robust_cmd(a: &TrainRobustArgs) -> Result<()> {
    let game = load_game(&a.game)?;
    let inner = match a.inner {
        InnerArg::Lp => InnerSampler::LpOracle,
        InnerArg::Blackwell => InnerSampler::Blackwell(BlackwellConfig {
            eps_tol: a.tol,
            ..BlackwellConfig::default()
        }),
        InnerArg::Lagrangian => InnerSampler::Lagrangian(a.lagrangian.params()),
    };
    let cfg = RobustTrainerConfig {
        inner,
        eps: a.eps,
        outer_steps: a.outer_steps,
        ego_bandit: EgoBandit {
            learning_rate: a.bandit_rate,
            entropy_floor: a.entropy_floor,
        },
    };
    let res = train_robust(&game, &cfg, a.seed)?;
    emit(&a.out, &serde_json::to_value(&res)?)
}

fn make_game_cmd(a: &MakeGameArgs) -> Result<()> {
    let source = match a.kind {
        GameKind::Nmatrix => GameSource::Nmatrix {
            agents: a.agents,
            actions: a.actions,
            seed: a.seed,
        },
        GameKind::Grid => GameSource::Grid { seed: a.seed },
        GameKind::Random => GameSource::Random {
            shape: a.shape.clone(),
            ego_actions: a.ego_actions,
            seed: a.seed,
        },
        GameKind::PrisonersDilemma => GameSource::PrisonersDilemma,
        GameKind::MatchingPennies => GameSource::MatchingPennies,
        GameKind::Coordination => GameSource::Coordination,
        GameKind::Samuelson => GameSource::Samuelson,
    };
    let game = source.build()?;
    let text = game_json(&game, source.grid()?.as_ref())?;
    match &a.out {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run_cmd(config: &Path, require: Option<ExperimentKind>) -> Result<ExitCode> {
    let loaded = load_config(config)?;
    if let Some(k) = require {
        if loaded.kind() != k {
            bail!("config kind is {}, expected {}", loaded.kind().name(), k.name());
        }
    }
    let outcome = run_experiment(&loaded)?;
    print!("{}", outcome.summary);
    eprintln!("wrote {}", outcome.output_dir.display());
    Ok(if outcome.all_failed() {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    })
}

fn verify_cmd(a: &VerifyArgs) -> Result<ExitCode> {
    let cfg = match (&a.config, &a.game) {
        (Some(c), _) => load_verify_config(c)?,
        (None, Some(g)) => VerifyConfig {
            game: GameSource::File {
                path: g.to_string_lossy().into_owned(),
            },
            algo: VerifyAlgo::default(),
            run: crate::config::RunSection {
                seeds: a.seeds.clone(),
                workers: None,
            },
        },
        (None, None) => bail!("verify needs --config or --game"),
    };
    let report = run_verify(&cfg)?;
    for line in report.lines() {
        println!("{line}");
    }
    if let Some(p) = &a.out {
        emit(&Some(p.clone()), &serde_json::to_value(&report)?)?;
    }
    Ok(if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

pub fn dispatch(cli: Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::MakeGame(a) => make_game_cmd(a).map(|_| ExitCode::SUCCESS),
        Command::WorstCce(a) => worst_cce_cmd(a).map(|_| ExitCode::SUCCESS),
        Command::SamplePessimistic(a) => sample_pessimistic_cmd(a).map(|_| ExitCode::SUCCESS),
        Command::TrainRobust(a) => train_robust_cmd(a).map(|_| ExitCode::SUCCESS),
        Command::CrossEval(a) => run_cmd(&a.config, Some(ExperimentKind::CrossEval)),
        Command::Verify(a) => verify_cmd(a),
        Command::Run(a) => run_cmd(&a.config, None),
    }
}
