//! Experiment configuration files.
//!
//! ```toml
//! [experiment]
//! kind = "figure3-sweep"
//! output_dir = "out/fig3"
//!
//! [game]
//! source = "grid"
//! seed = 0
//!
//! [algo]
//! eps_grid = [0.0, 0.1, 0.2]
//!
//! [run]
//! seeds = [0, 1, 2]
//! ```
//!
//! `[algo]` is parsed according to `kind`; unknown keys are rejected.
//! `ROBUSTCCE_SEED` replaces the seed list (`"3"`, `"1,2,5"` or `"0..10"`).

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use robustcce_core::blackwell::BlackwellConfig;
use robustcce_core::envs::{GridBimatrixGame, RewardTransform};
use robustcce_core::lagrangian::{Blackbox, MultiplierMode};
use robustcce_core::oracle::DEFAULT_DENSE_CAP;
use robustcce_core::robust::{EgoBandit, InnerSampler, LagrangianParams, Population, RobustTrainerConfig};
use robustcce_core::{DenseGame, EgoStrategy, Game};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::gamefile::GameSource;

pub const SEED_ENV: &str = "ROBUSTCCE_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    WorstCce,
    SamplePessimistic,
    TrainRobust,
    CrossEval,
    AblationFrozenLambda,
    Figure3Sweep,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::WorstCce => "worst-cce",
            ExperimentKind::SamplePessimistic => "sample-pessimistic",
            ExperimentKind::TrainRobust => "train-robust",
            ExperimentKind::CrossEval => "cross-eval",
            ExperimentKind::AblationFrozenLambda => "ablation-frozen-lambda",
            ExperimentKind::Figure3Sweep => "figure3-sweep",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub name: Option<String>,
    pub output_dir: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub seeds: Vec<u64>,
    /// Worker threads; `None` lets the pool decide.
    pub workers: Option<usize>,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            seeds: vec![0],
            workers: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub game: GameSource,
    #[serde(default)]
    pub algo: toml::Table,
    #[serde(default)]
    pub run: RunSection,
}

/// Lagrangian settings tuned for desk-scale matrix games: per-step regret
/// units call for a much larger multiplier step than episode returns.
pub fn desk_lagrangian() -> LagrangianParams {
    LagrangianParams {
        alpha_lambda: 1.0,
        rounds: 300,
        selfplay_steps: 200,
        blackbox: Blackbox {
            init_noise: 1.0,
            ..Blackbox::default()
        },
        ..LagrangianParams::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorstCceAlgo {
    pub eps: f64,
    /// Agent whose utility is the objective.
    pub agent: usize,
    /// Best case instead of worst case.
    pub maximize: bool,
    /// Ego mixed strategy; uniform if absent.
    pub ego: Option<Vec<f64>>,
    pub compare_lp: bool,
    pub max_json_components: usize,
    pub blackwell: BlackwellConfig,
}

impl Default for WorstCceAlgo {
    fn default() -> Self {
        WorstCceAlgo {
            eps: 0.0,
            agent: 0,
            maximize: false,
            ego: None,
            compare_lp: true,
            max_json_components: 64,
            blackwell: BlackwellConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplePessimisticAlgo {
    pub eps: f64,
    pub ego: Option<Vec<f64>>,
    pub compare_lp: bool,
    pub max_json_components: usize,
    pub lagrangian: LagrangianParams,
}

impl Default for SamplePessimisticAlgo {
    fn default() -> Self {
        SamplePessimisticAlgo {
            eps: 0.1,
            ego: None,
            compare_lp: true,
            max_json_components: 64,
            lagrangian: LagrangianParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Regime {
    pub name: String,
    pub eps: f64,
    pub inner: InnerSampler,
}

impl Default for Regime {
    fn default() -> Self {
        Regime {
            name: "ours".into(),
            eps: 0.2,
            inner: InnerSampler::Lagrangian(LagrangianParams {
                rounds: 100,
                ..desk_lagrangian()
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrossEvalAlgo {
    pub populations: Vec<Population>,
    /// Training regimes; defaults to one per population plus a robust one.
    pub regimes: Option<Vec<Regime>>,
    pub outer_steps: usize,
    pub episodes: usize,
    pub ego_bandit: EgoBandit,
}

pub fn default_populations() -> Vec<Population> {
    let bb = Blackbox {
        init_noise: 1.0,
        ..Blackbox::default()
    };
    let pop = |name: &str, transform| Population {
        name: name.into(),
        transform,
        blackbox: bb,
        selfplay_steps: 300,
        train_episodes: 10,
    };
    vec![
        pop("original", RewardTransform::Identity),
        pop("adversarial-0.25", RewardTransform::Adversarial { q: 0.25 }),
        pop("adversarial-1", RewardTransform::Adversarial { q: 1.0 }),
        pop("risk-averse-0.05", RewardTransform::RiskAverse { eta: 0.05 }),
        pop("risk-averse-0.2", RewardTransform::RiskAverse { eta: 0.2 }),
    ]
}

impl Default for CrossEvalAlgo {
    fn default() -> Self {
        CrossEvalAlgo {
            populations: default_populations(),
            regimes: None,
            outer_steps: 20000,
            episodes: 10,
            ego_bandit: EgoBandit::default(),
        }
    }
}

impl CrossEvalAlgo {
    pub fn regimes(&self) -> Vec<Regime> {
        match &self.regimes {
            Some(r) => r.clone(),
            None => {
                let mut r: Vec<Regime> = self
                    .populations
                    .iter()
                    .map(|p| Regime {
                        name: p.name.clone(),
                        eps: 0.0,
                        inner: InnerSampler::Population(p.clone()),
                    })
                    .collect();
                r.push(Regime::default());
                r
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationAlgo {
    /// Slack of the dynamic run.
    pub eps: f64,
    pub lambda0_grid: Vec<f64>,
    pub lagrangian: LagrangianParams,
}

impl Default for AblationAlgo {
    fn default() -> Self {
        AblationAlgo {
            eps: 0.15,
            lambda0_grid: vec![0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 8.0],
            lagrangian: desk_lagrangian(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Figure3Algo {
    pub eps_grid: Vec<f64>,
    pub lagrangian: LagrangianParams,
}

impl Default for Figure3Algo {
    fn default() -> Self {
        Figure3Algo {
            eps_grid: vec![0.0, 0.05, 0.1, 0.15, 0.2, 0.3],
            lagrangian: desk_lagrangian(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Algo {
    WorstCce(WorstCceAlgo),
    SamplePessimistic(SamplePessimisticAlgo),
    TrainRobust(RobustTrainerConfig),
    CrossEval(CrossEvalAlgo),
    AblationFrozenLambda(AblationAlgo),
    Figure3Sweep(Figure3Algo),
}

impl Algo {
    /// Parses `[algo]` over the kind's defaults: keys left out keep the
    /// default value even inside nested tables.
    pub fn parse(kind: ExperimentKind, table: &toml::Table) -> Result<Algo> {
        let defaults = match kind {
            ExperimentKind::WorstCce => toml::Value::try_from(WorstCceAlgo::default())?,
            ExperimentKind::SamplePessimistic => toml::Value::try_from(SamplePessimisticAlgo::default())?,
            ExperimentKind::TrainRobust => toml::Value::try_from(RobustTrainerConfig::default())?,
            ExperimentKind::CrossEval => toml::Value::try_from(CrossEvalAlgo::default())?,
            ExperimentKind::AblationFrozenLambda => toml::Value::try_from(AblationAlgo::default())?,
            ExperimentKind::Figure3Sweep => toml::Value::try_from(Figure3Algo::default())?,
        };
        let v = merge(defaults, toml::Value::Table(table.clone()));
        Ok(match kind {
            ExperimentKind::WorstCce => Algo::WorstCce(v.try_into()?),
            ExperimentKind::SamplePessimistic => Algo::SamplePessimistic(v.try_into()?),
            ExperimentKind::TrainRobust => Algo::TrainRobust(v.try_into()?),
            ExperimentKind::CrossEval => Algo::CrossEval(v.try_into()?),
            ExperimentKind::AblationFrozenLambda => Algo::AblationFrozenLambda(v.try_into()?),
            ExperimentKind::Figure3Sweep => Algo::Figure3Sweep(v.try_into()?),
        })
    }

    /// Range checks that need the game.
    pub fn validate(&self, game: &DenseGame) -> Result<()> {
        let n = game.num_agents();
        let size: usize = game.action_counts().iter().product();
        let check_eps = |e: f64| -> Result<()> {
            if !(e.is_finite() && e >= 0.0) {
                bail!("eps must be finite and nonnegative, got {e}");
            }
            Ok(())
        };
        let check_ego = |ego: &Option<Vec<f64>>| -> Result<()> {
            if let Some(x) = ego {
                EgoStrategy::new(x.clone()).validate(game.ego_actions())?;
            }
            Ok(())
        };
        let check_lagrangian = |p: &LagrangianParams, eps: f64| -> Result<()> {
            p.state(n, eps).validate(n)?;
            if matches!(p.estimator.kind, robustcce_core::lagrangian::EstimatorKind::MonteCarloProbe)
                && (p.estimator.probe_steps == 0 || p.estimator.probe_batches == 0)
            {
                bail!("probe estimator needs positive probe_steps and probe_batches");
            }
            Ok(())
        };
        match self {
            Algo::WorstCce(a) => {
                check_eps(a.eps)?;
                check_ego(&a.ego)?;
                if a.agent > n {
                    bail!("objective agent {} out of range 0..={n}", a.agent);
                }
                a.blackwell.validate()?;
            }
            Algo::SamplePessimistic(a) => {
                check_eps(a.eps)?;
                check_ego(&a.ego)?;
                check_lagrangian(&a.lagrangian, a.eps)?;
            }
            Algo::TrainRobust(c) => {
                c.validate(game)?;
                check_inner(&c.inner, c.eps, n)?;
            }
            Algo::CrossEval(a) => {
                if a.populations.is_empty() {
                    bail!("cross-eval needs at least one population");
                }
                if a.episodes == 0 || a.outer_steps == 0 {
                    bail!("episodes and outer_steps must be positive");
                }
                for p in &a.populations {
                    check_population(p)?;
                }
                for r in a.regimes() {
                    check_eps(r.eps)?;
                    let cfg = RobustTrainerConfig {
                        inner: r.inner.clone(),
                        eps: r.eps,
                        outer_steps: a.outer_steps,
                        ego_bandit: a.ego_bandit,
                    };
                    cfg.validate(game)?;
                    check_inner(&r.inner, r.eps, n)?;
                }
            }
            Algo::AblationFrozenLambda(a) => {
                check_eps(a.eps)?;
                check_lagrangian(&a.lagrangian, a.eps)?;
                if a.lambda0_grid.is_empty() {
                    bail!("lambda0_grid is empty");
                }
                for &l in &a.lambda0_grid {
                    let p = LagrangianParams {
                        lambda0: l,
                        mode: MultiplierMode::Frozen,
                        ..a.lagrangian
                    };
                    check_lagrangian(&p, a.eps)?;
                }
            }
            Algo::Figure3Sweep(a) => {
                if a.eps_grid.is_empty() {
                    bail!("eps_grid is empty");
                }
                for &e in &a.eps_grid {
                    check_eps(e)?;
                    check_lagrangian(&a.lagrangian, e)?;
                }
            }
        }
        if size > DEFAULT_DENSE_CAP {
            bail!("game has {size} joint profiles, above the dense cap {DEFAULT_DENSE_CAP}");
        }
        Ok(())
    }
}

/// Overlays `over` onto `base`. Tables merge key by key unless their
/// `kind` tags differ, in which case `over` replaces `base` outright;
/// everything else is replaced.
fn merge(base: toml::Value, over: toml::Value) -> toml::Value {
    match (base, over) {
        (toml::Value::Table(mut b), toml::Value::Table(o)) => {
            if let (Some(bk), Some(ok)) = (b.get("kind"), o.get("kind")) {
                if bk != ok {
                    return toml::Value::Table(o);
                }
            }
            for (k, v) in o {
                let merged = match b.remove(&k) {
                    Some(old) => merge(old, v),
                    None => v,
                };
                b.insert(k, merged);
            }
            toml::Value::Table(b)
        }
        (_, over) => over,
    }
}

fn check_population(p: &Population) -> Result<()> {
    p.transform.validate()?;
    if p.selfplay_steps == 0 {
        bail!("population {} needs positive selfplay_steps", p.name);
    }
    Ok(())
}

fn check_inner(inner: &InnerSampler, eps: f64, n: usize) -> Result<()> {
    match inner {
        InnerSampler::Blackwell(c) => c.validate()?,
        InnerSampler::Lagrangian(p) => p.state(n, eps).validate(n)?,
        InnerSampler::Population(p) => check_population(p)?,
        InnerSampler::LpOracle => {}
    }
    Ok(())
}

/// A parsed, validated configuration with its game built.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: ExperimentConfig,
    pub algo: Algo,
    pub game: DenseGame,
    pub grid: Option<GridBimatrixGame>,
    pub hash: String,
    pub output_dir: PathBuf,
}

impl Loaded {
    pub fn kind(&self) -> ExperimentKind {
        self.config.experiment.kind
    }

    pub fn seeds(&self) -> &[u64] {
        &self.config.run.seeds
    }
}

pub fn parse_seed_list(s: &str) -> Result<Vec<u64>> {
    let s = s.trim();
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse()?;
        let b: u64 = b.trim().parse()?;
        if b <= a {
            bail!("empty seed range {s}");
        }
        return Ok((a..b).collect());
    }
    s.split(',')
        .map(|p| p.trim().parse::<u64>().map_err(|e| anyhow!("bad seed {p:?}: {e}")))
        .collect()
}

/// Hex SHA-256 prefix over every field that affects per-seed results:
/// kind, game payoffs and the fully defaulted algorithm parameters.
pub fn config_hash(kind: ExperimentKind, game: &DenseGame, algo: &Algo) -> Result<String> {
    let canonical = serde_json::json!({
        "kind": kind.name(),
        "game": game,
        "algo": algo,
    });
    let digest = Sha256::digest(serde_json::to_vec(&canonical)?);
    Ok(digest.iter().take(8).map(|b| format!("{b:02x}")).collect())
}

pub fn parse_config(text: &str, base_dir: &Path, seed_override: Option<&str>) -> Result<Loaded> {
    let mut config: ExperimentConfig = toml::from_str(text).context("parsing experiment config")?;
    if let GameSource::File { path } = &mut config.game {
        let p = Path::new(path.as_str());
        if p.is_relative() {
            *path = base_dir.join(p).to_string_lossy().into_owned();
        }
        if !Path::new(path.as_str()).exists() {
            bail!("game file {path} does not exist");
        }
    }
    if let Some(s) = seed_override {
        config.run.seeds = parse_seed_list(s).with_context(|| format!("parsing {SEED_ENV}"))?;
    }
    if config.run.seeds.is_empty() {
        bail!("no seeds to run");
    }
    let mut seen = config.run.seeds.clone();
    seen.sort_unstable();
    seen.dedup();
    if seen.len() != config.run.seeds.len() {
        bail!("seed list has duplicates");
    }
    if config.run.workers == Some(0) {
        bail!("workers must be positive");
    }
    let algo = Algo::parse(config.experiment.kind, &config.algo).context("parsing [algo]")?;
    let game = config.game.build()?;
    algo.validate(&game).context("validating [algo]")?;
    let grid = config.game.grid()?;
    let hash = config_hash(config.experiment.kind, &game, &algo)?;
    let out = PathBuf::from(&config.experiment.output_dir);
    let output_dir = if out.is_relative() { base_dir.join(out) } else { out };
    Ok(Loaded {
        config,
        algo,
        game,
        grid,
        hash,
        output_dir,
    })
}

/// Reads a config file; relative paths inside it resolve against its
/// directory.
pub fn load_config(path: &Path) -> Result<Loaded> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let env = std::env::var(SEED_ENV).ok();
    parse_config(&text, base, env.as_deref()).with_context(|| format!("in {}", path.display()))
}
