//! Sampler-versus-LP equivalence and invariant checks on dense games.

use std::path::Path;

use anyhow::{Context, Result};
use robustcce_core::blackwell::{worst_case_cce, BlackwellConfig};
use robustcce_core::envs;
use robustcce_core::lagrangian::sample_pessimistic;
use robustcce_core::normalize::normalize_payoffs;
use robustcce_core::oracle::{worst_case_value, LP_TOL};
use robustcce_core::regret::{expected_utility, is_epsilon_cce};
use robustcce_core::robust::LagrangianParams;
use robustcce_core::{DenseGame, EgoStrategy, Game, Objective};
use serde::{Deserialize, Serialize};

use crate::config::{desk_lagrangian, RunSection};
use crate::gamefile::GameSource;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomSuite {
    pub shape: Vec<usize>,
    pub count: u64,
}

impl Default for RandomSuite {
    fn default() -> Self {
        RandomSuite {
            shape: vec![2, 2, 2],
            count: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyAlgo {
    pub eps: f64,
    /// Slack grid for the monotonicity check.
    pub eps_grid: Vec<f64>,
    /// Allowed gap between the sampler's value and the LP optimum.
    pub value_tol: f64,
    pub blackwell: BlackwellConfig,
    /// Run the Lagrangian sandwich check with these settings.
    pub lagrangian: Option<LagrangianParams>,
    pub lagrangian_eps: f64,
    pub lagrangian_tol: f64,
    pub random_suite: Option<RandomSuite>,
}

impl Default for VerifyAlgo {
    fn default() -> Self {
        VerifyAlgo {
            eps: 0.0,
            eps_grid: vec![0.0, 0.01, 0.05, 0.1, 0.2, 0.5, 1.0],
            value_tol: 0.05,
            blackwell: BlackwellConfig::default(),
            lagrangian: None,
            lagrangian_eps: 0.1,
            lagrangian_tol: 0.1,
            random_suite: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    pub game: GameSource,
    #[serde(default)]
    pub algo: VerifyAlgo,
    #[serde(default)]
    pub run: RunSection,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub game: String,
    pub property: String,
    pub passed: bool,
    pub measured: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Report {
    pub checks: Vec<Check>,
}

impl Report {
    fn push(&mut self, game: &str, property: &str, passed: bool, measured: f64, threshold: f64) {
        self.checks.push(Check {
            game: game.into(),
            property: property.into(),
            passed,
            measured,
            threshold,
        });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn lines(&self) -> Vec<String> {
        self.checks
            .iter()
            .map(|c| {
                format!(
                    "{} {:<24} {:<22} measured {:.3e} threshold {:.3e}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.game,
                    c.property,
                    c.measured,
                    c.threshold
                )
            })
            .collect()
    }
}

pub fn load_verify_config(path: &Path) -> Result<VerifyConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut cfg: VerifyConfig = toml::from_str(&text).context("parsing verify config")?;
    if let GameSource::File { path: p } = &mut cfg.game {
        if Path::new(p.as_str()).is_relative() {
            let base = path.parent().unwrap_or(Path::new("."));
            *p = base.join(p.as_str()).to_string_lossy().into_owned();
        }
    }
    Ok(cfg)
}

/// Checks one game: LP monotonicity in the slack, the Blackwell sampler
/// against the LP, and optionally the Lagrangian lower bound.
pub fn verify_game(name: &str, game: &DenseGame, algo: &VerifyAlgo, seeds: &[u64], report: &mut Report) -> Result<()> {
    let n = game.num_agents();
    let ego = EgoStrategy::uniform(game.ego_actions());

    let mut worst_step: f64 = 0.0;
    let mut prev: Option<f64> = None;
    for &e in &algo.eps_grid {
        let v = worst_case_value(game, &ego, &vec![e; n])?;
        if let Some(p) = prev {
            worst_step = worst_step.max(v - p);
        }
        prev = Some(v);
    }
    report.push(name, "lp-monotone", worst_step <= LP_TOL, worst_step, LP_TOL);

    let eps = vec![algo.eps; n];
    let lp = worst_case_value(game, &ego, &eps)?;
    let tol = normalize_payoffs(game)?.map.diff_to_original(algo.blackwell.eps_tol);
    let relaxed: Vec<f64> = eps.iter().map(|e| e + tol).collect();
    let lp_relaxed = worst_case_value(game, &ego, &relaxed)?;
    for &seed in seeds {
        let cfg = BlackwellConfig {
            seed,
            ..algo.blackwell.clone()
        };
        let res = worst_case_cce(game, &ego, &Objective::NegUtility(0), &eps, &cfg)?;
        let value = expected_utility(game, 0, &ego, &res.mixture)?;
        let member = is_epsilon_cce(game, &ego, &res.mixture, &relaxed, 1e-9)?;
        report.push(name, &format!("blackwell-member s{seed}"), member, 0.0, 0.0);
        report.push(
            name,
            &format!("blackwell-gap s{seed}"),
            value <= lp + algo.value_tol,
            value - lp,
            algo.value_tol,
        );
        report.push(
            name,
            &format!("blackwell-floor s{seed}"),
            !member || value >= lp_relaxed - 1e-7,
            lp_relaxed - value,
            1e-7,
        );
    }

    if let Some(p) = &algo.lagrangian {
        let lp_l = worst_case_value(game, &ego, &vec![algo.lagrangian_eps; n])?;
        for &seed in seeds {
            let mut state = p.state(n, algo.lagrangian_eps);
            let res = sample_pessimistic(game, &ego, &mut state, &p.blackbox, &p.estimator, seed)?;
            report.push(
                name,
                &format!("lagrangian-bound s{seed}"),
                res.lower_bound <= lp_l + algo.lagrangian_tol,
                res.lower_bound - lp_l,
                algo.lagrangian_tol,
            );
        }
    }
    Ok(())
}

/// A game where every payoff is `c`: every sampler must report `c`.
pub fn verify_constant(algo: &VerifyAlgo, report: &mut Report) -> Result<()> {
    let c = 0.25;
    let game = DenseGame::from_fn(1, vec![2, 2], None, |_, _, _| c)?;
    let ego = EgoStrategy::uniform(1);
    let lp = worst_case_value(&game, &ego, &[0.0, 0.0])?;
    report.push("constant", "lp-value", (lp - c).abs() <= 1e-9, (lp - c).abs(), 1e-9);
    let res = worst_case_cce(&game, &ego, &Objective::NegUtility(0), &[0.0, 0.0], &algo.blackwell)?;
    let v = expected_utility(&game, 0, &ego, &res.mixture)?;
    report.push("constant", "blackwell-value", (v - c).abs() <= 1e-9, (v - c).abs(), 1e-9);
    let p = algo.lagrangian.unwrap_or_else(|| LagrangianParams {
        rounds: 20,
        selfplay_steps: 50,
        ..desk_lagrangian()
    });
    let mut state = p.state(2, 0.0);
    let res = sample_pessimistic(&game, &ego, &mut state, &p.blackbox, &p.estimator, 0)?;
    let d = (res.lower_bound - c).abs();
    report.push("constant", "lagrangian-value", d <= 1e-9, d, 1e-9);
    Ok(())
}

pub fn run_verify(cfg: &VerifyConfig) -> Result<Report> {
    let mut report = Report::default();
    let game = cfg.game.build()?;
    verify_game("configured", &game, &cfg.algo, &cfg.run.seeds, &mut report)?;
    if let Some(suite) = &cfg.algo.random_suite {
        for s in 0..suite.count {
            let g = envs::random_game(1, suite.shape.clone(), s)?;
            verify_game(&format!("random{:?}#{s}", suite.shape), &g, &cfg.algo, &cfg.run.seeds[..1], &mut report)?;
        }
    }
    verify_constant(&cfg.algo, &mut report)?;
    Ok(report)
}
