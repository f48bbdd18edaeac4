//! Per-seed experiment bodies and the seed-parallel runner.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use robustcce_core::blackwell::worst_case_cce;
use robustcce_core::lagrangian::{sample_pessimistic, MultiplierMode, PessimisticSample};
use robustcce_core::oracle::{solve_cce_lp, worst_case_value, Sense, DEFAULT_DENSE_CAP};
use robustcce_core::regret::regret;
use robustcce_core::rng::derive_seed;
use robustcce_core::robust::{evaluate_cross, mean_stderr, train_robust, LagrangianParams, RobustTrainerConfig};
use robustcce_core::{DenseGame, EgoStrategy, Game, Objective, PlayMixture};
use serde::Serialize;
use serde_json::json;

use crate::config::{AblationAlgo, Algo, CrossEvalAlgo, Figure3Algo, Loaded, SamplePessimisticAlgo, WorstCceAlgo};
use crate::output::{num, write_json, write_atomic, Table};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Everything one seed produces.
#[derive(Debug, Clone, Default)]
pub struct SeedResult {
    pub tables: BTreeMap<String, Table>,
    pub json: serde_json::Value,
    pub summary: Vec<String>,
}

impl SeedResult {
    fn table(&mut self, name: &str, columns: &[&str]) -> &mut Table {
        self.tables.entry(name.to_string()).or_insert_with(|| Table::new(columns))
    }
}

fn ego_of(game: &DenseGame, ego: &Option<Vec<f64>>) -> EgoStrategy {
    match ego {
        Some(x) => EgoStrategy::new(x.clone()),
        None => EgoStrategy::uniform(game.ego_actions()),
    }
}

fn within_cap(game: &DenseGame) -> bool {
    game.action_counts().iter().product::<usize>() <= DEFAULT_DENSE_CAP
}

fn thinned(mixture: &PlayMixture, max: usize) -> PlayMixture {
    let mut m = mixture.clone();
    m.thin(max);
    m
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn flag(b: bool) -> String {
    if b { "true" } else { "false" }.to_string()
}

pub fn run_seed(l: &Loaded, seed: u64) -> Result<SeedResult> {
    match &l.algo {
        Algo::WorstCce(a) => worst_cce_seed(l, a, seed),
        Algo::SamplePessimistic(a) => sample_pessimistic_seed(l, a, seed),
        Algo::TrainRobust(c) => train_robust_seed(l, c, seed),
        Algo::CrossEval(a) => cross_eval_seed(l, a, seed),
        Algo::AblationFrozenLambda(a) => ablation_seed(l, a, seed),
        Algo::Figure3Sweep(a) => figure3_seed(l, a, seed),
    }
}

fn worst_cce_seed(l: &Loaded, a: &WorstCceAlgo, seed: u64) -> Result<SeedResult> {
    let g = &l.game;
    let ego = ego_of(g, &a.ego);
    let n = g.num_agents();
    let eps = vec![a.eps; n];
    let (objective, sense) = if a.maximize {
        (Objective::Utility(a.agent), Sense::Maximize)
    } else {
        (Objective::NegUtility(a.agent), Sense::Minimize)
    };
    let cfg = robustcce_core::blackwell::BlackwellConfig {
        seed,
        ..a.blackwell.clone()
    };
    let res = worst_case_cce(g, &ego, &objective, &eps, &cfg)?;
    let sign = if a.maximize { 1.0 } else { -1.0 };
    let utility = sign * res.value;
    let lp = if a.compare_lp && within_cap(g) {
        Some(solve_cce_lp(g, &ego, &Objective::Utility(a.agent), sense, &eps)?.1)
    } else {
        None
    };
    let max_regret = regret(g, &ego, &res.mixture)?.max_regret();
    let mut out = SeedResult::default();
    out.table(
        "metrics",
        &["utility", "lp_value", "max_regret", "converged", "iterations", "components"],
    )
    .push(
        &l.hash,
        seed,
        vec![
            num(utility),
            lp.map(num).unwrap_or_default(),
            num(max_regret),
            flag(res.converged),
            res.iterations.to_string(),
            res.mixture.len().to_string(),
        ],
    );
    let trace = out.table("trace", &["t", "target", "distance"]);
    for s in &res.trace {
        trace.push(&l.hash, seed, vec![s.t.to_string(), num(sign * s.y), num(s.dist)]);
    }
    out.json = json!({
        "value": utility,
        "y_best": sign * res.y_best,
        "lp_value": lp,
        "converged": res.converged,
        "iterations": res.iterations,
        "mixture": thinned(&res.mixture, a.max_json_components),
    });
    out.summary.push(format!(
        "utility {utility:.6} (lp {}) regret {max_regret:.2e} converged {}",
        lp.map_or("-".into(), |v| format!("{v:.6}")),
        res.converged
    ));
    Ok(out)
}

fn pessimistic(g: &DenseGame, ego: &EgoStrategy, p: &LagrangianParams, eps: f64, seed: u64) -> Result<PessimisticSample> {
    let mut state = p.state(g.num_agents(), eps);
    Ok(sample_pessimistic(g, ego, &mut state, &p.blackbox, &p.estimator, seed)?)
}

fn sample_pessimistic_seed(l: &Loaded, a: &SamplePessimisticAlgo, seed: u64) -> Result<SeedResult> {
    let g = &l.game;
    let ego = ego_of(g, &a.ego);
    let res = pessimistic(g, &ego, &a.lagrangian, a.eps, seed)?;
    let rep = regret(g, &ego, &res.mixture)?;
    let lp = if a.compare_lp && within_cap(g) {
        Some(worst_case_value(g, &ego, &vec![a.eps; g.num_agents()])?)
    } else {
        None
    };
    let last_lambda = res.trace.last().map_or(0.0, |r| mean(&r.lambdas));
    let mut out = SeedResult::default();
    out.table(
        "metrics",
        &["lower_bound", "lp_min", "max_regret", "mean_regret", "lambda_mean", "converged"],
    )
    .push(
        &l.hash,
        seed,
        vec![
            num(res.lower_bound),
            lp.map(num).unwrap_or_default(),
            num(rep.max_regret()),
            num(mean(&rep.per_agent_regret)),
            num(last_lambda),
            flag(res.converged),
        ],
    );
    let trace = out.table("trace", &["round", "lambda_mean", "regret_estimate_max", "u0"]);
    for r in &res.trace {
        let est = r.regret_estimates.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        trace.push(
            &l.hash,
            seed,
            vec![r.round.to_string(), num(mean(&r.lambdas)), num(est), num(r.u0)],
        );
    }
    out.json = json!({
        "lower_bound": res.lower_bound,
        "lp_min": lp,
        "converged": res.converged,
        "trace": res.trace,
        "mixture": thinned(&res.mixture, a.max_json_components),
    });
    out.summary.push(format!(
        "lower bound {:.6} (lp {}) max regret {:.4} converged {}",
        res.lower_bound,
        lp.map_or("-".into(), |v| format!("{v:.6}")),
        rep.max_regret(),
        res.converged
    ));
    Ok(out)
}

fn train_robust_seed(l: &Loaded, c: &RobustTrainerConfig, seed: u64) -> Result<SeedResult> {
    let res = train_robust(&l.game, c, seed)?;
    let mut out = SeedResult::default();
    let policy = out.table("policy", &["action", "avg_prob", "last_prob", "inner_value"]);
    for a in 0..l.game.ego_actions() {
        policy.push(
            &l.hash,
            seed,
            vec![
                a.to_string(),
                num(res.ego.dist[a]),
                num(res.last.dist[a]),
                res.action_values[a].map(num).unwrap_or_default(),
            ],
        );
    }
    let trace = out.table("trace", &["step", "action", "value"]);
    for (t, (a, v)) in res.actions.iter().zip(&res.value_trace).enumerate() {
        trace.push(&l.hash, seed, vec![t.to_string(), a.to_string(), num(*v)]);
    }
    out.summary.push(format!(
        "ego {:?} (argmax {}), {} inner failures",
        res.ego.dist,
        res.ego.argmax(),
        res.failures.len()
    ));
    out.json = serde_json::to_value(&res)?;
    Ok(out)
}

#[derive(Serialize)]
struct CrossSeedJson<'a> {
    regimes: Vec<String>,
    populations: Vec<String>,
    egos: &'a [EgoStrategy],
    cells: &'a robustcce_core::robust::CrossTable,
}

fn cross_eval_seed(l: &Loaded, a: &CrossEvalAlgo, seed: u64) -> Result<SeedResult> {
    let regimes = a.regimes();
    let egos = regimes
        .iter()
        .enumerate()
        .map(|(r, regime)| {
            let cfg = RobustTrainerConfig {
                inner: regime.inner.clone(),
                eps: regime.eps,
                outer_steps: a.outer_steps,
                ego_bandit: a.ego_bandit,
            };
            let res = train_robust(&l.game, &cfg, derive_seed(seed, r as u64))
                .with_context(|| format!("training regime {}", regime.name))?;
            Ok(res.ego)
        })
        .collect::<Result<Vec<_>>>()?;
    let table = evaluate_cross(&l.game, &egos, &a.populations, a.episodes, derive_seed(seed, u64::MAX))?;
    let mut out = SeedResult::default();
    let cells = out.table("cells", &["regime", "population", "mean", "stderr"]);
    for (r, regime) in regimes.iter().enumerate() {
        for (p, pop) in a.populations.iter().enumerate() {
            let c = table.cells[r][p];
            cells.push(
                &l.hash,
                seed,
                vec![regime.name.clone(), pop.name.clone(), num(c.mean), num(c.stderr)],
            );
        }
    }
    let pol = out.table("policies", &["regime", "action", "prob"]);
    for (regime, ego) in regimes.iter().zip(&egos) {
        for (i, p) in ego.dist.iter().enumerate() {
            pol.push(&l.hash, seed, vec![regime.name.clone(), i.to_string(), num(*p)]);
        }
    }
    out.json = serde_json::to_value(CrossSeedJson {
        regimes: regimes.iter().map(|r| r.name.clone()).collect(),
        populations: a.populations.iter().map(|p| p.name.clone()).collect(),
        egos: &egos,
        cells: &table,
    })?;
    out.summary.push(format!("{} regimes x {} populations", regimes.len(), a.populations.len()));
    Ok(out)
}

/// A (gambler reward, mean agent regret) outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Outcome {
    pub gambler_reward: f64,
    pub mean_agent_regret: f64,
}

/// Whether `q` is at least as good as `p` on both axes (lower gambler
/// reward, lower regret) and strictly better on one, beyond `tol`.
pub fn dominates(q: Outcome, p: Outcome, tol: f64) -> bool {
    let le_g = q.gambler_reward <= p.gambler_reward + tol;
    let le_r = q.mean_agent_regret <= p.mean_agent_regret + tol;
    let lt = q.gambler_reward < p.gambler_reward - tol || q.mean_agent_regret < p.mean_agent_regret - tol;
    le_g && le_r && lt
}

pub fn outcome(g: &DenseGame, ego: &EgoStrategy, res: &PessimisticSample) -> Result<Outcome> {
    let rep = regret(g, ego, &res.mixture)?;
    Ok(Outcome {
        gambler_reward: res.lower_bound,
        mean_agent_regret: mean(&rep.per_agent_regret),
    })
}

fn ablation_seed(l: &Loaded, a: &AblationAlgo, seed: u64) -> Result<SeedResult> {
    let g = &l.game;
    let ego = EgoStrategy::uniform(g.ego_actions());
    let mut out = SeedResult::default();
    let cols = ["mode", "lambda0", "gambler_reward", "mean_agent_regret", "converged"];
    let dynamic = pessimistic(g, &ego, &a.lagrangian, a.eps, seed)?;
    let dyn_out = outcome(g, &ego, &dynamic)?;
    out.table("ablation", &cols).push(
        &l.hash,
        seed,
        vec![
            "dynamic".into(),
            num(a.lagrangian.lambda0),
            num(dyn_out.gambler_reward),
            num(dyn_out.mean_agent_regret),
            flag(dynamic.converged),
        ],
    );
    let mut frozen = Vec::new();
    for &l0 in &a.lambda0_grid {
        let p = LagrangianParams {
            lambda0: l0,
            mode: MultiplierMode::Frozen,
            ..a.lagrangian
        };
        let res = pessimistic(g, &ego, &p, a.eps, seed)?;
        let o = outcome(g, &ego, &res)?;
        out.table("ablation", &cols).push(
            &l.hash,
            seed,
            vec![
                "frozen".into(),
                num(l0),
                num(o.gambler_reward),
                num(o.mean_agent_regret),
                flag(res.converged),
            ],
        );
        frozen.push((l0, o));
    }
    let dominated = frozen.iter().any(|(_, o)| dominates(*o, dyn_out, 0.0));
    out.summary.push(format!(
        "dynamic ({:.4}, {:.4}) dominated by a frozen point: {dominated}",
        dyn_out.gambler_reward, dyn_out.mean_agent_regret
    ));
    out.json = json!({ "dynamic": dyn_out, "frozen": frozen, "dominated": dominated });
    Ok(out)
}

fn figure3_seed(l: &Loaded, a: &Figure3Algo, seed: u64) -> Result<SeedResult> {
    let g = &l.game;
    let ego = EgoStrategy::uniform(g.ego_actions());
    let mut out = SeedResult::default();
    let mut points = Vec::new();
    for &eps in &a.eps_grid {
        let res = pessimistic(g, &ego, &a.lagrangian, eps, seed)?;
        let o = outcome(g, &ego, &res)?;
        out.table("sweep", &["eps", "gambler_reward", "mean_agent_regret", "converged"])
            .push(
                &l.hash,
                seed,
                vec![num(eps), num(o.gambler_reward), num(o.mean_agent_regret), flag(res.converged)],
            );
        out.summary.push(format!(
            "eps {eps}: gambler {:.4} regret {:.4}",
            o.gambler_reward, o.mean_agent_regret
        ));
        points.push(json!({ "eps": eps, "outcome": o, "final_lambdas": res.trace.last().map(|r| r.lambdas.clone()) }));
    }
    out.json = json!({ "points": points });
    Ok(out)
}

/// Fig. 4-shaped matrix: one row per regime, one `mean±stderr` column per
/// population. With several seeds the cell is the mean and standard error
/// of the per-seed means.
pub fn cross_matrix(cells: &Table, hash: &str, seeds: &[u64]) -> Result<Table> {
    let (ri, pi, mi, si) = match (
        cells.column("regime"),
        cells.column("population"),
        cells.column("mean"),
        cells.column("stderr"),
    ) {
        (Some(a), Some(b), Some(c), Some(d)) => (a, b, c, d),
        _ => bail!("cells table lacks regime/population/mean/stderr"),
    };
    let mut regimes: Vec<String> = Vec::new();
    let mut pops: Vec<String> = Vec::new();
    let mut values: BTreeMap<(String, String), Vec<(f64, f64)>> = BTreeMap::new();
    for row in &cells.rows {
        if !regimes.contains(&row[ri]) {
            regimes.push(row[ri].clone());
        }
        if !pops.contains(&row[pi]) {
            pops.push(row[pi].clone());
        }
        values
            .entry((row[ri].clone(), row[pi].clone()))
            .or_default()
            .push((row[mi].parse()?, row[si].parse()?));
    }
    let mut cols = vec!["regime"];
    cols.extend(pops.iter().map(String::as_str));
    let mut table = Table::new(&cols);
    table.columns[1] = "seeds".into();
    let seed_label = seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(";");
    for r in &regimes {
        let mut row = vec![r.clone()];
        for p in &pops {
            let v = &values[&(r.clone(), p.clone())];
            let (m, s) = if v.len() == 1 {
                v[0]
            } else {
                let means: Vec<f64> = v.iter().map(|x| x.0).collect();
                let c = mean_stderr(&means);
                (c.mean, c.stderr)
            };
            row.push(format!("{m:.4}±{s:.4}"));
        }
        table.push(hash, &seed_label, row);
    }
    Ok(table)
}

#[derive(Debug, Clone, Serialize)]
pub struct SeedStatus {
    pub seed: u64,
    pub ok: bool,
    pub error: Option<String>,
    pub wall_time_s: f64,
}

/// Written next to the CSVs; holds the only non-deterministic fields.
#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub kind: String,
    pub name: Option<String>,
    pub config_hash: String,
    pub module_version: String,
    pub seeds: Vec<SeedStatus>,
    pub wall_time_s: f64,
    pub outputs: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub record: RunRecord,
    pub output_dir: PathBuf,
    pub summary: String,
}

impl RunOutcome {
    pub fn all_failed(&self) -> bool {
        self.record.seeds.iter().all(|s| !s.ok)
    }
}

/// Runs every seed (in parallel), writes per-seed files atomically, then
/// merges them in seed-list order.
pub fn run_experiment(l: &Loaded) -> Result<RunOutcome> {
    let start = Instant::now();
    let dir = &l.output_dir;
    let seed_dir = dir.join("seeds");
    std::fs::create_dir_all(&seed_dir).with_context(|| format!("creating {}", seed_dir.display()))?;
    let kind = l.kind().name();

    let job = |&seed: &u64| -> (u64, f64, Result<SeedResult>) {
        let t = Instant::now();
        let res = run_seed(l, seed).and_then(|r| {
            for (name, table) in &r.tables {
                table.write(&seed_dir.join(format!("{name}-seed{seed}.csv")), kind)?;
            }
            write_json(&seed_dir.join(format!("seed{seed}.json")), &r.json)?;
            Ok(r)
        });
        (seed, t.elapsed().as_secs_f64(), res)
    };
    let results: Vec<(u64, f64, Result<SeedResult>)> = match l.config.run.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()?
            .install(|| l.seeds().par_iter().map(job).collect()),
        None => l.seeds().par_iter().map(job).collect(),
    };

    let mut merged: BTreeMap<String, Table> = BTreeMap::new();
    let mut statuses = Vec::new();
    let mut summary = vec![format!("{kind} [{}] config {}", l.config.experiment.name.as_deref().unwrap_or("-"), l.hash)];
    for (seed, secs, res) in &results {
        match res {
            Ok(r) => {
                for (name, t) in &r.tables {
                    merged.entry(name.clone()).or_insert_with(|| Table {
                        columns: t.columns.clone(),
                        rows: Vec::new(),
                    });
                    merged.get_mut(name).expect("inserted").extend(t);
                }
                for line in &r.summary {
                    summary.push(format!("seed {seed}: {line}"));
                }
                statuses.push(SeedStatus {
                    seed: *seed,
                    ok: true,
                    error: None,
                    wall_time_s: *secs,
                });
            }
            Err(e) => {
                summary.push(format!("seed {seed}: FAILED: {e:#}"));
                statuses.push(SeedStatus {
                    seed: *seed,
                    ok: false,
                    error: Some(format!("{e:#}")),
                    wall_time_s: *secs,
                });
            }
        }
    }
    if let Some(cells) = merged.get("cells") {
        let ok: Vec<u64> = statuses.iter().filter(|s| s.ok).map(|s| s.seed).collect();
        let matrix = cross_matrix(cells, &l.hash, &ok)?;
        for row in &matrix.rows {
            summary.push(row[2..].join("  "));
        }
        merged.insert("matrix".into(), matrix);
    }
    let mut outputs = Vec::new();
    for (name, t) in &merged {
        let file = format!("{name}.csv");
        t.write(&dir.join(&file), kind)?;
        outputs.push(file);
    }
    let record = RunRecord {
        kind: kind.to_string(),
        name: l.config.experiment.name.clone(),
        config_hash: l.hash.clone(),
        module_version: VERSION.to_string(),
        seeds: statuses,
        wall_time_s: start.elapsed().as_secs_f64(),
        outputs,
    };
    write_json(&dir.join("run.json"), &record)?;
    let mut text = summary.join("\n");
    text.push('\n');
    write_atomic(&dir.join("summary.txt"), text.as_bytes())?;
    Ok(RunOutcome {
        record,
        output_dir: dir.clone(),
        summary: text,
    })
}
