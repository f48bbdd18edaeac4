//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use robustcce::config::{desk_lagrangian, parse_config};
use robustcce::experiments::{dominates, run_experiment, Outcome};
use robustcce::output::Table;
use robustcce_core::blackwell::{worst_case_cce, BlackwellConfig};
use robustcce_core::envs::{coordination, make_grid_bimatrix, matching_pennies, prisoners_dilemma, random_game, samuelson};
use robustcce_core::lagrangian::sample_pessimistic;
use robustcce_core::learner::{external_regret, hedge_rate, Feedback, LearnerState};
use robustcce_core::oracle::{worst_case_value, LP_TOL};
use robustcce_core::regret::{expected_utility, is_epsilon_cce};
use robustcce_core::rng::{seeded, unit};
use robustcce_core::robust::{train_robust, InnerSampler, RobustTrainerConfig};
use robustcce_core::{DenseGame, EgoStrategy, Game, Objective};

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        passed,
        detail: detail.into(),
    }
}

fn within(start: Instant, limit: Duration) -> (bool, String) {
    let t = start.elapsed();
    (t <= limit, format!("{:.1}s of {}s", t.as_secs_f64(), limit.as_secs()))
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn random_suite(shape: &[usize], count: u64) -> Vec<DenseGame> {
    (0..count)
        .map(|s| random_game(1, shape.to_vec(), s * 7 + shape.len() as u64).unwrap())
        .collect()
}

fn oracle_equivalence() -> Verdict {
    let start = Instant::now();
    let cfg = BlackwellConfig {
        eps_tol: 1e-3,
        max_outer: 20,
        max_inner: Some(20_000),
        initial_inner: 512,
        ..BlackwellConfig::default()
    };
    let ego = EgoStrategy::uniform(1);
    let mut games: Vec<(String, DenseGame)> = Vec::new();
    for shape in [vec![2, 2], vec![2, 2, 2], vec![3, 3]] {
        for (i, g) in random_suite(&shape, 20).into_iter().enumerate() {
            games.push((format!("{shape:?}#{i}"), g));
        }
    }
    let mut failures = Vec::new();
    for (name, g) in &games {
        let n = g.num_agents();
        let eps = vec![0.0; n];
        let res = worst_case_cce(g, &ego, &Objective::NegUtility(0), &eps, &cfg).unwrap();
        let value = expected_utility(g, 0, &ego, &res.mixture).unwrap();
        let lp = worst_case_value(g, &ego, &eps).unwrap();
        let member = is_epsilon_cce(g, &ego, &res.mixture, &vec![1e-3; n], 1e-12).unwrap();
        if value < lp - 0.05 || !member {
            failures.push(format!("{name}: value {value:.4} lp {lp:.4} member {member}"));
        }
    }
    let pd = prisoners_dilemma();
    let res = worst_case_cce(&pd, &ego, &Objective::NegUtility(0), &[0.0, 0.0], &cfg).unwrap();
    let pd_value = expected_utility(&pd, 1, &ego, &res.mixture).unwrap();
    let pd_lp = worst_case_value(&pd, &ego, &[0.0, 0.0]).unwrap();
    let pd_ok = (pd_value - 1.0).abs() <= 0.05 && (pd_lp - 1.0).abs() <= LP_TOL;
    let (fast, time) = within(start, Duration::from_secs(300));
    verdict(
        failures.is_empty() && pd_ok && fast,
        format!(
            "{}/{} random games ok, PD worst-case u1 {pd_value:.4} (LP {pd_lp:.4}), {time}{}",
            games.len() - failures.len(),
            games.len(),
            if failures.is_empty() { String::new() } else { format!("; failing: {}", failures.join(", ")) }
        ),
    )
}

fn approachability_rate() -> Verdict {
    let start = Instant::now();
    let ego = EgoStrategy::uniform(1);
    let mut worst: f64 = 0.0;
    let mut steps = 0;
    let mut games = random_suite(&[2, 2, 2], 10);
    games.extend(random_suite(&[3, 3], 10));
    for (i, g) in games.iter().enumerate() {
        for eps in [0.0, 0.1] {
            let cfg = BlackwellConfig {
                max_inner: Some(20_000),
                seed: i as u64,
                ..BlackwellConfig::default()
            };
            let res = worst_case_cce(g, &ego, &Objective::NegUtility(0), &vec![eps; g.num_agents()], &cfg).unwrap();
            for s in &res.trace {
                let t = s.t.max(1) as f64;
                worst = worst.max(s.dist - 2.0 / t.sqrt());
                steps += 1;
            }
        }
    }
    let (fast, time) = within(start, Duration::from_secs(60));
    verdict(
        worst <= 1e-6 && steps > 0 && fast,
        format!("{steps} iterations, max excess over 2/sqrt(t) {worst:.3e}, {time}"),
    )
}

fn hedge_bound() -> Verdict {
    let start = Instant::now();
    let t = 10_000;
    let mut worst_ratio: f64 = 0.0;
    let mut violations = 0;
    for seq in 0..50u64 {
        let m = [2, 3, 5, 10, 20][(seq % 5) as usize];
        let mut learner = LearnerState::hedge(m, hedge_rate(m, t)).unwrap();
        let mut rng = seeded(seq);
        let mut played = Vec::with_capacity(t);
        let mut losses = Vec::with_capacity(t);
        for step in 0..t {
            let p = learner.strategy();
            // Half the sequences react to the learner, half are oblivious.
            let loss: Vec<f64> = if seq % 2 == 0 {
                let top = (0..m).max_by(|a, b| p[*a].partial_cmp(&p[*b]).unwrap()).unwrap();
                (0..m).map(|a| if a == top { 1.0 } else { 0.5 * unit(&mut rng) }).collect()
            } else if step % 2 == 0 {
                (0..m).map(|a| if a == 0 { 1.0 } else { 0.0 }).collect()
            } else {
                (0..m).map(|_| unit(&mut rng)).collect()
            };
            learner.step(Feedback::Full(&loss)).unwrap();
            played.push(p);
            losses.push(loss);
        }
        let bound = (t as f64 * (m as f64).ln() / 2.0).sqrt();
        let r = external_regret(&played, &losses);
        worst_ratio = worst_ratio.max(r / bound);
        if r > bound {
            violations += 1;
        }
    }
    let (fast, time) = within(start, Duration::from_secs(30));
    verdict(
        violations == 0 && fast,
        format!("50 sequences, worst regret/bound {worst_ratio:.3}, {time}"),
    )
}

fn samuelson_flip() -> Verdict {
    let start = Instant::now();
    let g = samuelson();
    let train = |eps: f64| {
        let cfg = RobustTrainerConfig {
            inner: InnerSampler::LpOracle,
            eps,
            outer_steps: 5000,
            ..RobustTrainerConfig::default()
        };
        train_robust(&g, &cfg, 0).unwrap()
    };
    let tight = train(0.0);
    let loose = train(1.5);
    let tight_ok = tight.ego.argmax() == 0 && tight.action_values[0].is_some_and(|v| (v - 100.0).abs() < 1e-6);
    let loose_ok = loose.ego.argmax() == 1
        && loose.action_values[0].is_some_and(|v| (v - 50.0).abs() < 1e-6)
        && loose.action_values[1].is_some_and(|v| (v - 99.0).abs() < 1e-6);

    // Smallest slack at which B's worst case is at least T's.
    let prefers_b = |eps: f64| {
        let t = worst_case_value(&g, &EgoStrategy::pure(0, 2), &[eps]).unwrap();
        let b = worst_case_value(&g, &EgoStrategy::pure(1, 2), &[eps]).unwrap();
        b >= t
    };
    let (mut lo, mut hi) = (0.0, 1.5);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if prefers_b(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let flip = hi;
    let mid_choice = train(0.5 * (flip + 1.0)).ego.argmax();
    let flip_ok = (flip - 1.0).abs() <= LP_TOL;
    let (fast, time) = within(start, Duration::from_secs(10));
    verdict(
        tight_ok && loose_ok && flip_ok && fast,
        format!(
            "eps 0 -> {} ({:?}), eps 1.5 -> {} ({:?}), flip at eps {flip:.6} (trainer at eps {:.3} picks {}), {time}",
            ["T", "B"][tight.ego.argmax()],
            tight.ego.dist.iter().map(|p| (p * 1000.0).round() / 1000.0).collect::<Vec<_>>(),
            ["T", "B"][loose.ego.argmax()],
            loose.ego.dist.iter().map(|p| (p * 1000.0).round() / 1000.0).collect::<Vec<_>>(),
            0.5 * (flip + 1.0),
            ["T", "B"][mid_choice],
        ),
    )
}

/// Seeds (of 10) on which the multiplier sampler stays within 0.1 of the
/// LP minimum and returns an (eps + 0.1)-CCE.
fn sandwich_passes(g: &DenseGame, eps: f64) -> usize {
    let p = desk_lagrangian();
    let ego = EgoStrategy::uniform(g.ego_actions());
    let n = g.num_agents();
    let lp = worst_case_value(g, &ego, &vec![eps; n]).unwrap();
    (0..10u64)
        .filter(|&seed| {
            let mut state = p.state(n, eps);
            let res = sample_pessimistic(g, &ego, &mut state, &p.blackbox, &p.estimator, seed).unwrap();
            res.lower_bound <= lp + 0.1 && is_epsilon_cce(g, &ego, &res.mixture, &vec![eps + 0.1; n], 1e-12).unwrap()
        })
        .count()
}

fn duality_sandwich() -> (Verdict, Verdict) {
    let start = Instant::now();
    let eps = 0.1;
    let mut suite: Vec<(String, DenseGame)> = vec![
        ("prisoners-dilemma".into(), prisoners_dilemma()),
        ("matching-pennies".into(), matching_pennies()),
        ("coordination".into(), coordination()),
        ("grid-stage".into(), make_grid_bimatrix(0).unwrap().stage_game().unwrap()),
    ];
    for (i, g) in random_suite(&[2, 2], 10).into_iter().enumerate() {
        suite.push((format!("random[2, 2]#{i}"), g));
    }
    let mut failing = Vec::new();
    for (name, g) in &suite {
        let k = sandwich_passes(g, eps);
        if k < 8 {
            failing.push(format!("{name} {k}/10"));
        }
    }
    let (fast, time) = within(start, Duration::from_secs(600));
    let gate = verdict(
        failing.is_empty() && fast,
        format!(
            "{}/{} games on >= 8/10 seeds, {time}{}",
            suite.len() - failing.len(),
            suite.len(),
            if failing.is_empty() { String::new() } else { format!("; failing: {}", failing.join(", ")) }
        ),
    );

    let mut wider = Vec::new();
    for shape in [vec![2, 2, 2], vec![3, 3]] {
        let games = random_suite(&shape, 5);
        let ok = games.iter().filter(|g| sandwich_passes(g, eps) >= 8).count();
        wider.push(format!("{shape:?}: {ok}/{}", games.len()));
    }
    (gate, verdict(true, format!("larger random games on >= 8/10 seeds: {}", wider.join(", "))))
}

fn run_shipped(config: &str) -> (tempfile::TempDir, PathBuf) {
    let dir = configs_dir();
    let text = std::fs::read_to_string(dir.join(config)).unwrap();
    let mut loaded = parse_config(&text, &dir, None).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    loaded.output_dir = tmp.path().to_path_buf();
    let outcome = run_experiment(&loaded).unwrap();
    assert!(outcome.record.seeds.iter().all(|s| s.ok), "{:?}", outcome.record.seeds);
    let out = outcome.output_dir.clone();
    (tmp, out)
}

fn floats(t: &Table, row: &[String], col: &str) -> f64 {
    row[t.column(col).unwrap()].parse().unwrap()
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|a, b| xs[*a].partial_cmp(&xs[*b]).unwrap());
    let mut r = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        for k in i..=j {
            r[idx[k]] = (i + j) as f64 / 2.0;
        }
        i = j + 1;
    }
    r
}

fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx) * (a - mx)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my) * (b - my)).sum();
    cov / (vx * vy).sqrt()
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

fn figure3_trend() -> Verdict {
    let start = Instant::now();
    let (_tmp, out) = run_shipped("figure3.toml");
    let t = Table::read(&out.join("sweep.csv")).unwrap();
    let mut by_eps: BTreeMap<u64, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for row in &t.rows {
        let e = floats(&t, row, "eps");
        let slot = by_eps.entry(e.to_bits()).or_default();
        slot.0.push(floats(&t, row, "gambler_reward"));
        slot.1.push(floats(&t, row, "mean_agent_regret"));
    }
    let mut grid: Vec<(f64, Vec<f64>, Vec<f64>)> =
        by_eps.into_iter().map(|(k, (g, r))| (f64::from_bits(k), g, r)).collect();
    grid.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let eps: Vec<f64> = grid.iter().map(|g| g.0).collect();
    let regret: Vec<f64> = grid.iter().map(|g| mean_se(&g.2).0).collect();
    let rho = spearman(&eps, &regret);
    let (g_lo, se_lo) = mean_se(&grid.first().unwrap().1);
    let (g_hi, se_hi) = mean_se(&grid.last().unwrap().1);
    let margin = g_lo - g_hi;
    let pooled = (se_lo * se_lo + se_hi * se_hi).sqrt();
    let (fast, time) = within(start, Duration::from_secs(1200));
    verdict(
        rho >= 0.9 && margin > 2.0 * pooled && fast,
        format!(
            "regret Spearman {rho:.3}, gambler {g_lo:.4} -> {g_hi:.4} (drop {margin:.4} vs 2 SE {:.4}), {time}",
            2.0 * pooled
        ),
    )
}

fn frozen_ablation() -> Verdict {
    let start = Instant::now();
    let (_tmp, out) = run_shipped("ablation.toml");
    let t = Table::read(&out.join("ablation.csv")).unwrap();
    let seed_col = t.column("seed").unwrap();
    let mode_col = t.column("mode").unwrap();
    let mut seeds: BTreeMap<String, (Option<Outcome>, Vec<Outcome>)> = BTreeMap::new();
    for row in &t.rows {
        let o = Outcome {
            gambler_reward: floats(&t, row, "gambler_reward"),
            mean_agent_regret: floats(&t, row, "mean_agent_regret"),
        };
        let slot = seeds.entry(row[seed_col].clone()).or_default();
        if row[mode_col] == "dynamic" {
            slot.0 = Some(o);
        } else {
            slot.1.push(o);
        }
    }
    let total = seeds.len();
    let undominated = seeds
        .values()
        .filter(|(d, frozen)| d.is_some_and(|d| !frozen.iter().any(|q| dominates(*q, d, 0.0))))
        .count();
    let (fast, time) = within(start, Duration::from_secs(1200));
    verdict(
        total == 10 && undominated >= 7 && fast,
        format!("dynamic point undominated on {undominated}/{total} seeds, {time}"),
    )
}

fn lp_monotonicity() -> Verdict {
    let start = Instant::now();
    let grid = [0.0, 0.01, 0.02, 0.05, 0.1, 0.2, 0.3, 0.5, 0.75, 1.0, 2.0];
    let shapes = [vec![2, 2], vec![2, 2, 2], vec![3, 3], vec![2, 3, 2]];
    let mut worst: f64 = f64::NEG_INFINITY;
    for i in 0..20u64 {
        let shape = &shapes[(i % 4) as usize];
        let g = random_game(2, shape.clone(), 1000 + i).unwrap();
        let ego = EgoStrategy::new(vec![0.4, 0.6]);
        let values: Vec<f64> = grid
            .iter()
            .map(|e| worst_case_value(&g, &ego, &vec![*e; shape.len()]).unwrap())
            .collect();
        for w in values.windows(2) {
            worst = worst.max(w[1] - w[0]);
        }
    }
    let (fast, time) = within(start, Duration::from_secs(60));
    verdict(worst <= 1e-7 && fast, format!("20 games, largest increase {worst:.3e}, {time}"))
}

const DETERMINISM_CONFIGS: &[(&str, &str)] = &[
    (
        "worst-cce",
        r#"
[game]
source = "prisoners-dilemma"
[algo.blackwell]
eps_tol = 0.05
"#,
    ),
    (
        "sample-pessimistic",
        r#"
[game]
source = "random"
shape = [2, 2, 2]
[algo]
eps = 0.1
[algo.lagrangian]
rounds = 30
selfplay_steps = 50
[algo.lagrangian.blackbox]
init_noise = 1.0
"#,
    ),
    (
        "train-robust",
        r#"
[game]
source = "samuelson"
[algo]
eps = 1.5
outer_steps = 500
"#,
    ),
    (
        "cross-eval",
        r#"
[game]
source = "nmatrix"
agents = 3
actions = 3
[algo]
outer_steps = 100
episodes = 2
[[algo.populations]]
name = "original"
selfplay_steps = 30
train_episodes = 2
[algo.populations.blackbox]
init_noise = 1.0
[[algo.populations]]
name = "adversarial-1"
transform = { kind = "adversarial", q = 1.0 }
selfplay_steps = 30
train_episodes = 2
[algo.populations.blackbox]
init_noise = 1.0
[[algo.regimes]]
name = "ours"
eps = 0.2
inner = { kind = "lagrangian", rounds = 10, selfplay_steps = 30, alpha_lambda = 1.0 }
"#,
    ),
    (
        "ablation-frozen-lambda",
        r#"
[game]
source = "grid"
[algo]
lambda0_grid = [0.0, 1.0, 4.0]
[algo.lagrangian]
rounds = 20
selfplay_steps = 50
"#,
    ),
    (
        "figure3-sweep",
        r#"
[game]
source = "grid"
[algo]
eps_grid = [0.0, 0.2]
[algo.lagrangian]
rounds = 20
selfplay_steps = 50
"#,
    ),
];

fn csv_files(dir: &Path, base: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
    for entry in std::fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.is_dir() {
            csv_files(&p, base, out);
        } else if p.extension().is_some_and(|e| e == "csv") {
            out.insert(p.strip_prefix(base).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
        }
    }
}

fn cli_run(kind: &str, body: &str) -> BTreeMap<PathBuf, Vec<u8>> {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("exp.toml");
    let text = format!("[experiment]\nkind = \"{kind}\"\noutput_dir = \"out\"\n{body}\n[run]\nseeds = [0, 1, 2]\n");
    std::fs::write(&cfg, text).unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_robustcce"))
        .env_remove("ROBUSTCCE_SEED")
        .arg("run")
        .arg("--config")
        .arg(&cfg)
        .output()
        .unwrap();
    assert!(status.status.success(), "{kind}: {}", String::from_utf8_lossy(&status.stderr));
    let mut files = BTreeMap::new();
    let out = tmp.path().join("out");
    csv_files(&out, &out, &mut files);
    files
}

fn determinism() -> Verdict {
    let start = Instant::now();
    let mut differing = Vec::new();
    let mut compared = 0;
    for (kind, body) in DETERMINISM_CONFIGS {
        let a = cli_run(kind, body);
        let b = cli_run(kind, body);
        compared += a.len();
        if a.is_empty() || a != b {
            differing.push(kind.to_string());
        }
    }
    verdict(
        differing.is_empty(),
        format!(
            "{} experiment kinds, {compared} CSV files byte-identical across reruns, {:.1}s{}",
            DETERMINISM_CONFIGS.len(),
            start.elapsed().as_secs_f64(),
            if differing.is_empty() { String::new() } else { format!("; differing: {}", differing.join(", ")) }
        ),
    )
}

fn report(label: &str, v: &Verdict) {
    println!("{} {label}: {}", if v.passed { "PASS" } else { "FAIL" }, v.detail);
}

fn main() -> ExitCode {
    // Let `cargo test -- --list` and name filters work without running anything.
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    if let Some(filter) = args.iter().find(|a| !a.starts_with('-')) {
        if !"acceptance".contains(filter.as_str()) {
            return ExitCode::SUCCESS;
        }
    }

    let mut all = true;
    let mut check = |label: &str, v: Verdict| {
        report(label, &v);
        all &= v.passed;
    };
    check("1 worst-case CCE matches the LP", oracle_equivalence());
    check("2 approachability distance rate", approachability_rate());
    check("3 Hedge regret bound", hedge_bound());
    check("4 Samuelson robustness flip", samuelson_flip());
    let (gate, info) = duality_sandwich();
    check("5 multiplier sampler sandwich", gate);
    println!("INFO 5 (not gating): {}", info.detail);
    check("6 slack sweep trend", figure3_trend());
    check("7 frozen multiplier ablation", frozen_ablation());
    check("8 LP monotone in slack", lp_monotonicity());
    check("9 deterministic CLI reruns", determinism());
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
