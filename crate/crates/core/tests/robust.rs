use robustcce_core::envs::{random_game, samuelson, RewardTransform};
use robustcce_core::oracle::worst_case_value;
use robustcce_core::robust::{
    evaluate_cross, inner_value, train_robust, InnerSampler, Population, RobustTrainerConfig,
};
use robustcce_core::{DenseGame, EgoStrategy, Game};

fn lp_trainer(eps: f64, steps: usize) -> RobustTrainerConfig {
    RobustTrainerConfig {
        inner: InnerSampler::LpOracle,
        eps,
        outer_steps: steps,
        ..RobustTrainerConfig::default()
    }
}

/// Worst case of each pure ego action, straight from the LP.
fn pure_values<G: Game>(g: &G, eps: f64) -> Vec<f64> {
    let n = g.num_agents();
    (0..g.ego_actions())
        .map(|a| worst_case_value(g, &EgoStrategy::pure(a, g.ego_actions()), &vec![eps; n]).unwrap())
        .collect()
}

#[test]
fn samuelson_worst_case_table() {
    let g = samuelson();
    let v = pure_values(&g, 0.0);
    assert!((v[0] - 100.0).abs() < 1e-6 && (v[1] - 99.0).abs() < 1e-6);
    let v = pure_values(&g, 1.5);
    assert!((v[0] - 50.0).abs() < 1e-6 && (v[1] - 99.0).abs() < 1e-6);
}

#[test]
fn samuelson_training_follows_the_slack() {
    let g = samuelson();
    let tight = train_robust(&g, &lp_trainer(0.0, 5000), 0).unwrap();
    assert_eq!(tight.ego.argmax(), 0, "{:?}", tight.ego);
    let loose = train_robust(&g, &lp_trainer(1.5, 5000), 0).unwrap();
    assert_eq!(loose.ego.argmax(), 1, "{:?}", loose.ego);
    assert!(loose.ego.dist[1] > 0.9);
}

#[test]
fn trainer_finds_the_max_min_action() {
    let mut checked = 0;
    for seed in 0..12 {
        let g = random_game(3, vec![2, 2], seed).unwrap();
        let v = pure_values(&g, 0.1);
        let mut sorted = v.clone();
        sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
        if sorted[0] - sorted[1] < 0.2 {
            continue;
        }
        let best = v.iter().enumerate().max_by(|a, b| a.1.partial_cmp(b.1).unwrap()).unwrap().0;
        let res = train_robust(&g, &lp_trainer(0.1, 4000), seed).unwrap();
        assert_eq!(res.ego.argmax(), best, "seed {seed}: values {v:?} ego {:?}", res.ego);
        for (a, cached) in res.action_values.iter().enumerate() {
            if let Some(c) = cached {
                assert!((c - v[a]).abs() < 1e-9);
            }
        }
        checked += 1;
    }
    assert!(checked >= 3, "only {checked} games had a clear winner");
}

fn constant(c: f64, ego_actions: usize) -> DenseGame {
    DenseGame::from_fn(ego_actions, vec![2, 2], None, |_, _, _| c).unwrap()
}

#[test]
fn constant_game_trace_is_flat() {
    let g = constant(0.3, 3);
    let res = train_robust(&g, &lp_trainer(0.0, 200), 1).unwrap();
    assert!(res.value_trace.iter().all(|v| (v - 0.3).abs() < 1e-9));
    assert!(res.failures.is_empty());
    for inner in [
        InnerSampler::LpOracle,
        InnerSampler::Population(Population {
            selfplay_steps: 20,
            train_episodes: 1,
            ..Population::default()
        }),
    ] {
        assert!((inner_value(&g, 2, &inner, 0.0, 4).unwrap() - 0.3).abs() < 1e-9);
    }
}

#[test]
fn cross_evaluation_of_a_constant_game() {
    let g = constant(-0.7, 2);
    let pops = [
        Population {
            selfplay_steps: 30,
            ..Population::default()
        },
        Population {
            name: "adversarial-1".into(),
            transform: RewardTransform::Adversarial { q: 1.0 },
            selfplay_steps: 30,
            ..Population::default()
        },
    ];
    let egos = [EgoStrategy::uniform(2), EgoStrategy::pure(1, 2)];
    let table = evaluate_cross(&g, &egos, &pops, 4, 0).unwrap();
    for row in &table.cells {
        for cell in row {
            assert!((cell.mean + 0.7).abs() < 1e-9);
            assert!(cell.stderr.abs() < 1e-12);
        }
    }
}

#[test]
fn training_is_seed_deterministic() {
    let g = random_game(3, vec![2, 2], 5).unwrap();
    let cfg = lp_trainer(0.05, 300);
    assert_eq!(train_robust(&g, &cfg, 7).unwrap(), train_robust(&g, &cfg, 7).unwrap());
}
