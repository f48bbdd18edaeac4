use proptest::prelude::*;
use robustcce_core::envs::{matching_pennies, prisoners_dilemma, random_game};
use robustcce_core::regret::{expected_utility, is_epsilon_cce, regret};
use robustcce_core::{ActionSpace, DenseGame, EgoStrategy, Game, PlayMixture, ProductStrategy};

/// Enumerates every profile and evaluates the payoff directly.
fn brute_utility(g: &DenseGame, agent: usize, ego: &[f64], mix: &PlayMixture) -> f64 {
    let counts = g.action_counts().to_vec();
    let space = ActionSpace::new(&counts).unwrap();
    let mut total = 0.0;
    for (w, comp) in &mix.components {
        for idx in 0..space.size() {
            let joint = space.decode_vec(idx);
            let p: f64 = joint.iter().enumerate().map(|(k, &a)| comp.agent(k)[a]).product();
            for (a0, q) in ego.iter().enumerate() {
                total += w * q * p * g.payoff(agent, a0, &joint);
            }
        }
    }
    total
}

fn brute_regret(g: &DenseGame, agent: usize, ego: &[f64], mix: &PlayMixture) -> f64 {
    let k = agent - 1;
    let base = brute_utility(g, agent, ego, mix);
    (0..g.action_counts()[k])
        .map(|a| {
            let dev = PlayMixture::new(
                mix.components
                    .iter()
                    .map(|(w, c)| {
                        let mut per = c.per_agent.clone();
                        per[k] = (0..per[k].len()).map(|b| if a == b { 1.0 } else { 0.0 }).collect();
                        (*w, ProductStrategy::new(per))
                    })
                    .collect(),
            );
            brute_utility(g, agent, ego, &dev) - base
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

fn simplex(m: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, m).prop_map(|v| {
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect()
    })
}

fn mixture(counts: Vec<usize>, comps: usize) -> impl Strategy<Value = PlayMixture> {
    let product = counts.iter().map(|&m| simplex(m)).collect::<Vec<_>>();
    (prop::collection::vec(product, comps), simplex(comps)).prop_map(|(ps, ws)| {
        PlayMixture::new(ws.into_iter().zip(ps.into_iter().map(ProductStrategy::new)).collect())
    })
}

proptest! {
    #[test]
    fn encode_decode_round_trip(counts in prop::collection::vec(1usize..5, 1..5), pick in any::<u64>()) {
        let space = ActionSpace::new(&counts).unwrap();
        let idx = (pick % space.size() as u64) as usize;
        let joint = space.decode_vec(idx);
        prop_assert_eq!(space.encode(&joint), idx);
        for (a, m) in joint.iter().zip(&counts) {
            prop_assert!(a < m);
        }
    }

    #[test]
    fn utilities_and_regrets_match_enumeration(
        seed in 0u64..1000,
        ego in simplex(2),
        mix in mixture(vec![2, 3, 2], 3),
    ) {
        let g = random_game(2, vec![2, 3, 2], seed).unwrap();
        let e = EgoStrategy::new(ego.clone());
        let rep = regret(&g, &e, &mix).unwrap();
        for agent in 0..=3 {
            let lib = expected_utility(&g, agent, &e, &mix).unwrap();
            prop_assert!((lib - brute_utility(&g, agent, &ego, &mix)).abs() < 1e-9);
        }
        for agent in 1..=3 {
            let want = brute_regret(&g, agent, &ego, &mix);
            prop_assert!((rep.per_agent_regret[agent - 1] - want).abs() < 1e-9);
        }
    }

    #[test]
    fn product_regret_is_nonnegative(seed in 0u64..1000, mix in mixture(vec![3, 2], 1)) {
        let g = random_game(1, vec![3, 2], seed).unwrap();
        let rep = regret(&g, &EgoStrategy::uniform(1), &mix).unwrap();
        prop_assert!(rep.per_agent_regret.iter().all(|r| *r >= -1e-12));
    }

    #[test]
    fn membership_is_monotone_in_slack(seed in 0u64..1000, mix in mixture(vec![2, 2], 2), e in 0.0f64..1.0, d in 0.0f64..1.0) {
        let g = random_game(1, vec![2, 2], seed).unwrap();
        let ego = EgoStrategy::uniform(1);
        if is_epsilon_cce(&g, &ego, &mix, &[e, e], 1e-9).unwrap() {
            prop_assert!(is_epsilon_cce(&g, &ego, &mix, &[e + d, e + d], 1e-9).unwrap());
        }
    }
}

#[test]
fn prisoners_dilemma_regrets() {
    let g = prisoners_dilemma();
    let ego = EgoStrategy::uniform(1);
    let cooperate = PlayMixture::single(ProductStrategy::pure(&[0, 0], &[2, 2]));
    let defect = PlayMixture::single(ProductStrategy::pure(&[1, 1], &[2, 2]));
    let r = regret(&g, &ego, &cooperate).unwrap();
    assert!(r.per_agent_regret.iter().all(|v| (v - 1.0).abs() < 1e-12));
    let r = regret(&g, &ego, &defect).unwrap();
    assert!(r.per_agent_regret.iter().all(|v| v.abs() < 1e-12));
    assert!((expected_utility(&g, 0, &ego, &defect).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn pennies_uniform_has_zero_regret() {
    let g = matching_pennies();
    let ego = EgoStrategy::uniform(1);
    let mix = PlayMixture::single(ProductStrategy::uniform(&[2, 2]));
    assert!(regret(&g, &ego, &mix).unwrap().max_regret().abs() < 1e-12);
    assert!(expected_utility(&g, 1, &ego, &mix).unwrap().abs() < 1e-12);
}

#[test]
fn malformed_games_are_rejected() {
    assert!(DenseGame::new(1, vec![2, 2], vec![0.0; 11], None).is_err());
    assert!(DenseGame::new(1, vec![2], vec![0.0, 1.0, f64::NAN, 0.0], None).is_err());
    assert!(DenseGame::new(1, vec![2], vec![0.0, 2.0, 0.0, 0.0], Some((0.0, 1.0))).is_err());
}
