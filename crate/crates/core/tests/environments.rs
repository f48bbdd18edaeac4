use proptest::prelude::*;
use robustcce_core::envs::{
    apply_transform, gini, make_grid_bimatrix, make_nmatrix, step_grid, swf, transform_game, welfare, ColMove,
    RewardTransform, RowMove, GRID,
};
use robustcce_core::oracle::worst_case_value;
use robustcce_core::{EgoStrategy, Game};

#[test]
fn nmatrix_shape_range_and_determinism() {
    let g = make_nmatrix(4, 7, 11).unwrap();
    assert_eq!(g.num_agents(), 3);
    assert_eq!(g.ego_actions(), 7);
    assert_eq!(g.action_counts(), &[7, 7, 7]);
    assert!(g.payoffs().iter().all(|p| (-1.0..=1.0).contains(p)));
    assert_eq!(g.payoffs(), make_nmatrix(4, 7, 11).unwrap().payoffs());
    assert_ne!(g.payoffs(), make_nmatrix(4, 7, 12).unwrap().payoffs());
}

#[test]
fn grid_games_have_the_dilemma_structure() {
    for seed in 0..20 {
        let g = make_grid_bimatrix(seed).unwrap();
        let (a, b) = g.nash_cell;
        // Unique pure Nash cell, found by brute force.
        let mut nash = Vec::new();
        for i in 0..GRID {
            for j in 0..GRID {
                if (0..GRID).all(|k| g.r1[k][j] <= g.r1[i][j]) && (0..GRID).all(|k| g.r2[i][k] <= g.r2[i][j]) {
                    nash.push((i, j));
                }
            }
        }
        assert_eq!(nash, vec![(a, b)], "seed {seed}");
        let top = g.rg.iter().flatten().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(g.rg[a][b], top);
        let best_sum = (0..GRID)
            .flat_map(|i| (0..GRID).map(move |j| (i, j)))
            .map(|(i, j)| g.r1[i][j] + g.r2[i][j])
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(best_sum > g.r1[a][b] + g.r2[a][b]);
    }
}

#[test]
fn tight_slack_on_the_grid_stage_game_pays_the_gambler_at_nash() {
    let g = make_grid_bimatrix(3).unwrap();
    let stage = g.stage_game().unwrap();
    let (a, b) = g.nash_cell;
    let v = worst_case_value(&stage, &EgoStrategy::uniform(1), &[0.0, 0.0]).unwrap();
    assert!((v - g.rg[a][b]).abs() < 1e-7, "{v} vs {}", g.rg[a][b]);
}

#[test]
fn torus_moves() {
    assert_eq!(step_grid((0, 0), RowMove::Up, ColMove::Left), (3, 3));
    assert_eq!(step_grid((2, 1), RowMove::Down, ColMove::Right), (3, 2));
    for i in 0..GRID {
        for j in 0..GRID {
            let s = step_grid((i, j), RowMove::Down, ColMove::Right);
            assert_eq!(step_grid(s, RowMove::Up, ColMove::Left), (i, j));
        }
    }
}

#[test]
fn transforms() {
    let adv = RewardTransform::Adversarial { q: 0.25 };
    assert_eq!(apply_transform(&adv, 1.0, 2.0).unwrap(), 0.5);
    let ra = RewardTransform::RiskAverse { eta: 0.5 };
    assert!((apply_transform(&ra, 4.0, 0.0).unwrap() - 2.0).abs() < 1e-12);
    assert!(apply_transform(&ra, 1.0, 0.0).unwrap().abs() < 1e-12);
    assert!(apply_transform(&ra, 0.0, 0.0).is_err());
    assert!(RewardTransform::RiskAverse { eta: 1.0 }.validate().is_err());
    assert!(RewardTransform::Adversarial { q: -0.1 }.validate().is_err());
}

#[test]
fn adversarial_transform_leaves_the_ego_alone() {
    let g = make_nmatrix(3, 3, 5).unwrap();
    let t = transform_game(&g, &RewardTransform::Adversarial { q: 1.0 }).unwrap();
    let mut joint = [0usize; 2];
    for a0 in 0..3 {
        for x in 0..9 {
            joint[0] = x / 3;
            joint[1] = x % 3;
            assert_eq!(t.payoff(0, a0, &joint), g.payoff(0, a0, &joint));
            for i in 1..3 {
                let want = g.payoff(i, a0, &joint) - g.payoff(0, a0, &joint);
                assert!((t.payoff(i, a0, &joint) - want).abs() < 1e-12);
            }
        }
    }
}

/// Mean-absolute-difference gini, straight from the definition.
fn gini_oracle(z: &[f64]) -> f64 {
    let n = z.len() as f64;
    let num: f64 = z.iter().flat_map(|a| z.iter().map(move |b| (a - b).abs())).sum();
    num / (2.0 * n * z.iter().sum::<f64>())
}

#[test]
fn welfare_examples() {
    assert_eq!(swf(&[1.0; 4]).unwrap(), 4.0);
    assert!(swf(&[4.0, 0.0, 0.0, 0.0]).unwrap().abs() < 1e-12);
    let w = welfare(&[2.0, 2.0, 0.0, 0.0]).unwrap();
    assert!((w.gini - 0.5).abs() < 1e-12);
    assert!((w.equality - 1.0 / 3.0).abs() < 1e-12);
    assert!((w.swf - 4.0 / 3.0).abs() < 1e-12);
    assert!(welfare(&[0.0, 0.0]).unwrap().degenerate);
    assert!(swf(&[1.0, -1.0]).is_err());
}

proptest! {
    #[test]
    fn gini_matches_definition_and_stays_in_range(z in prop::collection::vec(0.0f64..10.0, 2..8)) {
        prop_assume!(z.iter().sum::<f64>() > 1e-6);
        let n = z.len() as f64;
        let g = gini(&z).unwrap().unwrap();
        prop_assert!((g - gini_oracle(&z)).abs() < 1e-9);
        prop_assert!(g >= -1e-12 && g <= (n - 1.0) / n + 1e-12);
        let w = welfare(&z).unwrap();
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&w.equality));
        prop_assert!(w.swf >= -1e-9);
    }
}
