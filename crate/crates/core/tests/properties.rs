use proptest::prelude::*;

use klgame::game::{
    best_response_policy, duality_gap, kl_divergence, objective, softmax, GameConfig, JointPolicy, PayoffTable, Player,
    Policy,
};
use klgame::harness::{derive_seed, read_sweep_csv, sweep_csv, Method, SweepRow};
use klgame::solver::{fixed_point_residual, nash_oracle, selfplay_run, DEFAULT_MAX_ITERS};

fn distribution(k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..1.0, k).prop_map(|w| {
        let s: f64 = w.iter().sum();
        w.into_iter().map(|v| v / s).collect()
    })
}

/// (payoff table, config, rho) with |X| ≤ 3, |A| ≤ 4.
fn small_game() -> impl Strategy<Value = (PayoffTable<f64>, GameConfig<f64>, Vec<f64>)> {
    (1usize..=3, 2usize..=4, prop::sample::select(vec![0.5, 1.0, 2.0])).prop_flat_map(|(nx, na, eta)| {
        (
            prop::collection::vec(-1.0f64..=1.0, nx * na * na),
            distribution(nx * na),
            distribution(nx * na),
            distribution(nx),
        )
            .prop_map(move |(values, r1, r2, rho)| {
                let g = PayoffTable::new(nx, na, values).unwrap();
                let cfg = GameConfig::new(eta, Policy::from_weights(nx, na, r1).unwrap(), Policy::from_weights(nx, na, r2).unwrap()).unwrap();
                (g, cfg, rho)
            })
    })
}

fn random_joint(nx: usize, na: usize) -> impl Strategy<Value = JointPolicy<f64>> {
    (distribution(nx * na), distribution(nx * na)).prop_map(move |(a, b)| {
        JointPolicy::new(Policy::from_weights(nx, na, a).unwrap(), Policy::from_weights(nx, na, b).unwrap()).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn softmax_is_a_shift_invariant_distribution(z in prop::collection::vec(-50.0f64..50.0, 1..8), c in -100.0f64..100.0) {
        let p = softmax(&z).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let shifted: Vec<f64> = z.iter().map(|v| v + c).collect();
        for (a, b) in p.iter().zip(softmax(&shifted).unwrap()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn kl_is_nonnegative_and_zero_on_the_diagonal(p in distribution(5), q in distribution(5)) {
        prop_assert!(kl_divergence(&p, &q).unwrap() >= 0.0);
        prop_assert!(kl_divergence(&p, &p).unwrap().abs() < 1e-15);
    }

    #[test]
    fn duality_gap_is_nonnegative(((g, cfg, rho), pi) in small_game().prop_flat_map(|game| {
        let (nx, na) = (game.0.num_contexts(), game.0.num_actions());
        (Just(game), random_joint(nx, na))
    })) {
        prop_assert!(duality_gap(&g, &pi, &cfg, &rho).unwrap() >= -1e-12);
    }

    #[test]
    fn best_response_beats_any_alternative((g, cfg, rho) in small_game(), alt in distribution(4)) {
        let (nx, na) = (g.num_contexts(), g.num_actions());
        let pi = cfg.reference_pair();
        let br = best_response_policy(&g, &pi.p2, Player::One, &cfg).unwrap();
        let best = objective(&g, &pi.with(Player::One, br), &cfg, &rho).unwrap();
        let row: Vec<f64> = alt.iter().take(na).copied().collect();
        let s: f64 = row.iter().sum();
        let other = Policy::repeat_row(nx, &row.iter().map(|v| v / s).collect::<Vec<_>>()).unwrap();
        prop_assert!(objective(&g, &pi.with(Player::One, other), &cfg, &rho).unwrap() <= best + 1e-12);
    }

    #[test]
    fn oracle_output_is_a_fixed_point_with_zero_gap((g, cfg, rho) in small_game()) {
        let pi = nash_oracle(&g, &cfg, 1e-12, DEFAULT_MAX_ITERS).unwrap();
        prop_assert!(fixed_point_residual(&g, &pi, &cfg).unwrap() <= 1e-12);
        prop_assert!(duality_gap(&g, &pi, &cfg, &rho).unwrap().abs() <= 1e-10);
    }

    #[test]
    fn selfplay_is_deterministic_and_keeps_distributions((g, cfg, rho) in small_game(), t in 0usize..200) {
        let (a, _) = selfplay_run(&g, &cfg, &rho, t, None).unwrap();
        let (b, _) = selfplay_run(&g, &cfg, &rho, t, None).unwrap();
        prop_assert_eq!(&a, &b);
        for row in a.p1.rows().chain(a.p2.rows()) {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn seed_derivation_is_injective_on_small_inputs(m in any::<u64>(), a in 0u64..1000, b in 0u64..1000) {
        prop_assume!(a != b);
        prop_assert_ne!(derive_seed(m, &[a]), derive_seed(m, &[b]));
    }

    #[test]
    fn sweep_csv_round_trips(gaps in prop::collection::vec(1e-9f64..1.0, 1..10)) {
        let rows: Vec<SweepRow> = gaps.iter().enumerate().map(|(i, &gap)| SweepRow {
            method: Method::Minimax, n: 64, t: None, seed: i as u64, seed_index: i,
            dual_gap: gap, payoff_mse: gap / 3.0, c_uni: 1.5, wall_time_ms: 0, v_t: None, error: None,
        }).collect();
        let text = sweep_csv(&rows);
        let back = read_sweep_csv(&text).unwrap();
        prop_assert_eq!(back, rows);
    }
}
