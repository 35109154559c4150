//! The game arithmetic instantiated at `f32`, compared with `f64`.

use klgame::game::{best_response, duality_gap, Player};
use klgame::harness::random_game;
use klgame::solver::{nash_oracle, selfplay_run, DEFAULT_MAX_ITERS};
use klgame::{GameConfig32, GameConfig64, JointPolicy32, PayoffTable32, Policy32};

#[test]
fn best_response_agrees_with_f64() {
    let game = random_game(3, 4, 11).unwrap();
    let g32: PayoffTable32 = game.payoff.convert();
    let cfg64 = GameConfig64::uniform(3, 4, 2.0).unwrap();
    let cfg32: GameConfig32 = cfg64.convert();
    let opp = Policy32::uniform(3, 4);
    for x in 0..3 {
        let a = best_response(&g32, &opp, Player::Two, &cfg32, x).unwrap();
        let b = best_response(&game.payoff, &opp.convert(), Player::Two, &cfg64, x).unwrap();
        for (p, q) in a.iter().zip(&b) {
            assert!((*p as f64 - q).abs() < 1e-6);
        }
    }
}

#[test]
fn selfplay_in_f32_tracks_the_f64_equilibrium() {
    let game = random_game(2, 3, 3).unwrap();
    let cfg64 = GameConfig64::uniform(2, 3, 1.0).unwrap();
    let nash = nash_oracle(&game.payoff, &cfg64, 1e-12, DEFAULT_MAX_ITERS).unwrap();
    let rho32: Vec<f32> = game.rho.iter().map(|&v| v as f32).collect();
    let (pi, _): (JointPolicy32, _) = selfplay_run(&game.payoff.convert(), &cfg64.convert(), &rho32, 5_000, None).unwrap();
    let pi64 = pi.convert::<f64>();
    for x in 0..2 {
        assert!(pi64.l1_at(&nash, x) < 1e-3);
    }
    assert!(duality_gap(&game.payoff, &pi64, &cfg64, &game.rho).unwrap() < 1e-5);
}

#[test]
fn oracle_reaches_single_precision_tolerance() {
    let game = random_game(2, 3, 8).unwrap();
    let g32: PayoffTable32 = game.payoff.convert();
    let cfg32 = GameConfig32::uniform(2, 3, 1.0).unwrap();
    let pi = nash_oracle(&g32, &cfg32, 1e-5, DEFAULT_MAX_ITERS).unwrap();
    let rho32: Vec<f32> = game.rho.iter().map(|&v| v as f32).collect();
    assert!(duality_gap(&g32, &pi, &cfg32, &rho32).unwrap().abs() < 1e-4);
}
