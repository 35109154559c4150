use klgame::harness::{sweep_n, sweep_t, Experiment, ExperimentConfig, SweepRow};

fn key(r: &SweepRow) -> (String, usize, Option<usize>, u64) {
    (r.method.as_str().to_string(), r.n, r.t, r.seed)
}

#[test]
fn cells_do_not_depend_on_the_rest_of_the_grid() {
    let full = ExperimentConfig { n_grid: vec![128, 256, 512, 1024], seeds: (0..6).collect(), ..Default::default() };
    let part = ExperimentConfig { n_grid: vec![256, 1024], seeds: vec![5, 2], ..full.clone() };
    let full_rows = sweep_n(&Experiment::new(&full).unwrap());
    let part_rows = sweep_n(&Experiment::new(&part).unwrap());
    assert_eq!(part_rows.len(), 2 * 2 * 2);
    for row in &part_rows {
        let twin = full_rows.iter().find(|r| key(r) == key(row)).unwrap();
        assert_eq!((twin.dual_gap, twin.payoff_mse, twin.c_uni), (row.dual_gap, row.payoff_mse, row.c_uni));
    }
}

#[test]
fn iteration_sweep_rows_are_independent_of_the_t_grid() {
    let base = ExperimentConfig { t_grid: vec![1, 4, 16, 64], seeds: vec![0, 1, 2], t_sweep_n: 512, ..Default::default() };
    let thin = ExperimentConfig { t_grid: vec![16], ..base.clone() };
    let a = sweep_t(&Experiment::new(&base).unwrap());
    let b = sweep_t(&Experiment::new(&thin).unwrap());
    for row in &b {
        let twin = a.iter().find(|r| key(r) == key(row)).unwrap();
        assert_eq!((twin.dual_gap, twin.v_t), (row.dual_gap, row.v_t));
    }
}

#[test]
fn skewed_behavior_raises_concentrability() {
    let uniform = Experiment::new(&ExperimentConfig::default()).unwrap();
    let skewed = Experiment::new(&ExperimentConfig {
        behavior: klgame::harness::BehaviorSpec::Skewed,
        ..Default::default()
    })
    .unwrap();
    assert!(uniform.c_uni.is_finite() && uniform.c_uni >= 1.0);
    assert!(skewed.c_uni > 10.0 * uniform.c_uni, "{} vs {}", skewed.c_uni, uniform.c_uni);
}
