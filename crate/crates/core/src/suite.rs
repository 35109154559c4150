//! The verification suite run by `klgame verify`: every identity and bound
//! checked on random desk-scale instances, plus the two rate sweeps.
//!
//! Each instance draws from its own derived seed, so instances run in
//! parallel and aggregate in index order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::analysis::{
    br_suboptimality_residuals, check_final_iterate_distance, check_insample_bound, check_opt_convergence,
    fast_rate_envelope, frequency_report, gap_reports, generalization_slack, logit_bound_slack, stability_reports,
    BoundReport, ReportBuilder,
};
use crate::error::Result;
use crate::estimation::{design_sq_distance, least_squares_fit, population_sq_distance, sample_dataset};
use crate::game::{duality_gap, GameConfig, GameInstance, JointPolicy, PayoffTable};
use crate::harness::{
    build_function_class, derive_seed, fit_loglog_slope, medians, random_game, random_game_with, random_policy, sweep_n,
    sweep_t, tag, Column, Experiment, ExperimentConfig, Method, SweepRow,
};
use crate::solver::{fixed_point_residual, nash_oracle, selfplay_run, DEFAULT_MAX_ITERS, EMPIRICAL_TOL, TRUTH_TOL};

const ETAS: [f64; 3] = [0.5, 1.0, 2.0];

/// Slope window for the least-squares pipeline.
pub const MAIN_SLOPE: (f64, f64) = (-1.3, -0.7);
pub const MAIN_MIN_R2: f64 = 0.9;
/// Slope window for the pessimistic baseline.
pub const BASELINE_SLOPE: (f64, f64) = (-0.75, -0.3);

fn instance_rng(cfg: &ExperimentConfig, suite: &str, i: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(cfg.master_seed, &[tag(suite), i as u64]))
}

/// A random game with |X| ≤ 4, |A| ≤ 5, η cycling through {0.5, 1, 2} and
/// Dirichlet reference policies.
fn random_instance(rng: &mut ChaCha8Rng, i: usize) -> Result<(GameInstance<f64>, GameConfig<f64>)> {
    let nx = rng.random_range(1..=4);
    let na = rng.random_range(2..=5);
    let game = random_game_with(rng, nx, na);
    let cfg = GameConfig::new(ETAS[i % ETAS.len()], random_policy(rng, nx, na), random_policy(rng, nx, na))?;
    Ok((game, cfg))
}

fn perturbed<R: Rng>(rng: &mut R, g: &PayoffTable<f64>, scale: f64) -> PayoffTable<f64> {
    g.map_clipped(|_, _, _, v| v + scale * rng.random_range(-1.0..=1.0))
}

fn collect<T: Send>(count: usize, f: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    (0..count).into_par_iter().map(f).collect()
}

/// Best-response suboptimality identities, the KL forms of both one-sided
/// gaps, and the gaps' logit-distance bounds on random instances.
pub fn identity_suite(cfg: &ExperimentConfig) -> Result<Vec<BoundReport>> {
    let per_instance = collect(cfg.verify.identity_instances, |i| {
        let mut rng = instance_rng(cfg, "identity", i);
        let (game, gcfg) = random_instance(&mut rng, i)?;
        let (g, rho) = (&game.payoff, &game.rho[..]);
        let (nx, na) = (g.num_contexts(), g.num_actions());
        let pi = JointPolicy::new(random_policy(&mut rng, nx, na), random_policy(&mut rng, nx, na))?;
        let mut br = ReportBuilder::new("br_suboptimality_identity", 1e-9);
        for (lhs, rhs) in br_suboptimality_residuals(g, &pi, &gcfg, rho)? {
            br.equal(None, lhs, rhs);
        }
        br.next_instance();
        let scale = rng.random_range(0.01..0.5);
        let g_hat = perturbed(&mut rng, g, scale);
        let nash = nash_oracle(g, &gcfg, TRUTH_TOL, DEFAULT_MAX_ITERS)?;
        let pi_hat = nash_oracle(&g_hat, &gcfg, TRUTH_TOL, DEFAULT_MAX_ITERS)?;
        let [ids, bounds] = gap_reports(g, &gcfg, rho, &nash, &pi_hat, Some(&g_hat), TRUTH_TOL)?;
        Ok([br.finish(), ids, bounds])
    })?;
    Ok(transpose(per_instance))
}

fn transpose<const K: usize>(per_instance: Vec<[BoundReport; K]>) -> Vec<BoundReport> {
    let mut columns: Vec<Vec<BoundReport>> = (0..K).map(|_| Vec::with_capacity(per_instance.len())).collect();
    for reports in per_instance {
        for (col, r) in columns.iter_mut().zip(reports) {
            col.push(r);
        }
    }
    columns
        .into_iter()
        .filter(|c| !c.is_empty())
        .map(|c| {
            let name = c[0].name.clone();
            BoundReport::combine(name, c)
        })
        .collect()
}

/// KL(softmax z ‖ softmax z′) ≤ ½‖z − z′‖∞² on random logit pairs with
/// entries in [−5, 5] and 2 to 8 actions.
pub fn logit_bound_suite(cfg: &ExperimentConfig) -> Result<Vec<BoundReport>> {
    let mut rng = instance_rng(cfg, "logit", 0);
    let mut report = ReportBuilder::new("logit_kl_bound", 0.0);
    for _ in 0..cfg.verify.logit_pairs {
        let len = rng.random_range(2..=8);
        let z: Vec<f64> = (0..len).map(|_| rng.random_range(-5.0..=5.0)).collect();
        let z2: Vec<f64> = (0..len).map(|_| rng.random_range(-5.0..=5.0)).collect();
        let (kl, bound) = logit_bound_slack(&z, &z2)?;
        report.at_most(None, kl, bound);
        report.next_instance();
    }
    Ok(vec![report.finish()])
}

/// Per-context and averaged equilibrium stability on random (g⋆, ĝ) pairs,
/// both equilibria at tolerance 1e-12.
pub fn stability_suite(cfg: &ExperimentConfig) -> Result<Vec<BoundReport>> {
    let per_instance = collect(cfg.verify.stability_pairs, |i| {
        let mut rng = instance_rng(cfg, "stability", i);
        let (game, gcfg) = random_instance(&mut rng, i)?;
        let scale = rng.random_range(0.01..0.5);
        let g_hat = perturbed(&mut rng, &game.payoff, scale);
        let nash = nash_oracle(&game.payoff, &gcfg, TRUTH_TOL, DEFAULT_MAX_ITERS)?;
        let nash_hat = nash_oracle(&g_hat, &gcfg, TRUTH_TOL, DEFAULT_MAX_ITERS)?;
        stability_reports(&game.payoff, &g_hat, gcfg.eta, &game.rho, &nash, &nash_hat, TRUTH_TOL)
    })?;
    Ok(transpose(per_instance))
}

/// Self-play anchor divergence V_t ≤ 16η²/(t+1) at every t, and the final
/// iterate's distance to the equilibrium, on random 3-context, 4-action
/// games.
pub fn convergence_suite(cfg: &ExperimentConfig) -> Result<Vec<BoundReport>> {
    let iterations = cfg.verify.convergence_iterations;
    let per_instance = collect(cfg.verify.convergence_games, |i| {
        let mut rng = instance_rng(cfg, "convergence", i);
        let game = random_game_with(&mut rng, 3, 4);
        let eta = ETAS[i % ETAS.len()];
        let gcfg = GameConfig::new(eta, random_policy(&mut rng, 3, 4), random_policy(&mut rng, 3, 4))?;
        let anchor = nash_oracle(&game.payoff, &gcfg, TRUTH_TOL, DEFAULT_MAX_ITERS)?;
        let (last, trace) = selfplay_run(&game.payoff, &gcfg, &game.rho, iterations, Some(&anchor))?;
        Ok([
            check_opt_convergence(&trace, eta)?,
            check_final_iterate_distance(&anchor, &last, &game.rho, eta, iterations),
        ])
    })?;
    Ok(transpose(per_instance))
}

/// Monte-Carlo frequency tests of the least-squares concentration bounds:
/// the in-sample error, the pairwise population-versus-design inequality,
/// and the population error envelope.
pub fn concentration_suite(cfg: &ExperimentConfig) -> Result<Vec<BoundReport>> {
    let v = &cfg.verify;
    let master = cfg.master_seed;
    let game = random_game(cfg.num_contexts, cfg.num_actions, derive_seed(master, &[tag("concentration_game")]))?;
    let cls = build_function_class(
        &game.payoff,
        v.concentration_class_size,
        cfg.perturbation_scale,
        cfg.perturbation_decay,
        derive_seed(master, &[tag("concentration_class")]),
    )?;
    let gcfg = GameConfig::uniform(cfg.num_contexts, cfg.num_actions, cfg.eta)?;
    let behavior = crate::harness::behavior_policy(&cfg.behavior, &gcfg)?;
    let members = cls.members();
    let population: Vec<Vec<f64>> = members
        .iter()
        .map(|a| members.iter().map(|b| population_sq_distance(a, b, &behavior, &game.rho)).collect())
        .collect();
    let n = v.concentration_n;
    let trials = collect(v.concentration_trials, |i| {
        let seed = derive_seed(master, &[tag("concentration"), i as u64]);
        let data = sample_dataset(&game, &behavior, n, cfg.noise_sigma, seed)?;
        let fit = least_squares_fit(&cls, &data, Some(&game.payoff))?;
        let design: Vec<Vec<f64>> =
            members.iter().map(|a| members.iter().map(|b| design_sq_distance(a, b, &data)).collect()).collect();
        let pairs_slack = generalization_slack(&population, &design, n, cls.len(), cfg.delta);
        let mse = population[fit.chosen_index][0];
        Ok((fit.residual_vs_truth_sse.unwrap_or(0.0), pairs_slack, mse))
    })?;
    let insample: Vec<f64> = trials.iter().map(|t| t.0).collect();
    let pair_flags: Vec<bool> = trials.iter().map(|t| t.1 > 0.0).collect();
    let envelope = fast_rate_envelope(n, cls.len(), cfg.delta);
    let mse_flags: Vec<bool> = trials.iter().map(|t| t.2 > envelope).collect();
    Ok(vec![
        check_insample_bound(&insample, cls.len(), cfg.delta)?,
        frequency_report("generalization_pairs", &pair_flags, cfg.delta),
        frequency_report("payoff_error_envelope", &mse_flags, cfg.delta),
    ])
}

/// Residual and duality gap of the equilibrium oracle on random games.
pub fn oracle_suite(cfg: &ExperimentConfig) -> Result<Vec<BoundReport>> {
    let per_instance = collect(cfg.verify.oracle_games, |i| {
        let mut rng = instance_rng(cfg, "oracle", i);
        let (game, gcfg) = random_instance(&mut rng, i)?;
        let mut residual = ReportBuilder::new("oracle_residual", 0.0);
        for tol in [EMPIRICAL_TOL, TRUTH_TOL] {
            let pi = nash_oracle(&game.payoff, &gcfg, tol, DEFAULT_MAX_ITERS)?;
            residual.at_most(None, fixed_point_residual(&game.payoff, &pi, &gcfg)?, tol);
        }
        residual.next_instance();
        let pi = nash_oracle(&game.payoff, &gcfg, TRUTH_TOL, DEFAULT_MAX_ITERS)?;
        let mut gap = ReportBuilder::new("oracle_duality_gap", 1e-8);
        gap.at_most(None, duality_gap(&game.payoff, &pi, &gcfg, &game.rho)?, 0.0);
        gap.next_instance();
        Ok([residual.finish(), gap.finish()])
    })?;
    Ok(transpose(per_instance))
}

fn failed_cells(rows: &[SweepRow], name: &str) -> BoundReport {
    let mut r = ReportBuilder::new(name, 0.0);
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    r.at_most(None, failed as f64, 0.0);
    r.next_instance();
    let mut report = r.finish();
    report.instances_checked = rows.len();
    report
}

fn slope_reports(
    rows: &[SweepRow],
    method: Method,
    column: Column,
    prefix: &str,
    window: (f64, f64),
    min_r2: Option<f64>,
) -> Vec<BoundReport> {
    let mut slope = ReportBuilder::new(format!("{prefix}_slope"), 0.0);
    let mut r2 = ReportBuilder::new(format!("{prefix}_r2"), 0.0);
    match fit_loglog_slope(rows, method, column) {
        Ok(fit) => {
            slope.within(None, fit.slope, window.0, window.1);
            if let Some(min) = min_r2 {
                r2.at_most(None, min, fit.r2);
            }
        }
        Err(_) => {
            slope.within(None, f64::NAN, window.0, window.1);
            r2.at_most(None, f64::NAN, 0.0);
        }
    }
    slope.next_instance();
    r2.next_instance();
    let mut out = vec![slope.finish()];
    if min_r2.is_some() {
        out.push(r2.finish());
    }
    out
}

/// Reports on a sample-size sweep: main-method slope, fit quality and
/// envelope, the slope of the payoff error, then the baseline's slope and
/// its gap relative to the main method at every n.
pub fn sample_size_reports(exp: &Experiment, rows: &[SweepRow]) -> Vec<BoundReport> {
    let mut reports = vec![failed_cells(rows, "sample_sweep_failed_cells")];
    reports.extend(slope_reports(rows, Method::Minimax, Column::DualGap, "fast_rate", MAIN_SLOPE, Some(MAIN_MIN_R2)));
    reports.extend(slope_reports(rows, Method::Minimax, Column::PayoffMse, "payoff_mse", MAIN_SLOPE, None));
    let main = medians(rows, Method::Minimax, Column::DualGap);
    let mut envelope = ReportBuilder::new("fast_rate_envelope", 0.0);
    for &(n, gap) in &main {
        envelope.at_most(None, gap, exp.sample_envelope(n));
        envelope.next_instance();
    }
    reports.push(envelope.finish());
    let base = medians(rows, Method::Baseline, Column::DualGap);
    if !base.is_empty() {
        reports.extend(slope_reports(rows, Method::Baseline, Column::DualGap, "baseline", BASELINE_SLOPE, None));
        let mut dominance = ReportBuilder::new("baseline_dominance", 0.0);
        for (&(_, m), &(_, b)) in main.iter().zip(&base) {
            dominance.at_most(None, m, b);
            dominance.next_instance();
        }
        reports.push(dominance.finish());
    }
    reports
}

/// Relative rebound allowed between consecutive medians of the decreasing
/// phase; medians are over a finite number of seeds.
const REBOUND: f64 = 1.1;

/// Reports on an iteration sweep: envelope, decrease, plateau at the exact
/// equilibrium's gap once T ≥ n, and the anchor-divergence envelope of every
/// row.
pub fn iteration_reports(exp: &Experiment, rows: &[SweepRow]) -> Vec<BoundReport> {
    let n = exp.config.t_sweep_n;
    let eta = exp.config.eta;
    let mut reports = vec![failed_cells(rows, "iteration_sweep_failed_cells")];
    let meds = medians(rows, Method::SelfPlay, Column::DualGap);
    let floor = medians(rows, Method::Minimax, Column::DualGap).first().map(|m| m.1).unwrap_or(f64::NAN);

    let mut envelope = ReportBuilder::new("selfplay_envelope", 0.0);
    for &(t, gap) in meds.iter().filter(|m| m.0 >= 1) {
        envelope.at_most(None, gap, exp.selfplay_envelope(n, t));
        envelope.next_instance();
    }
    reports.push(envelope.finish());

    let mut decrease = ReportBuilder::new("selfplay_decrease", 0.0);
    for w in meds.windows(2) {
        decrease.at_most(None, w[1].1, REBOUND * w[0].1);
        decrease.next_instance();
    }
    reports.push(decrease.finish());

    let mut plateau = ReportBuilder::new("selfplay_plateau", 0.0);
    for &(_, gap) in meds.iter().filter(|m| m.0 >= n) {
        plateau.within(None, (gap / floor).log2(), -1.0, 1.0);
        plateau.next_instance();
    }
    reports.push(plateau.finish());

    let mut vt = ReportBuilder::new("selfplay_vt_envelope", 0.0);
    for row in rows.iter().filter(|r| r.method == Method::SelfPlay && r.error.is_none() && r.axis() >= 1) {
        vt.at_most(None, row.v_t.unwrap_or(f64::NAN), 16.0 * eta * eta / (row.axis() as f64 + 1.0));
        vt.next_instance();
    }
    reports.push(vt.finish());
    reports
}

/// Everything `verify` reports, plus the sweep rows behind the rate checks.
#[derive(Debug, Clone)]
pub struct VerifyOutcome {
    pub reports: Vec<BoundReport>,
    pub rows: Vec<SweepRow>,
}

impl VerifyOutcome {
    pub fn passed(&self) -> bool {
        self.reports.iter().all(|r| r.passed)
    }
}

pub fn run_verify(cfg: &ExperimentConfig) -> Result<VerifyOutcome> {
    cfg.validate()?;
    let mut reports = Vec::new();
    reports.extend(identity_suite(cfg)?);
    reports.extend(logit_bound_suite(cfg)?);
    reports.extend(stability_suite(cfg)?);
    reports.extend(convergence_suite(cfg)?);
    reports.extend(concentration_suite(cfg)?);
    reports.extend(oracle_suite(cfg)?);
    let mut rows = Vec::new();
    if cfg.verify.sweeps {
        let exp = Experiment::new(cfg)?;
        let n_rows = sweep_n(&exp);
        reports.extend(sample_size_reports(&exp, &n_rows));
        let t_rows = sweep_t(&exp);
        reports.extend(iteration_reports(&exp, &t_rows));
        rows.extend(n_rows);
        rows.extend(t_rows);
    }
    Ok(VerifyOutcome { reports, rows })
}
