//! Experiment orchestration: instance generation, the sample-size and
//! iteration sweeps, log-log slope fitting and report files.
//!
//! All randomness derives from `master_seed` through [`derive_seed`]; a sweep
//! cell's seed depends only on `(master_seed, n, seed, tag)`, so any subset of
//! cells can be rerun in isolation and reproduces the same values.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::BoundReport;
use crate::error::{Error, Result};
use crate::estimation::{
    least_squares_fit, pessimistic_fit_baseline, population_sq_distance, sample_dataset, unilateral_concentrability,
    FunctionClass, OfflineDataset,
};
use crate::game::{duality_gap, GameConfig, GameInstance, JointPolicy, PayoffTable, Policy};
use crate::io::{fmt_f64, to_json_pretty, write_atomic};
use crate::solver::{nash_oracle, selfplay_run_with_checkpoints, EMPIRICAL_TOL, TRUTH_TOL};

/// Behavior policy that generates the offline data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BehaviorSpec {
    Uniform,
    /// The reference pair.
    Reference,
    /// Nearly deterministic rows with probability floor 1e-3, for large C_uni.
    Skewed,
    /// Explicit row-major tables of shape |X|×|A|, one per player.
    Custom { p1: Vec<f64>, p2: Vec<f64> },
}

/// Instance counts for the `verify` suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub identity_instances: usize,
    pub logit_pairs: usize,
    pub stability_pairs: usize,
    pub convergence_games: usize,
    pub convergence_iterations: usize,
    pub concentration_trials: usize,
    pub concentration_n: usize,
    pub concentration_class_size: usize,
    pub oracle_games: usize,
    /// Include the sample-size and iteration sweeps.
    pub sweeps: bool,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            identity_instances: 200,
            logit_pairs: 10_000,
            stability_pairs: 50,
            convergence_games: 20,
            convergence_iterations: 10_000,
            concentration_trials: 500,
            concentration_n: 500,
            concentration_class_size: 8,
            oracle_games: 50,
            sweeps: true,
        }
    }
}

/// Every knob of an experiment. Serialized as JSON with these field names;
/// missing fields take the defaults below, unknown fields are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub num_contexts: usize,
    pub num_actions: usize,
    pub eta: f64,
    pub noise_sigma: f64,
    pub class_size: usize,
    /// Sup-norm of the largest perturbation in the function class.
    pub perturbation_scale: f64,
    /// Ratio between the magnitudes of consecutive class perturbations.
    pub perturbation_decay: f64,
    pub behavior: BehaviorSpec,
    pub n_grid: Vec<usize>,
    pub t_grid: Vec<usize>,
    /// Dataset size held fixed by the iteration sweep.
    pub t_sweep_n: usize,
    pub seeds: Vec<u64>,
    pub delta: f64,
    pub master_seed: u64,
    /// Worker threads; `None` uses every available processor.
    pub workers: Option<usize>,
    /// Dataset size for `gen`, `fit`, `solve` and `selfplay`.
    pub n: usize,
    /// Self-play iterations for `selfplay`.
    pub iterations: usize,
    pub include_baseline: bool,
    /// Wall time is left at 0 unless enabled, keeping reruns byte-identical.
    pub record_wall_time: bool,
    pub output_dir: String,
    pub verify: VerifyConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            num_contexts: 4,
            num_actions: 4,
            eta: 1.0,
            noise_sigma: 0.5,
            class_size: 16,
            perturbation_scale: 0.3,
            perturbation_decay: std::f64::consts::FRAC_1_SQRT_2,
            behavior: BehaviorSpec::Uniform,
            n_grid: (7..=14).map(|k| 1 << k).collect(),
            t_grid: (0..=14).map(|k| 1 << k).collect(),
            t_sweep_n: 1 << 12,
            seeds: (0..20).collect(),
            delta: 0.1,
            master_seed: 0,
            workers: None,
            n: 1024,
            iterations: 1024,
            include_baseline: true,
            record_wall_time: false,
            output_dir: "out".into(),
            verify: VerifyConfig::default(),
        }
    }
}

fn check_grid(name: &str, grid: &[usize]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::invalid(format!("{name} is empty")));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid(format!("{name} must be strictly increasing")));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_contexts == 0 || self.num_actions == 0 {
            return Err(Error::invalid("num_contexts and num_actions must be positive"));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::invalid(format!("eta must be positive and finite, got {}", self.eta)));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::invalid("noise_sigma must be finite and nonnegative"));
        }
        if self.class_size == 0 {
            return Err(Error::invalid("class_size must be at least 1"));
        }
        if !(self.perturbation_scale >= 0.0 && self.perturbation_scale.is_finite()) {
            return Err(Error::invalid("perturbation_scale must be finite and nonnegative"));
        }
        if !(self.perturbation_decay > 0.0 && self.perturbation_decay <= 1.0) {
            return Err(Error::invalid("perturbation_decay must lie in (0, 1]"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::invalid(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        check_grid("n_grid", &self.n_grid)?;
        check_grid("t_grid", &self.t_grid)?;
        if self.seeds.is_empty() {
            return Err(Error::invalid("seeds is empty"));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("seeds must be distinct"));
        }
        if self.workers == Some(0) {
            return Err(Error::invalid("workers must be positive"));
        }
        if let BehaviorSpec::Custom { p1, p2 } = &self.behavior {
            let len = self.num_contexts * self.num_actions;
            if p1.len() != len || p2.len() != len {
                return Err(Error::invalid(format!("custom behavior tables need {len} entries each")));
            }
        }
        Ok(())
    }
}

const SPLITMIX_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(SPLITMIX_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a hash of a tag string.
pub fn tag(name: &str) -> u64 {
    name.bytes().fold(0xCBF2_9CE4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01B3))
}

/// Folds `parts` into `master` with SplitMix64. Stable across versions:
/// changing it changes every emitted number.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(splitmix64(master), |h, &p| splitmix64(h ^ p))
}

/// Seed of the dataset behind sweep cell `(n, seed)`. The main method and
/// the baseline share it, so their rows are paired.
pub fn dataset_seed(master: u64, n: usize, seed: u64) -> u64 {
    derive_seed(master, &[n as u64, seed, tag("dataset")])
}

fn dirichlet_one<R: Rng>(rng: &mut R, len: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..len).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|v| v / total).collect()
}

/// Policy whose rows are independent Dirichlet(1) draws.
pub fn random_policy<R: Rng>(rng: &mut R, num_contexts: usize, num_actions: usize) -> Policy<f64> {
    let probs = (0..num_contexts).flat_map(|_| dirichlet_one(rng, num_actions)).collect();
    Policy::from_weights(num_contexts, num_actions, probs).expect("Dirichlet rows are valid weights")
}

pub fn random_game_with<R: Rng>(rng: &mut R, num_contexts: usize, num_actions: usize) -> GameInstance<f64> {
    let values = (0..num_contexts * num_actions * num_actions).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let payoff = PayoffTable::new(num_contexts, num_actions, values).expect("entries lie in [-1, 1]");
    let rho = dirichlet_one(rng, num_contexts);
    GameInstance::new(rho, payoff).expect("rho is a distribution")
}

/// Payoffs i.i.d. uniform on [−1, 1]; ρ ∼ Dirichlet(1).
pub fn random_game(num_contexts: usize, num_actions: usize, seed: u64) -> Result<GameInstance<f64>> {
    if num_contexts == 0 || num_actions == 0 {
        return Err(Error::invalid("game dimensions must be positive"));
    }
    Ok(random_game_with(&mut ChaCha8Rng::seed_from_u64(seed), num_contexts, num_actions))
}

/// Independent ±1 entries: unit sup-norm and unit mean square under any
/// sampling distribution.
fn sign_direction<R: Rng>(rng: &mut R, num_contexts: usize, num_actions: usize) -> Vec<f64> {
    (0..num_contexts * num_actions * num_actions).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect()
}

/// Member 0 is `g_true`; member k ≥ 1 is clip(g⋆ + scale·decayᵏ⁻¹·hₖ) with
/// hₖ an independent ±1 table.
///
/// Geometrically spaced magnitudes make the least-squares error shrink like
/// 1/n over a wide range of n, rather than dropping off exponentially once
/// every wrong member is separated from the truth.
pub fn build_function_class(
    g_true: &PayoffTable<f64>,
    size: usize,
    perturbation_scale: f64,
    perturbation_decay: f64,
    seed: u64,
) -> Result<FunctionClass<f64>> {
    if size == 0 {
        return Err(Error::invalid("class size must be at least 1"));
    }
    if !(perturbation_scale >= 0.0 && perturbation_scale.is_finite()) {
        return Err(Error::invalid("perturbation_scale must be finite and nonnegative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (nx, na) = (g_true.num_contexts(), g_true.num_actions());
    let mut members = vec![g_true.clone()];
    let mut magnitude = perturbation_scale;
    for _ in 1..size {
        let h = sign_direction(&mut rng, nx, na);
        let m = magnitude;
        members.push(g_true.map_clipped(|x, a1, a2, v| v + m * h[(x * na + a1) * na + a2]));
        magnitude *= perturbation_decay;
    }
    FunctionClass::new(members)
}

fn skewed_policy(num_contexts: usize, num_actions: usize, shift: usize) -> Result<Policy<f64>> {
    const FLOOR: f64 = 1e-3;
    let mut probs = vec![FLOOR; num_contexts * num_actions];
    for x in 0..num_contexts {
        probs[x * num_actions + (x + shift) % num_actions] = 1.0 - FLOOR * (num_actions - 1) as f64;
    }
    Policy::from_weights(num_contexts, num_actions, probs)
}

pub fn behavior_policy(spec: &BehaviorSpec, cfg: &GameConfig<f64>) -> Result<JointPolicy<f64>> {
    let (nx, na) = (cfg.num_contexts(), cfg.num_actions());
    match spec {
        BehaviorSpec::Uniform => Ok(JointPolicy::uniform(nx, na)),
        BehaviorSpec::Reference => Ok(cfg.reference_pair()),
        BehaviorSpec::Skewed => JointPolicy::new(skewed_policy(nx, na, 0)?, skewed_policy(nx, na, 1)?),
        BehaviorSpec::Custom { p1, p2 } => {
            JointPolicy::new(Policy::new(nx, na, p1.clone())?, Policy::new(nx, na, p2.clone())?)
        }
    }
}

/// A fully materialized experiment: the true game, the class, the behavior
/// policy, the true equilibrium and C_uni, plus equilibria of every class
/// member (the least-squares estimate is always one of them).
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub game: GameInstance<f64>,
    pub game_cfg: GameConfig<f64>,
    pub class: FunctionClass<f64>,
    pub behavior: JointPolicy<f64>,
    pub nash: JointPolicy<f64>,
    pub c_uni: f64,
    pub member_nash: Vec<JointPolicy<f64>>,
}

impl Experiment {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let master = config.master_seed;
        let (nx, na) = (config.num_contexts, config.num_actions);
        let game = random_game(nx, na, derive_seed(master, &[tag("game")]))?;
        let class = build_function_class(
            &game.payoff,
            config.class_size,
            config.perturbation_scale,
            config.perturbation_decay,
            derive_seed(master, &[tag("class")]),
        )?;
        let game_cfg = GameConfig::uniform(nx, na, config.eta)?;
        let behavior = behavior_policy(&config.behavior, &game_cfg)?;
        let nash = nash_oracle(&game.payoff, &game_cfg, TRUTH_TOL, crate::solver::DEFAULT_MAX_ITERS)?;
        let c_uni = unilateral_concentrability(&class, &behavior, &game.rho, &nash);
        let member_nash = class
            .members()
            .par_iter()
            .map(|g| nash_oracle(g, &game_cfg, EMPIRICAL_TOL, crate::solver::DEFAULT_MAX_ITERS))
            .collect::<Result<Vec<_>>>()?;
        Ok(Experiment { config: config.clone(), game, game_cfg, class, behavior, nash, c_uni, member_nash })
    }

    pub fn dataset(&self, n: usize, seed: u64) -> Result<OfflineDataset<f64>> {
        sample_dataset(&self.game, &self.behavior, n, self.config.noise_sigma, dataset_seed(self.config.master_seed, n, seed))
    }

    /// log(|G|/δ), the complexity term of both gap envelopes.
    pub fn log_term(&self) -> f64 {
        (self.class.len() as f64 / self.config.delta).ln()
    }

    /// 64(η+η³)·C_uni·log(|G|/δ)/n.
    pub fn sample_envelope(&self, n: usize) -> f64 {
        let eta = self.config.eta;
        ENVELOPE_K * (eta + eta.powi(3)) * self.c_uni * self.log_term() / n as f64
    }

    /// 64(η+η³)·(1/T + C_uni·log(|G|/δ)/n).
    pub fn selfplay_envelope(&self, n: usize, t: usize) -> f64 {
        let eta = self.config.eta;
        ENVELOPE_K * (eta + eta.powi(3)) * (1.0 / t as f64 + self.c_uni * self.log_term() / n as f64)
    }
}

/// Absolute constant of the gap envelopes, a calibrated regression guard.
pub const ENVELOPE_K: f64 = 64.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Least squares followed by the exact equilibrium of the estimate.
    Minimax,
    /// Equilibrium of the pessimistic lower-confidence table.
    Baseline,
    /// Self-play mirror descent on the least-squares estimate.
    SelfPlay,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Minimax => "minimax",
            Method::Baseline => "baseline",
            Method::SelfPlay => "selfplay",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub method: Method,
    pub n: usize,
    /// Self-play iteration count; `None` for exact-equilibrium rows.
    pub t: Option<usize>,
    pub seed: u64,
    /// Position of `seed` in the configured seed list, for ordering.
    pub seed_index: usize,
    pub dual_gap: f64,
    pub payoff_mse: f64,
    pub c_uni: f64,
    pub wall_time_ms: u64,
    /// Anchor divergence of the last self-play iterate.
    pub v_t: Option<f64>,
    /// Error kind and message when the cell failed.
    pub error: Option<String>,
}

impl SweepRow {
    /// Grid coordinate: T for self-play rows, n otherwise.
    pub fn axis(&self) -> usize {
        self.t.unwrap_or(self.n)
    }

    fn sort_key(&self) -> (Method, usize, Option<usize>, usize) {
        (self.method, self.n, self.t, self.seed_index)
    }
}

struct Cell {
    n: usize,
    seed: u64,
    seed_index: usize,
}

impl Cell {
    fn row(&self, method: Method, t: Option<usize>, c_uni: f64) -> SweepRow {
        SweepRow {
            method,
            n: self.n,
            t,
            seed: self.seed,
            seed_index: self.seed_index,
            dual_gap: f64::NAN,
            payoff_mse: f64::NAN,
            c_uni,
            wall_time_ms: 0,
            v_t: None,
            error: None,
        }
    }
}

fn elapsed_ms(start: Instant, record: bool) -> u64 {
    if record {
        start.elapsed().as_millis() as u64
    } else {
        0
    }
}

fn fill<F: FnOnce(&mut SweepRow) -> Result<()>>(mut row: SweepRow, record_time: bool, f: F) -> SweepRow {
    let start = Instant::now();
    if let Err(e) = f(&mut row) {
        row.error = Some(format!("{}: {e}", e.kind()));
    }
    row.wall_time_ms = elapsed_ms(start, record_time);
    row
}

fn error_row(mut row: SweepRow, e: &Error) -> SweepRow {
    row.error = Some(format!("{}: {e}", e.kind()));
    row
}

fn sweep_n_cell(exp: &Experiment, cell: &Cell) -> Vec<SweepRow> {
    let cfg = &exp.config;
    let rho = &exp.game.rho;
    let truth = &exp.game.payoff;
    let mut methods = vec![Method::Minimax];
    if cfg.include_baseline {
        methods.push(Method::Baseline);
    }
    let data = match exp.dataset(cell.n, cell.seed) {
        Ok(d) => d,
        Err(e) => return methods.iter().map(|&m| error_row(cell.row(m, None, exp.c_uni), &e)).collect(),
    };
    let mut rows = vec![fill(cell.row(Method::Minimax, None, exp.c_uni), cfg.record_wall_time, |row| {
        let fit = least_squares_fit(&exp.class, &data, None)?;
        let pi_hat = &exp.member_nash[fit.chosen_index];
        row.dual_gap = duality_gap(truth, pi_hat, &exp.game_cfg, rho)?;
        row.payoff_mse = population_sq_distance(exp.class.get(fit.chosen_index), truth, &exp.behavior, rho);
        Ok(())
    })];
    if cfg.include_baseline {
        rows.push(fill(cell.row(Method::Baseline, None, exp.c_uni), cfg.record_wall_time, |row| {
            let low = pessimistic_fit_baseline(&exp.class, &data, cfg.delta)?;
            let pi = nash_oracle(&low, &exp.game_cfg, EMPIRICAL_TOL, crate::solver::DEFAULT_MAX_ITERS)?;
            row.dual_gap = duality_gap(truth, &pi, &exp.game_cfg, rho)?;
            row.payoff_mse = population_sq_distance(&low, truth, &exp.behavior, rho);
            Ok(())
        }));
    }
    rows
}

fn sort_rows(rows: &mut [SweepRow]) {
    rows.sort_by_key(|a| a.sort_key());
}

/// One row per (n, seed) for the least-squares pipeline, plus parallel
/// `baseline` rows when enabled. Failed cells keep their row with `error`
/// set.
pub fn sweep_n(exp: &Experiment) -> Vec<SweepRow> {
    let cfg = &exp.config;
    let cells: Vec<Cell> = cfg
        .n_grid
        .iter()
        .flat_map(|&n| cfg.seeds.iter().enumerate().map(move |(seed_index, &seed)| Cell { n, seed, seed_index }))
        .collect();
    let mut rows: Vec<SweepRow> = cells.par_iter().flat_map_iter(|c| sweep_n_cell(exp, c)).collect();
    sort_rows(&mut rows);
    rows
}

fn sweep_t_seed(exp: &Experiment, cell: &Cell) -> Vec<SweepRow> {
    let cfg = &exp.config;
    let rho = &exp.game.rho;
    let truth = &exp.game.payoff;
    let minimax = |row: &mut SweepRow| -> Result<usize> {
        let data = exp.dataset(cell.n, cell.seed)?;
        let fit = least_squares_fit(&exp.class, &data, None)?;
        row.dual_gap = duality_gap(truth, &exp.member_nash[fit.chosen_index], &exp.game_cfg, rho)?;
        row.payoff_mse = population_sq_distance(exp.class.get(fit.chosen_index), truth, &exp.behavior, rho);
        Ok(fit.chosen_index)
    };
    let mut chosen = None;
    let reference = fill(cell.row(Method::Minimax, None, exp.c_uni), cfg.record_wall_time, |row| {
        chosen = Some(minimax(row)?);
        Ok(())
    });
    let mut rows = Vec::with_capacity(cfg.t_grid.len() + 1);
    let Some(k) = chosen else {
        let err = reference.error.clone();
        rows.extend(cfg.t_grid.iter().map(|&t| SweepRow { error: err.clone(), ..cell.row(Method::SelfPlay, Some(t), exp.c_uni) }));
        rows.push(reference);
        return rows;
    };
    let mse = reference.payoff_mse;
    rows.push(reference);
    let start = Instant::now();
    let g_hat = exp.class.get(k);
    let t_max = *cfg.t_grid.last().expect("validated nonempty");
    let mut snapshots = Vec::with_capacity(cfg.t_grid.len());
    let run = selfplay_run_with_checkpoints(g_hat, &exp.game_cfg, rho, t_max, Some(&exp.member_nash[k]), &cfg.t_grid, &mut snapshots);
    let per_row_ms = elapsed_ms(start, cfg.record_wall_time) / cfg.t_grid.len() as u64;
    match run {
        Ok((_, trace)) => {
            for (t, pi) in snapshots {
                let mut row = cell.row(Method::SelfPlay, Some(t), exp.c_uni);
                row.payoff_mse = mse;
                row.v_t = trace.records[t].v_t;
                row.wall_time_ms = per_row_ms;
                match duality_gap(truth, &pi, &exp.game_cfg, rho) {
                    Ok(gap) => row.dual_gap = gap,
                    Err(e) => row.error = Some(format!("{}: {e}", e.kind())),
                }
                rows.push(row);
            }
        }
        Err(e) => rows.extend(cfg.t_grid.iter().map(|&t| error_row(cell.row(Method::SelfPlay, Some(t), exp.c_uni), &e))),
    }
    rows
}

/// Fixed n = `t_sweep_n`; for each seed, one `minimax` row with the exact
/// equilibrium of ĝ and one `selfplay` row per T in `t_grid`, all on the
/// same dataset.
pub fn sweep_t(exp: &Experiment) -> Vec<SweepRow> {
    let cfg = &exp.config;
    let cells: Vec<Cell> = cfg
        .seeds
        .iter()
        .enumerate()
        .map(|(seed_index, &seed)| Cell { n: cfg.t_sweep_n, seed, seed_index })
        .collect();
    let mut rows: Vec<SweepRow> = cells.par_iter().flat_map_iter(|c| sweep_t_seed(exp, c)).collect();
    sort_rows(&mut rows);
    rows
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Column {
    DualGap,
    PayoffMse,
    VT,
}

impl Column {
    fn get(self, row: &SweepRow) -> Option<f64> {
        match self {
            Column::DualGap => Some(row.dual_gap),
            Column::PayoffMse => Some(row.payoff_mse),
            Column::VT => row.v_t,
        }
    }
}

pub fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    }
}

/// Median over seeds of `column` for each grid coordinate, ignoring failed
/// cells.
pub fn medians(rows: &[SweepRow], method: Method, column: Column) -> Vec<(usize, f64)> {
    let mut groups: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for row in rows.iter().filter(|r| r.method == method && r.error.is_none()) {
        if let Some(v) = column.get(row) {
            groups.entry(row.axis()).or_default().push(v);
        }
    }
    groups.into_iter().map(|(x, mut v)| (x, median(&mut v))).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// OLS of log₂ y on log₂ x.
pub fn ols_loglog(points: &[(f64, f64)]) -> Result<LogLogFit> {
    if points.len() < 4 {
        return Err(Error::invalid(format!("slope fit needs at least 4 grid points, got {}", points.len())));
    }
    let bad: Vec<String> = points.iter().filter(|p| !(p.0 > 0.0 && p.1 > 0.0)).map(|p| format!("({}, {})", p.0, p.1)).collect();
    if !bad.is_empty() {
        return Err(Error::domain(format!("nonpositive values at {}", bad.join(", "))));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.log2()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.log2()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("slope fit needs distinct grid points"));
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(LogLogFit { slope, intercept: my - slope * mx, r2 })
}

/// Slope of the median-over-seeds `column` against the grid coordinate.
pub fn fit_loglog_slope(rows: &[SweepRow], method: Method, column: Column) -> Result<LogLogFit> {
    let meds = medians(rows, method, column);
    let offending: Vec<String> = meds.iter().filter(|m| !(m.1 > 0.0)).map(|m| format!("{}={}", m.0, m.1)).collect();
    if !offending.is_empty() {
        return Err(Error::domain(format!("nonpositive median {} at {}", method.as_str(), offending.join(", "))));
    }
    let points: Vec<(f64, f64)> = meds.iter().map(|&(x, y)| (x as f64, y)).collect();
    ols_loglog(&points)
}

pub const SWEEP_HEADER: &str = "method,n,T,seed,dual_gap,payoff_mse,c_uni,wall_time_ms";

/// `sweep.csv` contents. A failed cell keeps its row; its method is
/// suffixed with `!error` and its numeric cells are empty.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        let t = r.t.map(|t| t.to_string()).unwrap_or_default();
        if r.error.is_some() {
            let _ = writeln!(out, "{}!error,{},{},{},,,{},{}", r.method.as_str(), r.n, t, r.seed, fmt_f64(r.c_uni), r.wall_time_ms);
        } else {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.method.as_str(),
                r.n,
                t,
                r.seed,
                fmt_f64(r.dual_gap),
                fmt_f64(r.payoff_mse),
                fmt_f64(r.c_uni),
                r.wall_time_ms
            );
        }
    }
    out
}

/// Log-log plot data for one method: one line per grid point.
pub fn plotdata_csv(rows: &[SweepRow], method: Method) -> String {
    let axis = if method == Method::SelfPlay { "T" } else { "n" };
    let mut out = format!("{axis},median_dual_gap,median_payoff_mse,log2_{axis},log2_median_dual_gap\n");
    let mse: BTreeMap<usize, f64> = medians(rows, method, Column::PayoffMse).into_iter().collect();
    for (x, gap) in medians(rows, method, Column::DualGap) {
        let log_x = if x > 0 { fmt_f64((x as f64).log2()) } else { String::new() };
        let log_gap = if gap > 0.0 { fmt_f64(gap.log2()) } else { String::new() };
        let _ = writeln!(out, "{x},{},{},{log_x},{log_gap}", fmt_f64(gap), fmt_f64(mse[&x]));
    }
    out
}

fn methods_present(rows: &[SweepRow]) -> Vec<Method> {
    let mut methods: Vec<Method> = rows.iter().map(|r| r.method).collect();
    methods.sort();
    methods.dedup();
    methods
}

/// File names and contents of a sweep report: `sweep.csv`, `bounds.json` and
/// one `plotdata_<method>.csv` per method present.
pub fn report_files(rows: &[SweepRow], reports: &[BoundReport]) -> Result<Vec<(String, Vec<u8>)>> {
    let mut rows = rows.to_vec();
    sort_rows(&mut rows);
    let mut files = vec![
        ("sweep.csv".to_string(), sweep_csv(&rows).into_bytes()),
        ("bounds.json".to_string(), to_json_pretty(&reports)?),
    ];
    for method in methods_present(&rows) {
        files.push((format!("plotdata_{}.csv", method.as_str()), plotdata_csv(&rows, method).into_bytes()));
    }
    Ok(files)
}

/// Writes [`report_files`] into `out_dir`, each atomically. Returns the
/// paths written.
pub fn emit_report(rows: &[SweepRow], reports: &[BoundReport], out_dir: &Path) -> Result<Vec<PathBuf>> {
    let files = report_files(rows, reports)?;
    let mut paths = Vec::with_capacity(files.len());
    for (name, bytes) in &files {
        let path = out_dir.join(name);
        write_atomic(&path, bytes)?;
        paths.push(path);
    }
    Ok(paths)
}

/// Parses `sweep.csv` back into rows (error rows keep their tag but lose the
/// message). Used by `report` to regenerate plot data.
pub fn read_sweep_csv(text: &str) -> Result<Vec<SweepRow>> {
    let mut lines = text.lines();
    if lines.next() != Some(SWEEP_HEADER) {
        return Err(Error::Parse(format!("sweep.csv header must be `{SWEEP_HEADER}`")));
    }
    let mut next_index: BTreeMap<(String, usize, Option<usize>), usize> = BTreeMap::new();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        let bad = || Error::Parse(format!("sweep.csv line {}: `{line}`", i + 2));
        if f.len() != 8 {
            return Err(bad());
        }
        let (name, failed) = match f[0].strip_suffix("!error") {
            Some(m) => (m, true),
            None => (f[0], false),
        };
        let method = match name {
            "minimax" => Method::Minimax,
            "baseline" => Method::Baseline,
            "selfplay" => Method::SelfPlay,
            _ => return Err(bad()),
        };
        let num = |s: &str| if s.is_empty() { Ok(f64::NAN) } else { s.parse::<f64>().map_err(|_| bad()) };
        let n: usize = f[1].parse().map_err(|_| bad())?;
        let t = if f[2].is_empty() { None } else { Some(f[2].parse().map_err(|_| bad())?) };
        let counter = next_index.entry((name.to_string(), n, t)).or_insert(0);
        rows.push(SweepRow {
            method,
            n,
            t,
            seed: f[3].parse().map_err(|_| bad())?,
            seed_index: *counter,
            dual_gap: num(f[4])?,
            payoff_mse: num(f[5])?,
            c_uni: num(f[6])?,
            wall_time_ms: f[7].parse().map_err(|_| bad())?,
            v_t: None,
            error: failed.then(|| "error".to_string()),
        });
        *counter += 1;
    }
    Ok(rows)
}
