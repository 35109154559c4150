//! Numerical checks of the identities and bounds that control the duality
//! gap. Each check returns a [`BoundReport`] with the exact worst violation,
//! so runs can be compared over time.
//!
//! Inequalities record `lhs − rhs` as the violation and pass when it is at
//! most the report's tolerance; equalities record `|lhs − rhs|`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::game::{
    best_response_policy, best_response_value, kl_divergence, objective, softmax, GameConfig,
    JointPolicy, PayoffTable, Player,
};
use crate::solver::{nash_oracle, SelfPlayTrace, DEFAULT_MAX_ITERS};

/// One checked instance of a claim.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Slack {
    pub instance: usize,
    pub context: Option<usize>,
    pub lhs: f64,
    pub rhs: f64,
    pub violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub name: String,
    pub instances_checked: usize,
    /// Largest violation over all records; positive means the claim failed
    /// before tolerance is applied.
    pub max_violation: f64,
    pub passed: bool,
    pub tolerance: f64,
    #[serde(skip)]
    pub details: Vec<Slack>,
}

impl BoundReport {
    /// A report whose `max_violation` and `passed` follow from `details`.
    pub fn from_details(name: impl Into<String>, tolerance: f64, instances_checked: usize, details: Vec<Slack>) -> Self {
        let max_violation = details.iter().map(|d| d.violation).fold(None, |m: Option<f64>, v| {
            Some(match m {
                Some(m) if !(v > m) && !v.is_nan() => m,
                _ => v,
            })
        });
        let max_violation = max_violation.unwrap_or(0.0);
        BoundReport {
            name: name.into(),
            instances_checked,
            max_violation,
            passed: max_violation <= tolerance,
            tolerance,
            details,
        }
    }

    /// Concatenates reports of the same claim over separate instances.
    pub fn combine(name: impl Into<String>, reports: impl IntoIterator<Item = BoundReport>) -> Self {
        let mut tolerance = None;
        let mut instances = 0;
        let mut details = Vec::new();
        for r in reports {
            let tol: f64 = *tolerance.get_or_insert(r.tolerance);
            debug_assert_eq!(tol, r.tolerance, "combined reports must share a tolerance");
            details.extend(r.details.into_iter().map(|d| Slack { instance: d.instance + instances, ..d }));
            instances += r.instances_checked;
        }
        BoundReport::from_details(name, tolerance.unwrap_or(0.0), instances, details)
    }
}

/// Collects slack records for one report.
#[derive(Debug)]
pub struct ReportBuilder {
    name: String,
    tolerance: f64,
    instances: usize,
    details: Vec<Slack>,
}

impl ReportBuilder {
    pub fn new(name: impl Into<String>, tolerance: f64) -> Self {
        ReportBuilder { name: name.into(), tolerance, instances: 0, details: Vec::new() }
    }

    /// Records `lhs ≤ rhs`.
    pub fn at_most(&mut self, context: Option<usize>, lhs: f64, rhs: f64) {
        let violation = if lhs.is_nan() || rhs.is_nan() { f64::INFINITY } else { lhs - rhs };
        self.details.push(Slack { instance: self.instances, context, lhs, rhs, violation });
    }

    /// Records `lhs = rhs`.
    pub fn equal(&mut self, context: Option<usize>, lhs: f64, rhs: f64) {
        let violation = if lhs.is_nan() || rhs.is_nan() { f64::INFINITY } else { (lhs - rhs).abs() };
        self.details.push(Slack { instance: self.instances, context, lhs, rhs, violation });
    }

    /// Records `lo ≤ value ≤ hi`; the violation is the distance outside.
    pub fn within(&mut self, context: Option<usize>, value: f64, lo: f64, hi: f64) {
        let violation = if value.is_nan() { f64::INFINITY } else { (lo - value).max(value - hi) };
        self.details.push(Slack { instance: self.instances, context, lhs: value, rhs: if value < lo { lo } else { hi }, violation });
    }

    /// Closes the current instance.
    pub fn next_instance(&mut self) {
        self.instances += 1;
    }

    pub fn finish(self) -> BoundReport {
        BoundReport::from_details(self.name, self.tolerance, self.instances, self.details)
    }
}

/// Per-context unilateral estimation errors and their ρ-weighted second
/// moment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnilateralError {
    pub per_context: Vec<f64>,
    pub mean_sq: f64,
}

fn check_tables(g_hat: &PayoffTable<f64>, g_true: &PayoffTable<f64>, nash: &JointPolicy<f64>) -> Result<()> {
    if !g_hat.same_shape(g_true) || nash.num_contexts() != g_true.num_contexts() || nash.num_actions() != g_true.num_actions() {
        return Err(Error::invalid("payoff tables and equilibrium must share dimensions"));
    }
    Ok(())
}

/// Row-player error averaged over the column player's equilibrium, per a₁.
fn row_error(g_hat: &PayoffTable<f64>, g_true: &PayoffTable<f64>, nash: &JointPolicy<f64>, x: usize) -> Vec<f64> {
    let na = g_true.num_actions();
    (0..na)
        .map(|a1| (0..na).map(|a2| nash.p2.prob(x, a2) * (g_hat.get(x, a1, a2) - g_true.get(x, a1, a2))).sum())
        .collect()
}

/// Column-player error averaged over the row player's equilibrium, per a₂.
fn column_error(g_hat: &PayoffTable<f64>, g_true: &PayoffTable<f64>, nash: &JointPolicy<f64>, x: usize) -> Vec<f64> {
    let na = g_true.num_actions();
    (0..na)
        .map(|a2| (0..na).map(|a1| nash.p1.prob(x, a1) * (g_hat.get(x, a1, a2) - g_true.get(x, a1, a2))).sum())
        .collect()
}

fn sup_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// 𝓔(x): the larger of the two payoff errors averaged against one
/// equilibrium marginal, in sup-norm over the deviating player's actions.
pub fn unilateral_error(g_hat: &PayoffTable<f64>, g_true: &PayoffTable<f64>, nash: &JointPolicy<f64>, x: usize) -> Result<f64> {
    check_tables(g_hat, g_true, nash)?;
    if x >= g_true.num_contexts() {
        return Err(Error::invalid(format!("context {x} out of range")));
    }
    Ok(sup_abs(&row_error(g_hat, g_true, nash, x)).max(sup_abs(&column_error(g_hat, g_true, nash, x))))
}

pub fn unilateral_errors(
    g_hat: &PayoffTable<f64>,
    g_true: &PayoffTable<f64>,
    nash: &JointPolicy<f64>,
    rho: &[f64],
) -> Result<UnilateralError> {
    if rho.len() != g_true.num_contexts() {
        return Err(Error::invalid("rho does not match the number of contexts"));
    }
    let per_context = (0..g_true.num_contexts()).map(|x| unilateral_error(g_hat, g_true, nash, x)).collect::<Result<Vec<_>>>()?;
    let mean_sq = per_context.iter().zip(rho).map(|(e, w)| w * e * e).sum();
    Ok(UnilateralError { per_context, mean_sq })
}

/// Per-context stability ‖π̂ₓ − π⋆ₓ‖₁ ≤ 2η𝓔(x) and its averaged form
/// E‖π̂ − π⋆‖₁² ≤ 4η²E[𝓔²], given both equilibria. ℓ₁ is over the
/// concatenated pair. Both carry slack 4·tol_oracle.
pub fn stability_reports(
    g_true: &PayoffTable<f64>,
    g_hat: &PayoffTable<f64>,
    eta: f64,
    rho: &[f64],
    nash_true: &JointPolicy<f64>,
    nash_hat: &JointPolicy<f64>,
    tol_oracle: f64,
) -> Result<[BoundReport; 2]> {
    let errs = unilateral_errors(g_hat, g_true, nash_true, rho)?;
    let mut per_context = ReportBuilder::new("stability_per_context", 4.0 * tol_oracle);
    let mut averaged = ReportBuilder::new("stability_averaged", 4.0 * tol_oracle);
    let mut mean_sq_dist = 0.0;
    for (x, &e) in errs.per_context.iter().enumerate() {
        let dist = nash_hat.l1_at(nash_true, x);
        per_context.at_most(Some(x), dist, 2.0 * eta * e);
        mean_sq_dist += rho[x] * dist * dist;
    }
    averaged.at_most(None, mean_sq_dist, 4.0 * eta * eta * errs.mean_sq);
    per_context.next_instance();
    averaged.next_instance();
    Ok([per_context.finish(), averaged.finish()])
}

/// Solves both games at `tol_oracle` and checks the per-context stability
/// bound.
pub fn check_stability_bound(
    g_true: &PayoffTable<f64>,
    g_hat: &PayoffTable<f64>,
    cfg: &GameConfig<f64>,
    rho: &[f64],
    tol_oracle: f64,
) -> Result<BoundReport> {
    let nash_true = nash_oracle(g_true, cfg, tol_oracle, DEFAULT_MAX_ITERS)?;
    let nash_hat = nash_oracle(g_hat, cfg, tol_oracle, DEFAULT_MAX_ITERS)?;
    let [per_context, _] = stability_reports(g_true, g_hat, cfg.eta, rho, &nash_true, &nash_hat, tol_oracle)?;
    Ok(per_context)
}

/// η⁻¹ E_x KL(p ‖ q) over the given player's rows.
fn mean_kl(p: &JointPolicy<f64>, q: &JointPolicy<f64>, player: Player, rho: &[f64], eta: f64) -> Result<f64> {
    let mut total = 0.0;
    for (x, &w) in rho.iter().enumerate() {
        if w > 0.0 {
            total += w * kl_divergence(p.get(player).row(x), q.get(player).row(x))?;
        }
    }
    Ok(total / eta)
}

/// Both best-response suboptimality identities at one joint policy:
/// J(π₁,π₂) − J(π₁,π₂†) = η⁻¹E KL(π₂‖π₂†) and
/// J(π₁†,π₂) − J(π₁,π₂) = η⁻¹E KL(π₁‖π₁†).
pub fn br_suboptimality_residuals(
    g: &PayoffTable<f64>,
    pi: &JointPolicy<f64>,
    cfg: &GameConfig<f64>,
    rho: &[f64],
) -> Result<[(f64, f64); 2]> {
    let j = objective(g, pi, cfg, rho)?;
    let br2 = pi.with(Player::Two, best_response_policy(g, &pi.p1, Player::Two, cfg)?);
    let br1 = pi.with(Player::One, best_response_policy(g, &pi.p2, Player::One, cfg)?);
    let lhs2 = j - objective(g, &br2, cfg, rho)?;
    let rhs2 = mean_kl(pi, &br2, Player::Two, rho, cfg.eta)?;
    let lhs1 = objective(g, &br1, cfg, rho)? - j;
    let rhs1 = mean_kl(pi, &br1, Player::One, rho, cfg.eta)?;
    Ok([(lhs1, rhs1), (lhs2, rhs2)])
}

/// Checks both best-response identities on `num_random` joint policies with
/// Dirichlet(1) rows drawn from `seed`, within 1e-9.
pub fn check_br_suboptimality_identity(
    g: &PayoffTable<f64>,
    cfg: &GameConfig<f64>,
    rho: &[f64],
    num_random: usize,
    seed: u64,
) -> Result<BoundReport> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let (nx, na) = (g.num_contexts(), g.num_actions());
    let mut report = ReportBuilder::new("br_suboptimality_identity", 1e-9);
    for _ in 0..num_random {
        let pi = JointPolicy::new(
            crate::harness::random_policy(&mut rng, nx, na),
            crate::harness::random_policy(&mut rng, nx, na),
        )?;
        for (lhs, rhs) in br_suboptimality_residuals(g, &pi, cfg, rho)? {
            report.equal(None, lhs, rhs);
        }
        report.next_instance();
    }
    Ok(report.finish())
}

/// Values behind the two one-sided gaps of a candidate π̂ under g⋆.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapDecomposition {
    /// J(†, π̂₂) − J(π₁⋆, π̂₂).
    pub gap1: f64,
    /// η⁻¹E KL(π₁⋆ ‖ π₁†(π̂₂)).
    pub gap1_kl: f64,
    /// J(π₁⋆, π̂₂) − J(π₁⋆, π₂⋆).
    pub gap2: f64,
    /// η⁻¹E KL(π̂₂ ‖ π₂⋆).
    pub gap2_kl: f64,
    /// (η/2)E‖π̂₂ − π₂⋆‖₁².
    pub gap1_bound: f64,
    /// 2ηE‖π̂₁ − π₁⋆‖₁² + 2ηE[max_{a₂}(E_{π₁⋆}[ĝ − g⋆])²], when ĝ is known.
    pub gap2_bound: Option<f64>,
}

fn mean_sq_l1(a: &JointPolicy<f64>, b: &JointPolicy<f64>, player: Player, rho: &[f64]) -> f64 {
    rho.iter()
        .enumerate()
        .map(|(x, w)| {
            let d = a.get(player).l1_at(b.get(player), x);
            w * d * d
        })
        .sum()
}

pub fn gap_decomposition(
    g_true: &PayoffTable<f64>,
    cfg: &GameConfig<f64>,
    rho: &[f64],
    nash: &JointPolicy<f64>,
    pi_hat: &JointPolicy<f64>,
    g_hat: Option<&PayoffTable<f64>>,
) -> Result<GapDecomposition> {
    let eta = cfg.eta;
    let mixed = pi_hat.with(Player::One, nash.p1.clone());
    let j_mixed = objective(g_true, &mixed, cfg, rho)?;
    let br1 = best_response_policy(g_true, &pi_hat.p2, Player::One, cfg)?;
    let gap1 = best_response_value(g_true, &mixed, Player::One, cfg, rho)? - j_mixed;
    let gap1_kl = mean_kl(nash, &mixed.with(Player::One, br1), Player::One, rho, eta)?;
    let gap2 = j_mixed - objective(g_true, nash, cfg, rho)?;
    let gap2_kl = mean_kl(pi_hat, nash, Player::Two, rho, eta)?;
    let gap1_bound = 0.5 * eta * mean_sq_l1(pi_hat, nash, Player::Two, rho);
    let gap2_bound = match g_hat {
        Some(g_hat) => {
            check_tables(g_hat, g_true, nash)?;
            let err: f64 = rho
                .iter()
                .enumerate()
                .map(|(x, w)| w * sup_abs(&column_error(g_hat, g_true, nash, x)).powi(2))
                .sum();
            Some(2.0 * eta * mean_sq_l1(pi_hat, nash, Player::One, rho) + 2.0 * eta * err)
        }
        None => None,
    };
    Ok(GapDecomposition { gap1, gap1_kl, gap2, gap2_kl, gap1_bound, gap2_bound })
}

/// Checks the KL forms of both one-sided gaps (within 1e-8) and their
/// logit-distance upper bounds (slack 4·tol_oracle). The second bound needs
/// π̂ to be the equilibrium of `g_hat` and is only checked when `g_hat` is
/// given. `nash` is the equilibrium of `g_true`.
pub fn gap_reports(
    g_true: &PayoffTable<f64>,
    cfg: &GameConfig<f64>,
    rho: &[f64],
    nash: &JointPolicy<f64>,
    pi_hat: &JointPolicy<f64>,
    g_hat: Option<&PayoffTable<f64>>,
    tol_oracle: f64,
) -> Result<[BoundReport; 2]> {
    let d = gap_decomposition(g_true, cfg, rho, nash, pi_hat, g_hat)?;
    let mut identities = ReportBuilder::new("gap_kl_identities", 1e-8);
    identities.equal(None, d.gap1, d.gap1_kl);
    identities.equal(None, d.gap2, d.gap2_kl);
    identities.next_instance();
    let mut bounds = ReportBuilder::new("gap_logit_bounds", 4.0 * tol_oracle);
    bounds.at_most(None, d.gap1, d.gap1_bound);
    if let Some(b) = d.gap2_bound {
        bounds.at_most(None, d.gap2, b);
    }
    bounds.next_instance();
    Ok([identities.finish(), bounds.finish()])
}

/// Solves g⋆ at 1e-12, then runs [`gap_reports`].
pub fn check_gap_kl_identities(
    g_true: &PayoffTable<f64>,
    cfg: &GameConfig<f64>,
    rho: &[f64],
    pi_hat: &JointPolicy<f64>,
    g_hat: Option<&PayoffTable<f64>>,
) -> Result<[BoundReport; 2]> {
    let tol = crate::solver::TRUTH_TOL;
    let nash = nash_oracle(g_true, cfg, tol, DEFAULT_MAX_ITERS)?;
    gap_reports(g_true, cfg, rho, &nash, pi_hat, g_hat, tol)
}

/// KL(softmax z ‖ softmax z′) ≤ ½‖z − z′‖∞² for one pair.
pub fn logit_bound_slack(z: &[f64], z_prime: &[f64]) -> Result<(f64, f64)> {
    if z.len() != z_prime.len() || z.is_empty() {
        return Err(Error::invalid("logit vectors must be nonempty and of equal length"));
    }
    let kl = kl_divergence(&softmax(z)?, &softmax(z_prime)?)?;
    let sup = z.iter().zip(z_prime).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    Ok((kl, 0.5 * sup * sup))
}

/// V_t ≤ 16η²/(t+1) at every recorded t ≥ 1 of an anchored trace.
pub fn check_opt_convergence(trace: &SelfPlayTrace<f64>, eta: f64) -> Result<BoundReport> {
    if !trace.has_anchor() {
        return Err(Error::invalid("trace has no anchor divergences"));
    }
    let mut report = ReportBuilder::new("selfplay_anchor_divergence", 0.0);
    for r in trace.records.iter().filter(|r| r.t >= 1) {
        report.at_most(None, r.v_t.expect("anchored"), 16.0 * eta * eta / (r.t as f64 + 1.0));
    }
    report.next_instance();
    Ok(report.finish())
}

/// ℓ₁ distance between the product distributions π₁⊗π₂ and π₁′⊗π₂′ at x.
pub fn product_l1_at(a: &JointPolicy<f64>, b: &JointPolicy<f64>, x: usize) -> f64 {
    let (a1, a2, b1, b2) = (a.p1.row(x), a.p2.row(x), b.p1.row(x), b.p2.row(x));
    a1.iter()
        .zip(b1)
        .map(|(&p, &q)| a2.iter().zip(b2).map(|(&r, &s)| (p * r - q * s).abs()).sum::<f64>())
        .sum()
}

/// E_x‖π̂ − π⁽ᵀ⁾‖₁² ≤ 32η²/(T+1), with ℓ₁ over the product distribution so
/// that Pinsker applies to the summed KL.
pub fn check_final_iterate_distance(
    anchor: &JointPolicy<f64>,
    last: &JointPolicy<f64>,
    rho: &[f64],
    eta: f64,
    iterations: usize,
) -> BoundReport {
    let lhs = rho
        .iter()
        .enumerate()
        .map(|(x, w)| w * product_l1_at(anchor, last, x).powi(2))
        .sum();
    let mut report = ReportBuilder::new("selfplay_final_distance", 0.0);
    report.at_most(None, lhs, 32.0 * eta * eta / (iterations as f64 + 1.0));
    report.next_instance();
    report.finish()
}

/// Monte-Carlo frequency test: passes when the share of violating trials is
/// at most δ + 3√(δ(1−δ)/trials). `violations[i]` marks trial i.
pub fn frequency_report(name: &str, violations: &[bool], delta: f64) -> BoundReport {
    let trials = violations.len();
    let freq = if trials == 0 { 0.0 } else { violations.iter().filter(|&&v| v).count() as f64 / trials as f64 };
    let allowed = delta + 3.0 * (delta * (1.0 - delta) / trials.max(1) as f64).sqrt();
    let mut report = ReportBuilder::new(name, 0.0);
    report.at_most(None, freq, allowed);
    let mut r = report.finish();
    r.instances_checked = trials;
    r
}

/// Σ(ĝ − g⋆)² over the sample against 8 log(|G|/δ), one trial per fit.
pub fn check_insample_bound(in_sample_residuals: &[f64], class_size: usize, delta: f64) -> Result<BoundReport> {
    if class_size == 0 || !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid("need class_size ≥ 1 and delta in (0, 1)"));
    }
    let bound = 8.0 * (class_size as f64 / delta).ln();
    let flags: Vec<bool> = in_sample_residuals.iter().map(|&r| r > bound).collect();
    Ok(frequency_report("insample_bound", &flags, delta))
}

/// Per-trial worst slack of E_μ(g₁−g₂)² ≤ (2/n)Σ(g₁−g₂)²(zᵢ) + (80/3n)log(2|G|/δ)
/// over all member pairs, given the population and design distances.
pub fn generalization_slack(population: &[Vec<f64>], design: &[Vec<f64>], n: usize, class_size: usize, delta: f64) -> f64 {
    let n = n as f64;
    let extra = 80.0 / (3.0 * n) * (2.0 * class_size as f64 / delta).ln();
    let mut worst = f64::NEG_INFINITY;
    for (pop_row, des_row) in population.iter().zip(design) {
        for (&pop, &des) in pop_row.iter().zip(des_row) {
            worst = worst.max(pop - (2.0 / n * des + extra));
        }
    }
    worst
}

/// Envelope 44·log(2|G|/δ)/n on the population error of the estimate.
pub fn fast_rate_envelope(n: usize, class_size: usize, delta: f64) -> f64 {
    44.0 * (2.0 * class_size as f64 / delta).ln() / n as f64
}
