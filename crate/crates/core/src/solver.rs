//! Self-play mirror descent-ascent and a Nash-equilibrium oracle.
//!
//! Each self-play step updates both players simultaneously from the payoff
//! vectors of the current pair:
//!
//! ```text
//! π₁⁽ᵗ⁺¹⁾(a|x) ∝ π₁⁽ᵗ⁾(a|x)^{1−α/η} · exp(α f₁(x,a)) · ref₁(a|x)^{α/η}
//! π₂⁽ᵗ⁺¹⁾(a|x) ∝ π₂⁽ᵗ⁾(a|x)^{1−α/η} · exp(−α f₂(x,a)) · ref₂(a|x)^{α/η}
//! ```
//!
//! computed in log-space with one renormalization per row. With the default
//! schedule α_t = 2η/(t+2) the last iterate converges to the regularized
//! equilibrium with E_x[KL(π̂‖π⁽ᵀ⁾)] ≤ 16η²/(T+1).

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::game::{
    best_response_logits, expected_payoffs, kl_divergence, l1_distance, ln_floor, softmax_in_place,
    softmax_unchecked, GameConfig, JointPolicy, PayoffTable, Player,
};
use crate::io::fmt_f64;
use crate::scalar::Scalar;

/// Iterations between fixed-point residual evaluations.
pub const RESIDUAL_CADENCE: usize = 50;

/// Default oracle tolerance for equilibria of estimated games.
pub const EMPIRICAL_TOL: f64 = 1e-10;
/// Default oracle tolerance for ground-truth equilibria.
pub const TRUTH_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITERS: usize = 1_000_000;

/// Residual below which the oracle switches on Newton refinement.
const POLISH_THRESHOLD: f64 = 1e-3;
const NEWTON_MAX_STEPS: usize = 30;

/// α_t = 2η/(t+2).
pub fn default_learning_rate<T: Scalar>(eta: T, t: usize) -> T {
    T::lit(2.0) * eta / T::lit((t + 2) as f64)
}

/// Payoff vectors against the opponent at context `x`:
/// f₁(a₁) = E_{a₂∼π₂} g(x,a₁,a₂), f₂(a₂) = E_{a₁∼π₁} g(x,a₁,a₂).
pub fn payoff_vectors<T: Scalar>(g: &PayoffTable<T>, pi: &JointPolicy<T>, x: usize) -> (Vec<T>, Vec<T>) {
    (
        expected_payoffs(g, x, pi.p2.row(x), Player::One),
        expected_payoffs(g, x, pi.p1.row(x), Player::Two),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelfPlayState<T> {
    pub t: usize,
    pub pi: JointPolicy<T>,
}

impl<T: Scalar> SelfPlayState<T> {
    /// The reference pair at t = 0.
    pub fn initial(cfg: &GameConfig<T>) -> Self {
        SelfPlayState { t: 0, pi: cfg.reference_pair() }
    }
}

fn check_rate<T: Scalar>(alpha: T, eta: T) -> Result<T> {
    let ratio = alpha / eta;
    if !(ratio > T::zero()) || ratio > T::one() || !ratio.is_finite() {
        return Err(Error::invalid(format!(
            "learning rate {alpha} must satisfy 0 < alpha/eta <= 1 (eta = {eta})"
        )));
    }
    Ok(ratio)
}

/// Updates one player's row in place from its payoff vector.
fn update_row<T: Scalar>(row: &mut [T], payoffs: &[T], reference: &[T], alpha: T, ratio: T, sign: T, logits: &mut Vec<T>) {
    logits.clear();
    let keep = T::one() - ratio;
    for ((&p, &f), &r) in row.iter().zip(payoffs).zip(reference) {
        if r > T::zero() {
            // keep == 0 must drop the previous iterate entirely, even where it underflowed.
            let prev = if keep > T::zero() { keep * ln_floor(p.max(T::log_floor())) } else { T::zero() };
            logits.push(prev + sign * alpha * f + ratio * ln_floor(r));
        } else {
            logits.push(T::neg_infinity());
        }
    }
    softmax_in_place(logits);
    row.copy_from_slice(logits);
}

fn step_in_place<T: Scalar>(
    pi: &mut JointPolicy<T>,
    g: &PayoffTable<T>,
    cfg: &GameConfig<T>,
    alpha: T,
    order: [Player; 2],
    scratch: &mut Vec<T>,
) -> Result<()> {
    let ratio = check_rate(alpha, cfg.eta)?;
    for x in 0..g.num_contexts() {
        // Both payoff vectors come from the state-t pair before either row moves.
        let (f1, f2) = payoff_vectors(g, pi, x);
        for player in order {
            let (f, sign) = match player {
                Player::One => (&f1, T::one()),
                Player::Two => (&f2, -T::one()),
            };
            let reference = cfg.reference(player).row(x);
            update_row(pi.get_mut(player).row_mut(x), f, reference, alpha, ratio, sign, scratch);
        }
    }
    Ok(())
}

fn check_game<T: Scalar>(g: &PayoffTable<T>, cfg: &GameConfig<T>) -> Result<()> {
    if cfg.num_contexts() != g.num_contexts() || cfg.num_actions() != g.num_actions() {
        return Err(Error::invalid("references do not match the payoff table dimensions"));
    }
    Ok(())
}

/// One simultaneous mirror descent-ascent step.
pub fn selfplay_step<T: Scalar>(
    state: &SelfPlayState<T>,
    g: &PayoffTable<T>,
    cfg: &GameConfig<T>,
    alpha: T,
) -> Result<SelfPlayState<T>> {
    check_game(g, cfg)?;
    let mut pi = state.pi.clone();
    step_in_place(&mut pi, g, cfg, alpha, Player::BOTH, &mut Vec::new())?;
    Ok(SelfPlayState { t: state.t + 1, pi })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRecord<T> {
    pub t: usize,
    /// Schedule value α_t, the rate applied when leaving iterate t.
    pub alpha: T,
    /// E_x[KL(anchor₁‖π₁⁽ᵗ⁾) + KL(anchor₂‖π₂⁽ᵗ⁾)] when an anchor was supplied.
    pub v_t: Option<T>,
    /// Fixed-point residual of iterate t, at the check cadence.
    pub residual: Option<T>,
}

/// Per-iteration diagnostics of a self-play run, one record per iterate
/// t = 0..=T.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelfPlayTrace<T> {
    pub eta: T,
    pub records: Vec<TraceRecord<T>>,
}

impl<T: Scalar> SelfPlayTrace<T> {
    pub fn has_anchor(&self) -> bool {
        !self.records.is_empty() && self.records.iter().all(|r| r.v_t.is_some())
    }

    pub fn last(&self) -> Option<&TraceRecord<T>> {
        self.records.last()
    }

    /// CSV with header `t,alpha,V_t,residual`; empty cells where a value was
    /// not recorded.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,alpha,V_t,residual")?;
        let opt = |v: Option<T>| v.map(|v| fmt_f64(v.as_f64())).unwrap_or_default();
        for r in &self.records {
            writeln!(out, "{},{},{},{}", r.t, fmt_f64(r.alpha.as_f64()), opt(r.v_t), opt(r.residual))?;
        }
        Ok(())
    }
}

/// E_x[KL(anchor₁‖π₁) + KL(anchor₂‖π₂)].
pub fn anchor_divergence<T: Scalar>(anchor: &JointPolicy<T>, pi: &JointPolicy<T>, rho: &[T]) -> Result<T> {
    let mut total = T::zero();
    for (x, &w) in rho.iter().enumerate() {
        if w > T::zero() {
            let kl = kl_divergence(anchor.p1.row(x), pi.p1.row(x))? + kl_divergence(anchor.p2.row(x), pi.p2.row(x))?;
            total = total + w * kl;
        }
    }
    Ok(total)
}

/// Runs `iterations` self-play steps from the reference pair with the
/// default schedule, returning the last iterate and its trace.
pub fn selfplay_run<T: Scalar>(
    g: &PayoffTable<T>,
    cfg: &GameConfig<T>,
    rho: &[T],
    iterations: usize,
    anchor: Option<&JointPolicy<T>>,
) -> Result<(JointPolicy<T>, SelfPlayTrace<T>)> {
    let mut checkpoints = Vec::new();
    let (pi, trace) = selfplay_run_with_checkpoints(g, cfg, rho, iterations, anchor, &[], &mut checkpoints)?;
    Ok((pi, trace))
}

/// As [`selfplay_run`], additionally cloning the iterate at each `t` listed
/// in `checkpoints` (ascending) into `snapshots`.
pub fn selfplay_run_with_checkpoints<T: Scalar>(
    g: &PayoffTable<T>,
    cfg: &GameConfig<T>,
    rho: &[T],
    iterations: usize,
    anchor: Option<&JointPolicy<T>>,
    checkpoints: &[usize],
    snapshots: &mut Vec<(usize, JointPolicy<T>)>,
) -> Result<(JointPolicy<T>, SelfPlayTrace<T>)> {
    check_game(g, cfg)?;
    if rho.len() != g.num_contexts() {
        return Err(Error::invalid("rho does not match the number of contexts"));
    }
    let mut pi = cfg.reference_pair();
    let mut records = Vec::with_capacity(iterations + 1);
    let mut scratch = Vec::with_capacity(g.num_actions());
    let mut next_checkpoint = checkpoints.iter().peekable();
    for t in 0..=iterations {
        let v_t = anchor.map(|a| anchor_divergence(a, &pi, rho)).transpose()?;
        let residual = (t % RESIDUAL_CADENCE == 0)
            .then(|| fixed_point_residual(g, &pi, cfg))
            .transpose()?;
        let alpha = default_learning_rate(cfg.eta, t);
        records.push(TraceRecord { t, alpha, v_t, residual });
        while next_checkpoint.peek().is_some_and(|&&c| c <= t) {
            if *next_checkpoint.next().unwrap() == t {
                snapshots.push((t, pi.clone()));
            }
        }
        if t < iterations {
            step_in_place(&mut pi, g, cfg, alpha, Player::BOTH, &mut scratch)?;
        }
    }
    Ok((pi, SelfPlayTrace { eta: cfg.eta, records }))
}

/// max over contexts and players of ‖π_i(·|x) − BR_i(π_{−i})(·|x)‖₁; zero
/// exactly at the regularized equilibrium of `g`.
pub fn fixed_point_residual<T: Scalar>(g: &PayoffTable<T>, pi: &JointPolicy<T>, cfg: &GameConfig<T>) -> Result<T> {
    check_game(g, cfg)?;
    if pi.num_contexts() != g.num_contexts() || pi.num_actions() != g.num_actions() {
        return Err(Error::invalid("joint policy does not match the game dimensions"));
    }
    let mut worst = T::zero();
    for x in 0..g.num_contexts() {
        worst = worst.max(context_residual(g, cfg, x, pi.p1.row(x), pi.p2.row(x)));
    }
    Ok(worst)
}

fn context_residual<T: Scalar>(g: &PayoffTable<T>, cfg: &GameConfig<T>, x: usize, p1: &[T], p2: &[T]) -> T {
    let q1 = softmax_unchecked(&best_response_logits(g, p2, Player::One, cfg, x));
    let q2 = softmax_unchecked(&best_response_logits(g, p1, Player::Two, cfg, x));
    l1_distance(p1, &q1).max(l1_distance(p2, &q2))
}

/// Regularized Nash equilibrium of `g` to fixed-point residual `tol`.
///
/// Runs self-play with the default schedule, checking the residual every
/// [`RESIDUAL_CADENCE`] iterations. Once the residual drops below 1e−3 each
/// context is refined with Newton's method on the softmax fixed-point
/// equations; the schedule alone only closes the residual at rate O(1/t).
/// Self-play resumes from the refined pair if refinement stalls, which is
/// sound because the equilibrium is a fixed point of every step.
pub fn nash_oracle<T: Scalar>(g: &PayoffTable<T>, cfg: &GameConfig<T>, tol: T, max_iters: usize) -> Result<JointPolicy<T>> {
    check_game(g, cfg)?;
    if !(tol > T::zero()) {
        return Err(Error::invalid(format!("tolerance must be positive, got {tol}")));
    }
    let mut pi = cfg.reference_pair();
    let mut scratch = Vec::new();
    let mut t = 0;
    loop {
        let mut residual = fixed_point_residual(g, &pi, cfg)?;
        if residual <= tol {
            return Ok(pi);
        }
        if residual <= T::lit(POLISH_THRESHOLD) {
            for x in 0..g.num_contexts() {
                newton_refine_context(g, cfg, x, &mut pi, tol);
            }
            residual = fixed_point_residual(g, &pi, cfg)?;
            if residual <= tol {
                return Ok(pi);
            }
        }
        if t >= max_iters {
            return Err(Error::NonConvergence { iterations: t, residual: residual.as_f64() });
        }
        let block = RESIDUAL_CADENCE.min(max_iters - t);
        for _ in 0..block {
            step_in_place(&mut pi, g, cfg, default_learning_rate(cfg.eta, t), Player::BOTH, &mut scratch)?;
            t += 1;
        }
    }
}

/// Newton iterations on R(p₁,p₂) = (p₁ − σ(ηGp₂ + log ref₁), p₂ − σ(−ηGᵀp₁ + log ref₂)).
/// Steps are damped to keep rows positive and accepted only when they reduce
/// the residual.
fn newton_refine_context<T: Scalar>(g: &PayoffTable<T>, cfg: &GameConfig<T>, x: usize, pi: &mut JointPolicy<T>, tol: T) {
    let na = g.num_actions();
    let n = 2 * na;
    let m = g.context(x);
    let eta = cfg.eta;
    let mut p: Vec<T> = pi.p1.row(x).iter().chain(pi.p2.row(x)).copied().collect();
    let eval = |p: &[T]| -> (Vec<T>, Vec<T>, T) {
        let q1 = softmax_unchecked(&best_response_logits(g, &p[na..], Player::One, cfg, x));
        let q2 = softmax_unchecked(&best_response_logits(g, &p[..na], Player::Two, cfg, x));
        let r = l1_distance(&p[..na], &q1).max(l1_distance(&p[na..], &q2));
        (q1, q2, r)
    };
    let (mut q1, mut q2, mut res) = eval(&p);
    let floor = tol * T::lit(1e-3);
    for _ in 0..NEWTON_MAX_STEPS {
        if res <= floor {
            break;
        }
        let mut jac = vec![T::zero(); n * n];
        for i in 0..n {
            jac[i * n + i] = T::one();
        }
        // ∂q₁/∂p₂ = S₁·ηG and ∂q₂/∂p₁ = −S₂·ηGᵀ, with S = diag(q) − qqᵀ.
        for i in 0..na {
            for j in 0..na {
                let mut d1 = T::zero();
                let mut d2 = T::zero();
                for k in 0..na {
                    let s1 = if i == k { q1[i] - q1[i] * q1[k] } else { -q1[i] * q1[k] };
                    let s2 = if i == k { q2[i] - q2[i] * q2[k] } else { -q2[i] * q2[k] };
                    d1 = d1 + s1 * m[k * na + j];
                    d2 = d2 + s2 * m[j * na + k];
                }
                jac[i * n + na + j] = -eta * d1;
                jac[(na + i) * n + j] = eta * d2;
            }
        }
        let mut rhs: Vec<T> = (0..na)
            .map(|i| q1[i] - p[i])
            .chain((0..na).map(|i| q2[i] - p[na + i]))
            .collect();
        if solve_dense(&mut jac, &mut rhs, n).is_none() {
            break;
        }
        let mut scale = T::one();
        let mut accepted = false;
        for _ in 0..40 {
            let cand: Vec<T> = p.iter().zip(&rhs).map(|(&v, &d)| v + scale * d).collect();
            let positive = cand.iter().zip(&p).all(|(&c, &old)| if old > T::zero() { c > T::zero() && c.is_finite() } else { c == T::zero() });
            if positive {
                let (c1, c2, r) = eval(&cand);
                if r < res {
                    p = cand;
                    q1 = c1;
                    q2 = c2;
                    res = r;
                    accepted = true;
                    break;
                }
            }
            scale = scale * T::lit(0.5);
        }
        if !accepted {
            break;
        }
    }
    // Renormalize so rows stay exact probability vectors.
    for (player, range) in [(Player::One, 0..na), (Player::Two, na..n)] {
        let row = &p[range];
        let total = row.iter().fold(T::zero(), |s, &v| s + v);
        let dst = pi.get_mut(player).row_mut(x);
        for (d, &v) in dst.iter_mut().zip(row) {
            *d = v / total;
        }
    }
}

/// Solves `a · x = b` in place (row-major `a`), Gaussian elimination with
/// partial pivoting. Returns `None` for a numerically singular system.
fn solve_dense<T: Scalar>(a: &mut [T], b: &mut [T], n: usize) -> Option<()> {
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i * n + col].abs().partial_cmp(&a[j * n + col].abs()).unwrap())?;
        if !(a[pivot * n + col].abs() > T::epsilon()) {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            b.swap(col, pivot);
        }
        let diag = a[col * n + col];
        for row in col + 1..n {
            let factor = a[row * n + col] / diag;
            if factor == T::zero() {
                continue;
            }
            for k in col..n {
                a[row * n + k] = a[row * n + k] - factor * a[col * n + k];
            }
            b[row] = b[row] - factor * b[col];
        }
    }
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc = acc - a[row * n + k] * b[k];
        }
        b[row] = acc / a[row * n + row];
    }
    b.iter().all(|v| v.is_finite()).then_some(())
}
