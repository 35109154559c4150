//! KL-regularized two-player zero-sum contextual games.
//!
//! Player 1 maximizes and player 2 minimizes
//!
//! ```text
//! J(g, π₁, π₂) = E_{x∼ρ} [ E_{a₁∼π₁, a₂∼π₂} g(x,a₁,a₂)
//!                           − η⁻¹ KL(π₁(·|x) ‖ ref₁(·|x))
//!                           + η⁻¹ KL(π₂(·|x) ‖ ref₂(·|x)) ].
//! ```
//!
//! Every best response of this objective is a softmax of η-scaled expected
//! payoffs plus reference log-probabilities, so best-response values and the
//! duality gap are computed in closed form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// One of the two players. Player one maximizes the objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Player {
    One,
    Two,
}

impl Player {
    pub fn opponent(self) -> Player {
        match self {
            Player::One => Player::Two,
            Player::Two => Player::One,
        }
    }

    /// +1 for the maximizer, −1 for the minimizer.
    pub fn sign<T: Scalar>(self) -> T {
        match self {
            Player::One => T::one(),
            Player::Two => -T::one(),
        }
    }

    pub const BOTH: [Player; 2] = [Player::One, Player::Two];
}

/// Payoff table g(x, a₁, a₂) with entries in [−1, 1], stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PayoffTable<T> {
    num_contexts: usize,
    num_actions: usize,
    values: Vec<T>,
}

impl<T: Scalar> PayoffTable<T> {
    pub fn new(num_contexts: usize, num_actions: usize, values: Vec<T>) -> Result<Self> {
        if num_contexts == 0 || num_actions == 0 {
            return Err(Error::invalid("payoff table needs at least one context and one action"));
        }
        let expected = num_contexts * num_actions * num_actions;
        if values.len() != expected {
            return Err(Error::invalid(format!(
                "payoff table has {} entries, expected {expected}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !(v.abs() <= T::one())) {
            return Err(Error::invalid(format!(
                "payoff entry {i} = {} outside [-1, 1]",
                values[i]
            )));
        }
        Ok(PayoffTable { num_contexts, num_actions, values })
    }

    pub fn from_fn(
        num_contexts: usize,
        num_actions: usize,
        mut f: impl FnMut(usize, usize, usize) -> T,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(num_contexts * num_actions * num_actions);
        for x in 0..num_contexts {
            for a1 in 0..num_actions {
                for a2 in 0..num_actions {
                    values.push(f(x, a1, a2));
                }
            }
        }
        Self::new(num_contexts, num_actions, values)
    }

    pub fn constant(num_contexts: usize, num_actions: usize, c: T) -> Result<Self> {
        Self::new(num_contexts, num_actions, vec![c; num_contexts * num_actions * num_actions])
    }

    pub fn num_contexts(&self) -> usize {
        self.num_contexts
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    #[inline]
    pub fn index(&self, x: usize, a1: usize, a2: usize) -> usize {
        (x * self.num_actions + a1) * self.num_actions + a2
    }

    #[inline]
    pub fn get(&self, x: usize, a1: usize, a2: usize) -> T {
        self.values[self.index(x, a1, a2)]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// The |A|×|A| payoff matrix of context `x`, row index a₁.
    pub fn context(&self, x: usize) -> &[T] {
        let stride = self.num_actions * self.num_actions;
        &self.values[x * stride..(x + 1) * stride]
    }

    pub fn same_shape(&self, other: &PayoffTable<T>) -> bool {
        self.num_contexts == other.num_contexts && self.num_actions == other.num_actions
    }

    /// Iterates `(x, a1, a2, value)` in storage order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, usize, T)> + '_ {
        let na = self.num_actions;
        self.values.iter().enumerate().map(move |(i, &v)| {
            let a2 = i % na;
            let a1 = (i / na) % na;
            let x = i / (na * na);
            (x, a1, a2, v)
        })
    }

    /// Maps every entry and clips the result into [−1, 1].
    pub fn map_clipped(&self, mut f: impl FnMut(usize, usize, usize, T) -> T) -> Self {
        let values = self
            .iter()
            .map(|(x, a1, a2, v)| f(x, a1, a2, v).max(-T::one()).min(T::one()))
            .collect();
        PayoffTable { num_contexts: self.num_contexts, num_actions: self.num_actions, values }
    }

    pub fn convert<U: Scalar>(&self) -> PayoffTable<U> {
        PayoffTable {
            num_contexts: self.num_contexts,
            num_actions: self.num_actions,
            values: self.values.iter().map(|v| U::lit(v.as_f64())).collect(),
        }
    }
}

/// Per-context action distributions for one player.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy<T> {
    num_contexts: usize,
    num_actions: usize,
    probs: Vec<T>,
}

impl<T: Scalar> Policy<T> {
    /// Builds a policy from row-major probabilities, checking that each row
    /// is a probability vector.
    pub fn new(num_contexts: usize, num_actions: usize, probs: Vec<T>) -> Result<Self> {
        if num_contexts == 0 || num_actions == 0 {
            return Err(Error::invalid("policy needs at least one context and one action"));
        }
        if probs.len() != num_contexts * num_actions {
            return Err(Error::invalid(format!(
                "policy has {} entries, expected {}",
                probs.len(),
                num_contexts * num_actions
            )));
        }
        let tol = T::normalization_tol(num_actions);
        for (x, row) in probs.chunks(num_actions).enumerate() {
            check_distribution(row).map_err(|e| Error::invalid(format!("policy row {x}: {e}")))?;
            let total = row.iter().fold(T::zero(), |s, &p| s + p);
            if (total - T::one()).abs() > tol {
                return Err(Error::invalid(format!("policy row {x} sums to {total}")));
            }
        }
        Ok(Policy { num_contexts, num_actions, probs })
    }

    /// Builds a policy from nonnegative weights, normalizing each row.
    pub fn from_weights(num_contexts: usize, num_actions: usize, weights: Vec<T>) -> Result<Self> {
        if weights.len() != num_contexts * num_actions || num_actions == 0 {
            return Err(Error::invalid("weight table has the wrong shape"));
        }
        let mut probs = weights;
        for row in probs.chunks_mut(num_actions) {
            let total = row.iter().fold(T::zero(), |s, &p| s + p);
            if !(total > T::zero()) || row.iter().any(|p| !(*p >= T::zero()) || !p.is_finite()) {
                return Err(Error::invalid("weights must be finite, nonnegative, and not all zero"));
            }
            row.iter_mut().for_each(|p| *p = *p / total);
        }
        Self::new(num_contexts, num_actions, probs)
    }

    pub fn uniform(num_contexts: usize, num_actions: usize) -> Self {
        let p = T::one() / T::lit(num_actions as f64);
        Policy { num_contexts, num_actions, probs: vec![p; num_contexts * num_actions] }
    }

    /// Same row at every context.
    pub fn repeat_row(num_contexts: usize, row: &[T]) -> Result<Self> {
        let probs = (0..num_contexts).flat_map(|_| row.iter().copied()).collect();
        Self::new(num_contexts, row.len(), probs)
    }

    pub(crate) fn from_rows_unchecked(num_contexts: usize, num_actions: usize, probs: Vec<T>) -> Self {
        debug_assert_eq!(probs.len(), num_contexts * num_actions);
        Policy { num_contexts, num_actions, probs }
    }

    pub fn num_contexts(&self) -> usize {
        self.num_contexts
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    #[inline]
    pub fn row(&self, x: usize) -> &[T] {
        &self.probs[x * self.num_actions..(x + 1) * self.num_actions]
    }

    pub(crate) fn row_mut(&mut self, x: usize) -> &mut [T] {
        &mut self.probs[x * self.num_actions..(x + 1) * self.num_actions]
    }

    #[inline]
    pub fn prob(&self, x: usize, a: usize) -> T {
        self.probs[x * self.num_actions + a]
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        self.probs.chunks(self.num_actions)
    }

    pub fn same_shape(&self, other: &Policy<T>) -> bool {
        self.num_contexts == other.num_contexts && self.num_actions == other.num_actions
    }

    /// Fails when some action with positive reference mass has zero
    /// probability here.
    pub fn check_support(&self, reference: &Policy<T>) -> Result<()> {
        if !self.same_shape(reference) {
            return Err(Error::invalid("policy and reference differ in shape"));
        }
        for (i, (&p, &r)) in self.probs.iter().zip(&reference.probs).enumerate() {
            if r > T::zero() && !(p > T::zero()) {
                return Err(Error::invalid(format!(
                    "policy puts zero mass on action {} of context {} covered by the reference",
                    i % self.num_actions,
                    i / self.num_actions
                )));
            }
        }
        Ok(())
    }

    /// ℓ1 distance between the rows at context `x`.
    pub fn l1_at(&self, other: &Policy<T>, x: usize) -> T {
        l1_distance(self.row(x), other.row(x))
    }

    pub fn convert<U: Scalar>(&self) -> Policy<U> {
        Policy {
            num_contexts: self.num_contexts,
            num_actions: self.num_actions,
            probs: self.probs.iter().map(|v| U::lit(v.as_f64())).collect(),
        }
    }
}

/// A policy for each player.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointPolicy<T> {
    pub p1: Policy<T>,
    pub p2: Policy<T>,
}

impl<T: Scalar> JointPolicy<T> {
    pub fn new(p1: Policy<T>, p2: Policy<T>) -> Result<Self> {
        if !p1.same_shape(&p2) {
            return Err(Error::invalid("joint policy components differ in shape"));
        }
        Ok(JointPolicy { p1, p2 })
    }

    pub fn uniform(num_contexts: usize, num_actions: usize) -> Self {
        JointPolicy {
            p1: Policy::uniform(num_contexts, num_actions),
            p2: Policy::uniform(num_contexts, num_actions),
        }
    }

    pub fn get(&self, player: Player) -> &Policy<T> {
        match player {
            Player::One => &self.p1,
            Player::Two => &self.p2,
        }
    }

    pub fn get_mut(&mut self, player: Player) -> &mut Policy<T> {
        match player {
            Player::One => &mut self.p1,
            Player::Two => &mut self.p2,
        }
    }

    /// Replaces one component, keeping the other.
    pub fn with(&self, player: Player, policy: Policy<T>) -> Self {
        let mut out = self.clone();
        *out.get_mut(player) = policy;
        out
    }

    pub fn num_contexts(&self) -> usize {
        self.p1.num_contexts()
    }

    pub fn num_actions(&self) -> usize {
        self.p1.num_actions()
    }

    /// Joint ℓ1 distance at a context: the sum of the per-player distances.
    pub fn l1_at(&self, other: &JointPolicy<T>, x: usize) -> T {
        self.p1.l1_at(&other.p1, x) + self.p2.l1_at(&other.p2, x)
    }

    /// E_{x∼ρ} ‖π(·|x) − π′(·|x)‖₁².
    pub fn mean_sq_l1(&self, other: &JointPolicy<T>, rho: &[T]) -> T {
        rho.iter()
            .enumerate()
            .fold(T::zero(), |acc, (x, &w)| {
                let d = self.l1_at(other, x);
                acc + w * d * d
            })
    }

    pub fn convert<U: Scalar>(&self) -> JointPolicy<U> {
        JointPolicy { p1: self.p1.convert(), p2: self.p2.convert() }
    }
}

/// Regularization strength and reference policies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameConfig<T> {
    pub eta: T,
    pub ref1: Policy<T>,
    pub ref2: Policy<T>,
}

impl<T: Scalar> GameConfig<T> {
    pub fn new(eta: T, ref1: Policy<T>, ref2: Policy<T>) -> Result<Self> {
        if !(eta > T::zero()) || !eta.is_finite() {
            return Err(Error::invalid(format!("eta must be positive and finite, got {eta}")));
        }
        if !ref1.same_shape(&ref2) {
            return Err(Error::invalid("reference policies differ in shape"));
        }
        Ok(GameConfig { eta, ref1, ref2 })
    }

    /// Uniform references for both players.
    pub fn uniform(num_contexts: usize, num_actions: usize, eta: T) -> Result<Self> {
        Self::new(eta, Policy::uniform(num_contexts, num_actions), Policy::uniform(num_contexts, num_actions))
    }

    pub fn reference(&self, player: Player) -> &Policy<T> {
        match player {
            Player::One => &self.ref1,
            Player::Two => &self.ref2,
        }
    }

    /// Both references as a joint policy; this is the self-play starting point.
    pub fn reference_pair(&self) -> JointPolicy<T> {
        JointPolicy { p1: self.ref1.clone(), p2: self.ref2.clone() }
    }

    pub fn num_contexts(&self) -> usize {
        self.ref1.num_contexts()
    }

    pub fn num_actions(&self) -> usize {
        self.ref1.num_actions()
    }

    pub fn convert<U: Scalar>(&self) -> GameConfig<U> {
        GameConfig { eta: U::lit(self.eta.as_f64()), ref1: self.ref1.convert(), ref2: self.ref2.convert() }
    }
}

/// Ground-truth environment: context distribution plus payoff table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameInstance<T> {
    pub rho: Vec<T>,
    pub payoff: PayoffTable<T>,
}

impl<T: Scalar> GameInstance<T> {
    pub fn new(rho: Vec<T>, payoff: PayoffTable<T>) -> Result<Self> {
        if rho.len() != payoff.num_contexts() {
            return Err(Error::invalid(format!(
                "rho has {} entries for {} contexts",
                rho.len(),
                payoff.num_contexts()
            )));
        }
        check_distribution(&rho).map_err(|e| Error::invalid(format!("rho: {e}")))?;
        let total = rho.iter().fold(T::zero(), |s, &p| s + p);
        if (total - T::one()).abs() > T::normalization_tol(rho.len()) {
            return Err(Error::invalid(format!("rho sums to {total}")));
        }
        Ok(GameInstance { rho, payoff })
    }

    pub fn num_contexts(&self) -> usize {
        self.payoff.num_contexts()
    }

    pub fn num_actions(&self) -> usize {
        self.payoff.num_actions()
    }
}

/// Logits of one player's softmax policy at one context.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitVector<T>(Vec<T>);

impl<T: Scalar> LogitVector<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("logits must be finite"));
        }
        Ok(LogitVector(values))
    }

    pub fn values(&self) -> &[T] {
        &self.0
    }

    pub fn softmax(&self) -> Vec<T> {
        softmax_unchecked(&self.0)
    }

    /// ‖z − z′‖∞.
    pub fn sup_distance(&self, other: &LogitVector<T>) -> T {
        self.0
            .iter()
            .zip(&other.0)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()))
    }
}

fn check_distribution<T: Scalar>(row: &[T]) -> std::result::Result<(), String> {
    match row.iter().position(|p| !(*p >= T::zero()) || !p.is_finite()) {
        Some(i) => Err(format!("entry {i} = {} is not a finite nonnegative number", row[i])),
        None => Ok(()),
    }
}

/// Softmax with max-subtraction.
pub fn softmax<T: Scalar>(z: &[T]) -> Result<Vec<T>> {
    if z.is_empty() {
        return Err(Error::invalid("softmax of an empty vector"));
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("softmax input must be finite"));
    }
    Ok(softmax_unchecked(z))
}

/// Softmax that tolerates −∞ entries, which map to probability zero. At
/// least one entry must be finite.
pub(crate) fn softmax_unchecked<T: Scalar>(z: &[T]) -> Vec<T> {
    let mut out = z.to_vec();
    softmax_in_place(&mut out);
    out
}

pub(crate) fn softmax_in_place<T: Scalar>(z: &mut [T]) {
    let max = z.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
    debug_assert!(max.is_finite(), "softmax needs a finite entry");
    let mut total = T::zero();
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        total = total + *v;
    }
    for v in z.iter_mut() {
        *v = *v / total;
    }
}

/// Σ_a p(a) log(p(a)/q(a)), with 0·log 0 = 0.
pub fn kl_divergence<T: Scalar>(p: &[T], q: &[T]) -> Result<T> {
    if p.len() != q.len() {
        return Err(Error::invalid(format!("KL of vectors of length {} and {}", p.len(), q.len())));
    }
    let floor = T::log_floor();
    let mut kl = T::zero();
    for (a, (&pa, &qa)) in p.iter().zip(q).enumerate() {
        if pa <= T::zero() {
            continue;
        }
        if !(qa > T::zero()) {
            return Err(Error::domain(format!("p({a}) = {pa} > 0 but q({a}) = 0")));
        }
        kl = kl + pa * (pa.max(floor).ln() - qa.max(floor).ln());
    }
    Ok(kl.max(T::zero()))
}

pub(crate) fn l1_distance<T: Scalar>(p: &[T], q: &[T]) -> T {
    p.iter().zip(q).fold(T::zero(), |s, (&a, &b)| s + (a - b).abs())
}

pub(crate) fn ln_floor<T: Scalar>(p: T) -> T {
    if p > T::zero() {
        p.max(T::log_floor()).ln()
    } else {
        T::neg_infinity()
    }
}

/// Expected payoff of each of `player`'s actions at context `x` against the
/// opponent distribution `opponent_row`, in the player-one payoff scale:
/// `f₁(a) = Σ_{a₂} opp(a₂) g(x,a,a₂)` or `f₂(a) = Σ_{a₁} opp(a₁) g(x,a₁,a)`.
pub fn expected_payoffs<T: Scalar>(g: &PayoffTable<T>, x: usize, opponent_row: &[T], player: Player) -> Vec<T> {
    let na = g.num_actions();
    let m = g.context(x);
    match player {
        Player::One => (0..na)
            .map(|a1| {
                m[a1 * na..(a1 + 1) * na]
                    .iter()
                    .zip(opponent_row)
                    .fold(T::zero(), |s, (&v, &p)| s + v * p)
            })
            .collect(),
        Player::Two => {
            let mut out = vec![T::zero(); na];
            for (a1, &p) in opponent_row.iter().enumerate() {
                for (a2, o) in out.iter_mut().enumerate() {
                    *o = *o + p * m[a1 * na + a2];
                }
            }
            out
        }
    }
}

/// Best-response logits η·(±f) + log ref at context `x`; −∞ off the
/// reference support.
pub fn best_response_logits<T: Scalar>(
    g: &PayoffTable<T>,
    opponent_row: &[T],
    player: Player,
    cfg: &GameConfig<T>,
    x: usize,
) -> Vec<T> {
    let scale = cfg.eta * player.sign::<T>();
    expected_payoffs(g, x, opponent_row, player)
        .into_iter()
        .zip(cfg.reference(player).row(x))
        .map(|(f, &r)| scale * f + ln_floor(r))
        .collect()
}

fn check_dims<T: Scalar>(g: &PayoffTable<T>, cfg: &GameConfig<T>, rho: Option<&[T]>) -> Result<()> {
    if cfg.num_contexts() != g.num_contexts() || cfg.num_actions() != g.num_actions() {
        return Err(Error::invalid(format!(
            "game is {}x{} but references are {}x{}",
            g.num_contexts(),
            g.num_actions(),
            cfg.num_contexts(),
            cfg.num_actions()
        )));
    }
    if let Some(rho) = rho {
        if rho.len() != g.num_contexts() {
            return Err(Error::invalid(format!("rho has {} entries for {} contexts", rho.len(), g.num_contexts())));
        }
    }
    Ok(())
}

fn check_joint<T: Scalar>(g: &PayoffTable<T>, pi: &JointPolicy<T>) -> Result<()> {
    if pi.num_contexts() != g.num_contexts() || pi.num_actions() != g.num_actions() || !pi.p1.same_shape(&pi.p2) {
        return Err(Error::invalid("joint policy does not match the game dimensions"));
    }
    Ok(())
}

/// Regularized objective restricted to one context.
pub fn context_objective<T: Scalar>(
    g: &PayoffTable<T>,
    pi: &JointPolicy<T>,
    cfg: &GameConfig<T>,
    x: usize,
) -> Result<T> {
    let f1 = expected_payoffs(g, x, pi.p2.row(x), Player::One);
    let payoff = f1.iter().zip(pi.p1.row(x)).fold(T::zero(), |s, (&f, &p)| s + f * p);
    let kl1 = kl_divergence(pi.p1.row(x), cfg.ref1.row(x))?;
    let kl2 = kl_divergence(pi.p2.row(x), cfg.ref2.row(x))?;
    Ok(payoff + (kl2 - kl1) / cfg.eta)
}

/// The KL-regularized game objective J(g, π₁, π₂).
pub fn objective<T: Scalar>(g: &PayoffTable<T>, pi: &JointPolicy<T>, cfg: &GameConfig<T>, rho: &[T]) -> Result<T> {
    check_dims(g, cfg, Some(rho))?;
    check_joint(g, pi)?;
    let mut total = T::zero();
    for (x, &w) in rho.iter().enumerate() {
        if w > T::zero() {
            total = total + w * context_objective(g, pi, cfg, x)?;
        }
    }
    Ok(total)
}

/// Closed-form regularized best response of `player` at context `x`.
pub fn best_response<T: Scalar>(
    g: &PayoffTable<T>,
    opponent: &Policy<T>,
    player: Player,
    cfg: &GameConfig<T>,
    x: usize,
) -> Result<Vec<T>> {
    check_dims(g, cfg, None)?;
    if !opponent.same_shape(cfg.reference(player)) {
        return Err(Error::invalid("opponent policy does not match the game dimensions"));
    }
    if x >= g.num_contexts() {
        return Err(Error::invalid(format!("context {x} out of range")));
    }
    Ok(softmax_unchecked(&best_response_logits(g, opponent.row(x), player, cfg, x)))
}

/// Best response at every context.
pub fn best_response_policy<T: Scalar>(
    g: &PayoffTable<T>,
    opponent: &Policy<T>,
    player: Player,
    cfg: &GameConfig<T>,
) -> Result<Policy<T>> {
    let mut probs = Vec::with_capacity(g.num_contexts() * g.num_actions());
    for x in 0..g.num_contexts() {
        probs.extend(best_response(g, opponent, player, cfg, x)?);
    }
    Ok(Policy::from_rows_unchecked(g.num_contexts(), g.num_actions(), probs))
}

/// J(g, †, π₂) for `Player::One`, J(g, π₁, †) for `Player::Two`.
pub fn best_response_value<T: Scalar>(
    g: &PayoffTable<T>,
    pi: &JointPolicy<T>,
    responder: Player,
    cfg: &GameConfig<T>,
    rho: &[T],
) -> Result<T> {
    check_joint(g, pi)?;
    let br = best_response_policy(g, pi.get(responder.opponent()), responder, cfg)?;
    objective(g, &pi.with(responder, br), cfg, rho)
}

/// J(g, †, π₂) − J(g, π₁, †).
///
/// Returned unclamped; it is nonnegative up to rounding (≥ −1e−9 at desk
/// scale) and zero exactly at the regularized Nash equilibrium.
pub fn duality_gap<T: Scalar>(g: &PayoffTable<T>, pi: &JointPolicy<T>, cfg: &GameConfig<T>, rho: &[T]) -> Result<T> {
    Ok(best_response_value(g, pi, Player::One, cfg, rho)? - best_response_value(g, pi, Player::Two, cfg, rho)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn pennies() -> PayoffTable<f64> {
        PayoffTable::new(1, 2, vec![1.0, -1.0, -1.0, 1.0]).unwrap()
    }

    #[test]
    fn softmax_examples() {
        assert_eq!(softmax(&[0.0, 0.0]).unwrap(), vec![0.5, 0.5]);
        let p = softmax(&[2f64.ln(), 0.0]).unwrap();
        assert_abs_diff_eq!(p[0], 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p[1], 1.0 / 3.0, epsilon = 1e-15);
        let z = [0.3, -1.2, 2.5];
        let shifted: Vec<f64> = z.iter().map(|v| v + 7.3).collect();
        for (a, b) in softmax(&z).unwrap().iter().zip(softmax(&shifted).unwrap()) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn softmax_rejects_non_finite_and_survives_large_logits() {
        assert!(softmax(&[f64::NAN, 0.0]).is_err());
        assert!(softmax(&[f64::INFINITY, 0.0]).is_err());
        let p = softmax(&[1000.0f64, 999.0]).unwrap();
        assert!(p.iter().all(|v| v.is_finite()));
        assert_abs_diff_eq!(p[0] + p[1], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn kl_examples() {
        assert_eq!(kl_divergence(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        assert_abs_diff_eq!(kl_divergence(&[1.0, 0.0], &[0.5, 0.5]).unwrap(), 2f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(
            kl_divergence(&[0.5, 0.5], &[0.25, 0.75]).unwrap(),
            0.5 * (4.0f64 / 3.0).ln(),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(kl_divergence(&[0.5, 0.5], &[0.25, 0.75]).unwrap(), 0.143841, epsilon = 1e-6);
        assert!(matches!(kl_divergence(&[0.5, 0.5], &[1.0, 0.0]), Err(Error::Domain(_))));
        assert!(kl_divergence(&[0.0, 1.0], &[1.0, 0.0]).is_err());
        assert_eq!(kl_divergence(&[0.0, 1.0], &[0.0, 1.0]).unwrap(), 0.0);
    }

    #[test]
    fn objective_examples() {
        let cfg = GameConfig::uniform(2, 3, 1.5).unwrap();
        let rho = vec![0.4, 0.6];
        let refs = cfg.reference_pair();
        let zero = PayoffTable::constant(2, 3, 0.0).unwrap();
        assert_eq!(objective(&zero, &refs, &cfg, &rho).unwrap(), 0.0);
        let c = PayoffTable::constant(2, 3, 0.4).unwrap();
        assert_abs_diff_eq!(objective(&c, &refs, &cfg, &rho).unwrap(), 0.4, epsilon = 1e-15);

        let cfg = GameConfig::uniform(1, 2, 1.0).unwrap();
        let zero = PayoffTable::constant(1, 2, 0.0).unwrap();
        let pi = JointPolicy::new(
            Policy::new(1, 2, vec![1.0 - 1e-12, 1e-12]).unwrap(),
            Policy::uniform(1, 2),
        )
        .unwrap();
        assert_abs_diff_eq!(objective(&zero, &pi, &cfg, &[1.0]).unwrap(), -(2f64.ln()), epsilon = 1e-10);
    }

    #[test]
    fn objective_rejects_mismatched_dims() {
        let cfg = GameConfig::uniform(2, 2, 1.0).unwrap();
        let g = PayoffTable::constant(1, 2, 0.0).unwrap();
        assert!(objective(&g, &JointPolicy::uniform(1, 2), &cfg, &[1.0]).is_err());
        let g = PayoffTable::constant(2, 2, 0.0).unwrap();
        assert!(objective(&g, &JointPolicy::uniform(2, 2), &cfg, &[1.0]).is_err());
    }

    #[test]
    fn best_response_examples() {
        let cfg = GameConfig::uniform(1, 2, 1.0).unwrap();
        // g(x, a1, .) = r(a1), constant in a2.
        let g = PayoffTable::new(1, 2, vec![1.0, 1.0, -1.0, -1.0]).unwrap();
        let br = best_response(&g, &Policy::uniform(1, 2), Player::One, &cfg, 0).unwrap();
        assert_abs_diff_eq!(br[0], 0.880797, epsilon = 1e-6);
        assert_abs_diff_eq!(br[1], 0.119203, epsilon = 1e-6);

        let cfg2 = GameConfig::uniform(1, 2, 2.0).unwrap();
        let br = best_response(&g, &Policy::uniform(1, 2), Player::One, &cfg2, 0).unwrap();
        assert_abs_diff_eq!(br[0], 0.982014, epsilon = 1e-6);
        assert_abs_diff_eq!(br[1], 0.017986, epsilon = 1e-6);

        // Player two's payoff does not depend on its own action here.
        let br2 = best_response(&g, &Policy::new(1, 2, vec![0.2, 0.8]).unwrap(), Player::Two, &cfg, 0).unwrap();
        assert_abs_diff_eq!(br2[0], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn best_response_matches_grid_search() {
        // Maximize <f, p> - KL(p || uniform) over a fine grid of the 2-simplex.
        let cfg = GameConfig::uniform(1, 2, 1.0).unwrap();
        let g = PayoffTable::new(1, 2, vec![1.0, 1.0, -1.0, -1.0]).unwrap();
        let local = |p: f64| {
            let q = [p, 1.0 - p];
            (q[0] - q[1]) - kl_divergence(&q, &[0.5, 0.5]).unwrap()
        };
        let best = (1..100_000).map(|i| i as f64 / 100_000.0).fold((0.0, f64::NEG_INFINITY), |acc, p| {
            let v = local(p);
            if v > acc.1 { (p, v) } else { acc }
        });
        let br = best_response(&g, &Policy::uniform(1, 2), Player::One, &cfg, 0).unwrap();
        assert_abs_diff_eq!(br[0], best.0, epsilon = 2e-5);
    }

    #[test]
    fn best_response_values_and_gap_on_matching_pennies() {
        let g = pennies();
        for eta in [0.5, 1.0, 3.0] {
            let cfg = GameConfig::uniform(1, 2, eta).unwrap();
            let ne = JointPolicy::uniform(1, 2);
            assert_abs_diff_eq!(best_response_value(&g, &ne, Player::One, &cfg, &[1.0]).unwrap(), 0.0, epsilon = 1e-15);
            assert_abs_diff_eq!(best_response_value(&g, &ne, Player::Two, &cfg, &[1.0]).unwrap(), 0.0, epsilon = 1e-15);
            assert_abs_diff_eq!(duality_gap(&g, &ne, &cfg, &[1.0]).unwrap(), 0.0, epsilon = 1e-15);
        }

        // Independent evaluation: BR₂ = softmax([-0.8, 0.8]), then J by hand.
        let cfg = GameConfig::uniform(1, 2, 1.0).unwrap();
        let p1 = [0.9, 0.1];
        let e = (-0.8f64).exp();
        let e2 = 0.8f64.exp();
        let q = [e / (e + e2), e2 / (e + e2)];
        let payoff = p1[0] * (q[0] - q[1]) + p1[1] * (q[1] - q[0]);
        let kl = |v: [f64; 2]| v[0] * (2.0 * v[0]).ln() + v[1] * (2.0 * v[1]).ln();
        let expected = payoff - kl(p1) + kl(q);
        assert_abs_diff_eq!(expected, -0.6588177675, epsilon = 1e-9);

        let pi = JointPolicy::new(Policy::new(1, 2, p1.to_vec()).unwrap(), Policy::uniform(1, 2)).unwrap();
        let v2 = best_response_value(&g, &pi, Player::Two, &cfg, &[1.0]).unwrap();
        assert_abs_diff_eq!(v2, expected, epsilon = 1e-14);
        assert_abs_diff_eq!(duality_gap(&g, &pi, &cfg, &[1.0]).unwrap(), -expected, epsilon = 1e-14);
    }

    #[test]
    fn payoff_free_best_response_value() {
        let cfg = GameConfig::uniform(1, 3, 2.0).unwrap();
        let g = PayoffTable::constant(1, 3, 0.0).unwrap();
        let p2 = Policy::new(1, 3, vec![0.2, 0.3, 0.5]).unwrap();
        let pi = JointPolicy::new(Policy::new(1, 3, vec![0.6, 0.2, 0.2]).unwrap(), p2.clone()).unwrap();
        let v = best_response_value(&g, &pi, Player::One, &cfg, &[1.0]).unwrap();
        let kl2 = kl_divergence(p2.row(0), cfg.ref2.row(0)).unwrap();
        assert_abs_diff_eq!(v, kl2 / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn constructors_validate() {
        assert!(PayoffTable::new(1, 2, vec![0.0, 1.5, 0.0, 0.0]).is_err());
        assert!(PayoffTable::new(1, 2, vec![0.0; 3]).is_err());
        assert!(PayoffTable::new(1, 2, vec![f64::NAN, 0.0, 0.0, 0.0]).is_err());
        assert!(Policy::new(1, 2, vec![0.5, 0.6]).is_err());
        assert!(Policy::new(1, 2, vec![-0.1, 1.1]).is_err());
        assert!(GameConfig::uniform(1, 2, 0.0).is_err());
        assert!(GameInstance::new(vec![0.5, 0.6], PayoffTable::constant(2, 2, 0.0).unwrap()).is_err());
        let p = Policy::new(1, 2, vec![1.0, 0.0]).unwrap();
        assert!(p.check_support(&Policy::uniform(1, 2)).is_err());
    }

    #[test]
    fn generic_over_f32() {
        let cfg = GameConfig::<f32>::uniform(1, 2, 1.0).unwrap();
        let g = PayoffTable::<f32>::new(1, 2, vec![1.0, 1.0, -1.0, -1.0]).unwrap();
        let br = best_response(&g, &Policy::uniform(1, 2), Player::One, &cfg, 0).unwrap();
        assert!((br[0] - 0.880797).abs() < 1e-6);
    }
}
