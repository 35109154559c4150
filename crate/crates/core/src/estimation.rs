//! Offline datasets, least-squares payoff estimation over a finite class,
//! and coverage coefficients.

use std::io::{Read, Write};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::game::{GameInstance, JointPolicy, PayoffTable, Player};
use crate::io::fmt_f64;
use crate::scalar::Scalar;

/// Finite candidate set of payoff tables, all of one shape.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionClass<T> {
    members: Vec<PayoffTable<T>>,
}

impl<T: Scalar> FunctionClass<T> {
    pub fn new(members: Vec<PayoffTable<T>>) -> Result<Self> {
        let first = members.first().ok_or_else(|| Error::invalid("function class is empty"))?;
        if members.iter().any(|m| !m.same_shape(first)) {
            return Err(Error::invalid("function class members differ in shape"));
        }
        Ok(FunctionClass { members })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[PayoffTable<T>] {
        &self.members
    }

    pub fn get(&self, i: usize) -> &PayoffTable<T> {
        &self.members[i]
    }

    /// Index of the first member equal to `g` entrywise.
    pub fn position(&self, g: &PayoffTable<T>) -> Option<usize> {
        self.members.iter().position(|m| m == g)
    }

    pub fn num_contexts(&self) -> usize {
        self.members[0].num_contexts()
    }

    pub fn num_actions(&self) -> usize {
        self.members[0].num_actions()
    }
}

/// One observation (x, a₁, a₂, p).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Record<T> {
    pub x: usize,
    pub a1: usize,
    pub a2: usize,
    pub p: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OfflineDataset<T> {
    pub records: Vec<Record<T>>,
    /// Behavior policy and seed; absent for datasets read from disk.
    pub behavior: Option<JointPolicy<T>>,
    pub seed: Option<u64>,
}

impl<T: Scalar> OfflineDataset<T> {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// CSV with header `x,a1,a2,p`; feedback written with 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "a1", "a2", "p"]).map_err(csv_err)?;
        for r in &self.records {
            w.write_record([r.x.to_string(), r.a1.to_string(), r.a2.to_string(), fmt_f64(r.p.as_f64())])
                .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the CSV format written by [`OfflineDataset::write_csv`],
    /// rejecting indices outside a `num_contexts` × `num_actions` game.
    pub fn read_csv<R: Read>(input: R, num_contexts: usize, num_actions: usize) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let headers = rdr.headers().map_err(csv_err)?;
        if headers.iter().collect::<Vec<_>>() != ["x", "a1", "a2", "p"] {
            return Err(Error::Parse(format!("expected header x,a1,a2,p, found {}", headers.iter().collect::<Vec<_>>().join(","))));
        }
        let mut records = Vec::new();
        for (line, row) in rdr.records().enumerate() {
            let row = row.map_err(csv_err)?;
            let field = |i: usize| row.get(i).ok_or_else(|| Error::Parse(format!("record {line}: missing field {i}")));
            let index = |i: usize, bound: usize| -> Result<usize> {
                let v: usize = field(i)?
                    .trim()
                    .parse()
                    .map_err(|e| Error::Parse(format!("record {line}: {e}")))?;
                if v >= bound {
                    return Err(Error::Parse(format!("record {line}: index {v} out of range 0..{bound}")));
                }
                Ok(v)
            };
            let p: f64 = field(3)?.trim().parse().map_err(|e| Error::Parse(format!("record {line}: {e}")))?;
            if !p.is_finite() {
                return Err(Error::Parse(format!("record {line}: non-finite feedback")));
            }
            records.push(Record {
                x: index(0, num_contexts)?,
                a1: index(1, num_actions)?,
                a2: index(2, num_actions)?,
                p: T::lit(p),
            });
        }
        Ok(OfflineDataset { records, behavior: None, seed: None })
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

/// Draws `n` i.i.d. records: x ∼ ρ, a₁ ∼ π_{b,1}(·|x), a₂ ∼ π_{b,2}(·|x),
/// p = g⋆(x,a₁,a₂) + N(0, σ²). Identical inputs and seed give identical
/// records.
pub fn sample_dataset<T: Scalar>(
    game: &GameInstance<T>,
    behavior: &JointPolicy<T>,
    n: usize,
    noise_sigma: T,
    seed: u64,
) -> Result<OfflineDataset<T>> {
    if !(noise_sigma >= T::zero()) || !noise_sigma.is_finite() {
        return Err(Error::invalid(format!("noise_sigma must be finite and nonnegative, got {noise_sigma}")));
    }
    if behavior.num_contexts() != game.num_contexts() || behavior.num_actions() != game.num_actions() {
        return Err(Error::invalid("behavior policy does not match the game dimensions"));
    }
    let weights = |row: &[T]| {
        WeightedIndex::new(row.iter().map(|p| p.as_f64())).map_err(|e| Error::invalid(format!("bad sampling weights: {e}")))
    };
    let contexts = weights(&game.rho)?;
    let actions: Vec<[WeightedIndex<f64>; 2]> = (0..game.num_contexts())
        .map(|x| Ok([weights(behavior.p1.row(x))?, weights(behavior.p2.row(x))?]))
        .collect::<Result<_>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let records = (0..n)
        .map(|_| {
            let x = contexts.sample(&mut rng);
            let a1 = actions[x][0].sample(&mut rng);
            let a2 = actions[x][1].sample(&mut rng);
            let eps: f64 = StandardNormal.sample(&mut rng);
            Record { x, a1, a2, p: game.payoff.get(x, a1, a2) + noise_sigma * T::lit(eps) }
        })
        .collect();
    Ok(OfflineDataset { records, behavior: Some(behavior.clone()), seed: Some(seed) })
}

/// Σᵢ (g(xᵢ,a₁ᵢ,a₂ᵢ) − pᵢ)².
pub fn sum_squared_error<T: Scalar>(g: &PayoffTable<T>, data: &OfflineDataset<T>) -> T {
    data.records.iter().fold(T::zero(), |s, r| {
        let d = g.get(r.x, r.a1, r.a2) - r.p;
        s + d * d
    })
}

/// Σᵢ (g(zᵢ) − h(zᵢ))² over the dataset's design points.
pub fn design_sq_distance<T: Scalar>(g: &PayoffTable<T>, h: &PayoffTable<T>, data: &OfflineDataset<T>) -> T {
    data.records.iter().fold(T::zero(), |s, r| {
        let d = g.get(r.x, r.a1, r.a2) - h.get(r.x, r.a1, r.a2);
        s + d * d
    })
}

/// E_{ρ×π₁×π₂}[(g − h)²].
pub fn population_sq_distance<T: Scalar>(g: &PayoffTable<T>, h: &PayoffTable<T>, pi: &JointPolicy<T>, rho: &[T]) -> T {
    let na = g.num_actions();
    let mut total = T::zero();
    for (x, &w) in rho.iter().enumerate() {
        if !(w > T::zero()) {
            continue;
        }
        let mut inner = T::zero();
        for a1 in 0..na {
            for a2 in 0..na {
                let d = g.get(x, a1, a2) - h.get(x, a1, a2);
                inner = inner + pi.p1.prob(x, a1) * pi.p2.prob(x, a2) * d * d;
            }
        }
        total = total + w * inner;
    }
    total
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult<T> {
    pub chosen_index: usize,
    pub in_sample_sse: T,
    /// Σᵢ (ĝ(zᵢ) − g⋆(zᵢ))², available when the truth is known.
    pub residual_vs_truth_sse: Option<T>,
}

fn check_class_data<T: Scalar>(cls: &FunctionClass<T>, data: &OfflineDataset<T>) -> Result<()> {
    let (nx, na) = (cls.num_contexts(), cls.num_actions());
    if let Some(r) = data.records.iter().find(|r| r.x >= nx || r.a1 >= na || r.a2 >= na) {
        return Err(Error::invalid(format!("record ({}, {}, {}) outside the class dimensions", r.x, r.a1, r.a2)));
    }
    Ok(())
}

/// Least-squares estimator over the class; ties go to the lowest index.
pub fn least_squares_fit<T: Scalar>(
    cls: &FunctionClass<T>,
    data: &OfflineDataset<T>,
    truth: Option<&PayoffTable<T>>,
) -> Result<FitResult<T>> {
    if cls.is_empty() {
        return Err(Error::invalid("function class is empty"));
    }
    check_class_data(cls, data)?;
    let (chosen_index, in_sample_sse) = cls
        .members()
        .iter()
        .map(|g| sum_squared_error(g, data))
        .enumerate()
        .fold((0, T::infinity()), |best, (i, sse)| if sse < best.1 { (i, sse) } else { best });
    let residual_vs_truth_sse = truth.map(|t| design_sq_distance(cls.get(chosen_index), t, data));
    Ok(FitResult { chosen_index, in_sample_sse, residual_vs_truth_sse })
}

/// Pointwise D² divergences, one value per (x, a₁, a₂), with +∞ marking
/// points the behavior distribution cannot certify.
#[derive(Debug, Clone, PartialEq)]
pub struct D2Table<T> {
    num_contexts: usize,
    num_actions: usize,
    values: Vec<T>,
}

impl<T: Scalar> D2Table<T> {
    pub fn get(&self, x: usize, a1: usize, a2: usize) -> T {
        self.values[(x * self.num_actions + a1) * self.num_actions + a2]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }
}

/// D² at every point by enumerating all member pairs. A pair with zero
/// behavior-averaged distance contributes 0 where it agrees and +∞ where it
/// disagrees.
pub fn d2_table<T: Scalar>(cls: &FunctionClass<T>, behavior: &JointPolicy<T>, rho: &[T]) -> D2Table<T> {
    let (nx, na) = (cls.num_contexts(), cls.num_actions());
    let mut values = vec![T::zero(); nx * na * na];
    let members = cls.members();
    for (i, g) in members.iter().enumerate() {
        for h in &members[i + 1..] {
            let den = population_sq_distance(g, h, behavior, rho);
            for (slot, (&a, &b)) in values.iter_mut().zip(g.values().iter().zip(h.values())) {
                let num = (a - b) * (a - b);
                let ratio = if num == T::zero() {
                    T::zero()
                } else if den > T::zero() {
                    num / den
                } else {
                    T::infinity()
                };
                *slot = slot.max(ratio);
            }
        }
    }
    D2Table { num_contexts: nx, num_actions: na, values }
}

/// D²_G((x, a₁, a₂); π_b).
pub fn d2_divergence<T: Scalar>(
    cls: &FunctionClass<T>,
    behavior: &JointPolicy<T>,
    rho: &[T],
    point: (usize, usize, usize),
) -> Result<T> {
    let (x, a1, a2) = point;
    if x >= cls.num_contexts() || a1 >= cls.num_actions() || a2 >= cls.num_actions() {
        return Err(Error::invalid(format!("point {point:?} out of range")));
    }
    Ok(d2_table(cls, behavior, rho).get(x, a1, a2))
}

/// Expected D² when `deviator` best-responds adversarially (a deterministic
/// action per context) and the opponent plays its equilibrium policy.
pub fn deviation_coverage<T: Scalar>(table: &D2Table<T>, nash: &JointPolicy<T>, rho: &[T], deviator: Player) -> T {
    let na = table.num_actions;
    let opponent = nash.get(deviator.opponent());
    let mut total = T::zero();
    for (x, &w) in rho.iter().enumerate() {
        if !(w > T::zero()) {
            continue;
        }
        let mut best = T::zero();
        for a in 0..na {
            let mut acc = T::zero();
            for b in 0..na {
                let q = opponent.prob(x, b);
                if q > T::zero() {
                    let d = match deviator {
                        Player::One => table.get(x, a, b),
                        Player::Two => table.get(x, b, a),
                    };
                    acc = acc + q * d;
                }
            }
            best = best.max(acc);
        }
        total = total + w * best;
    }
    total
}

/// Unilateral concentrability coefficient C_uni; +∞ when some unilateral
/// deviation reaches a point the behavior data cannot certify.
pub fn unilateral_concentrability<T: Scalar>(
    cls: &FunctionClass<T>,
    behavior: &JointPolicy<T>,
    rho: &[T],
    nash: &JointPolicy<T>,
) -> T {
    let table = d2_table(cls, behavior, rho);
    Player::BOTH
        .iter()
        .map(|&p| deviation_coverage(&table, nash, rho, p))
        .fold(T::zero(), |m, v| m.max(v))
}

/// Radius 8·log(|G|/δ) of the least-squares version space.
pub fn version_space_radius<T: Scalar>(class_size: usize, delta: T) -> T {
    T::lit(8.0) * (T::lit(class_size as f64) / delta).ln()
}

/// Lower-confidence payoff: the pointwise minimum over every member whose
/// SSE is within `radius` of the best.
pub fn pessimistic_fit_with_radius<T: Scalar>(cls: &FunctionClass<T>, data: &OfflineDataset<T>, radius: T) -> Result<PayoffTable<T>> {
    if !(radius >= T::zero()) {
        return Err(Error::invalid("version-space radius must be nonnegative"));
    }
    check_class_data(cls, data)?;
    let sses: Vec<T> = cls.members().iter().map(|g| sum_squared_error(g, data)).collect();
    let best = sses.iter().fold(T::infinity(), |m, &v| m.min(v));
    let mut survivors = cls.members().iter().zip(&sses).filter(|(_, &s)| s <= best + radius).map(|(g, _)| g);
    let first = survivors.next().expect("the minimizer always survives");
    let mut low = first.values().to_vec();
    for g in survivors {
        for (l, &v) in low.iter_mut().zip(g.values()) {
            *l = l.min(v);
        }
    }
    PayoffTable::new(cls.num_contexts(), cls.num_actions(), low)
}

/// Pessimistic comparator with radius 8·log(|G|/δ).
pub fn pessimistic_fit_baseline<T: Scalar>(cls: &FunctionClass<T>, data: &OfflineDataset<T>, delta: T) -> Result<PayoffTable<T>> {
    if !(delta > T::zero() && delta <= T::one()) {
        return Err(Error::invalid(format!("delta must lie in (0, 1], got {delta}")));
    }
    pessimistic_fit_with_radius(cls, data, version_space_radius(cls.len(), delta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::Policy;
    use approx::assert_abs_diff_eq;

    fn game() -> GameInstance<f64> {
        let g = PayoffTable::from_fn(2, 3, |x, a1, a2| ((x + 2 * a1 + 3 * a2) % 5) as f64 / 2.5 - 0.9).unwrap();
        GameInstance::new(vec![0.3, 0.7], g).unwrap()
    }

    fn shifted(g: &PayoffTable<f64>, c: f64) -> PayoffTable<f64> {
        g.map_clipped(|_, _, _, v| v + c)
    }

    #[test]
    fn sampling_contract() {
        let game = game();
        let b = JointPolicy::uniform(2, 3);
        assert!(sample_dataset(&game, &b, 0, 0.5, 1).unwrap().is_empty());
        let clean = sample_dataset(&game, &b, 200, 0.0, 9).unwrap();
        assert!(clean.records.iter().all(|r| r.p == game.payoff.get(r.x, r.a1, r.a2)));
        let a = sample_dataset(&game, &b, 300, 0.5, 42).unwrap();
        let again = sample_dataset(&game, &b, 300, 0.5, 42).unwrap();
        assert_eq!(a, again);
        let other = sample_dataset(&game, &b, 300, 0.5, 43).unwrap();
        assert_ne!(
            a.records.iter().map(|r| (r.x, r.a1, r.a2)).collect::<Vec<_>>(),
            other.records.iter().map(|r| (r.x, r.a1, r.a2)).collect::<Vec<_>>()
        );
        assert!(sample_dataset(&game, &b, 3, -0.1, 1).is_err());
    }

    #[test]
    fn empirical_cell_frequencies_match_sampling_distribution() {
        let game = game();
        let b = JointPolicy::new(
            Policy::new(2, 3, vec![0.2, 0.5, 0.3, 0.6, 0.3, 0.1]).unwrap(),
            Policy::new(2, 3, vec![0.1, 0.1, 0.8, 0.3, 0.3, 0.4]).unwrap(),
        )
        .unwrap();
        let n = 100_000;
        let data = sample_dataset(&game, &b, n, 0.5, 7).unwrap();
        let mut counts = [0usize; 18];
        for r in &data.records {
            counts[(r.x * 3 + r.a1) * 3 + r.a2] += 1;
        }
        for x in 0..2 {
            for a1 in 0..3 {
                for a2 in 0..3 {
                    let p = game.rho[x] * b.p1.prob(x, a1) * b.p2.prob(x, a2);
                    let sd = (n as f64 * p * (1.0 - p)).sqrt();
                    let c = counts[(x * 3 + a1) * 3 + a2] as f64;
                    assert!((c - n as f64 * p).abs() <= 3.0 * sd + 1e-9, "cell ({x},{a1},{a2})");
                }
            }
        }
    }

    #[test]
    fn fit_examples() {
        let game = game();
        let truth = game.payoff.clone();
        let cls = FunctionClass::new(vec![truth.clone(), shifted(&truth, 0.5)]).unwrap();
        let data = sample_dataset(&game, &JointPolicy::uniform(2, 3), 100, 0.0, 3).unwrap();
        let fit = least_squares_fit(&cls, &data, Some(&truth)).unwrap();
        assert_eq!(fit.chosen_index, 0);
        assert_eq!(fit.in_sample_sse, 0.0);
        assert_eq!(fit.residual_vs_truth_sse, Some(0.0));

        let empty = OfflineDataset { records: vec![], behavior: None, seed: None };
        let rev = FunctionClass::new(vec![shifted(&truth, 0.5), truth.clone()]).unwrap();
        assert_eq!(least_squares_fit(&rev, &empty, None).unwrap().chosen_index, 0);
    }

    #[test]
    fn fit_minimizes_over_every_member() {
        let game = game();
        let members: Vec<_> = [-0.3, -0.1, 0.0, 0.05, 0.2].iter().map(|&c| shifted(&game.payoff, c)).collect();
        let cls = FunctionClass::new(members).unwrap();
        for seed in 0..20 {
            let data = sample_dataset(&game, &JointPolicy::uniform(2, 3), 40, 0.8, seed).unwrap();
            let fit = least_squares_fit(&cls, &data, None).unwrap();
            for g in cls.members() {
                assert!(fit.in_sample_sse <= sum_squared_error(g, &data));
            }
        }
    }

    #[test]
    fn fit_rejects_out_of_range_records() {
        let game = game();
        let cls = FunctionClass::new(vec![game.payoff.clone()]).unwrap();
        let bad = OfflineDataset { records: vec![Record { x: 2, a1: 0, a2: 0, p: 0.0 }], behavior: None, seed: None };
        assert!(least_squares_fit(&cls, &bad, None).is_err());
        assert!(FunctionClass::<f64>::new(vec![]).is_err());
    }

    #[test]
    fn d2_examples() {
        let game = game();
        let b = JointPolicy::uniform(2, 3);
        let single = FunctionClass::new(vec![game.payoff.clone()]).unwrap();
        assert_eq!(d2_divergence(&single, &b, &game.rho, (1, 2, 0)).unwrap(), 0.0);

        let zero = PayoffTable::constant(2, 3, 0.0).unwrap();
        let cst = PayoffTable::constant(2, 3, 0.4).unwrap();
        let cls = FunctionClass::new(vec![zero.clone(), cst]).unwrap();
        assert!(d2_table(&cls, &b, &game.rho).values().iter().all(|&v| (v - 1.0).abs() < 1e-14));
        let ne = JointPolicy::uniform(2, 3);
        assert_abs_diff_eq!(unilateral_concentrability(&cls, &b, &game.rho, &ne), 1.0, epsilon = 1e-14);

        // One context, two actions, g - h = 1 at (0, 1) only: denominator 1/4.
        let g = PayoffTable::new(1, 2, vec![0.0, 1.0, 0.0, 0.0]).unwrap();
        let h = PayoffTable::constant(1, 2, 0.0).unwrap();
        let cls = FunctionClass::new(vec![g, h]).unwrap();
        let b = JointPolicy::uniform(1, 2);
        assert_abs_diff_eq!(d2_divergence(&cls, &b, &[1.0], (0, 0, 1)).unwrap(), 4.0, epsilon = 1e-15);
        assert_eq!(d2_divergence(&cls, &b, &[1.0], (0, 1, 1)).unwrap(), 0.0);
    }

    #[test]
    fn uncovered_point_gives_infinite_coverage() {
        let g = PayoffTable::new(1, 2, vec![0.0, 0.0, 0.0, 0.7]).unwrap();
        let h = PayoffTable::constant(1, 2, 0.0).unwrap();
        let cls = FunctionClass::new(vec![g, h]).unwrap();
        let b = JointPolicy::new(Policy::new(1, 2, vec![1.0, 0.0]).unwrap(), Policy::uniform(1, 2)).unwrap();
        assert_eq!(d2_divergence(&cls, &b, &[1.0], (0, 1, 1)).unwrap(), f64::INFINITY);
        let ne = JointPolicy::uniform(1, 2);
        assert_eq!(unilateral_concentrability(&cls, &b, &[1.0], &ne), f64::INFINITY);
    }

    #[test]
    fn pessimistic_examples() {
        let game = game();
        let truth = game.payoff.clone();
        let other = shifted(&truth, -0.3);
        let cls = FunctionClass::new(vec![other.clone(), truth.clone()]).unwrap();
        // Noiseless data over every triple; radius 0 leaves only the truth.
        let mut records = Vec::new();
        for (x, a1, a2, v) in truth.iter() {
            records.push(Record { x, a1, a2, p: v });
        }
        let data = OfflineDataset { records, behavior: None, seed: None };
        assert_eq!(pessimistic_fit_with_radius(&cls, &data, 0.0).unwrap(), truth);

        let single = FunctionClass::new(vec![other.clone()]).unwrap();
        assert_eq!(pessimistic_fit_baseline(&single, &data, 0.1).unwrap(), other);

        // Members that differ only at an unobserved triple both survive.
        let mut bumped = truth.values().to_vec();
        bumped[truth.index(1, 2, 2)] = -1.0;
        let bumped = PayoffTable::new(2, 3, bumped).unwrap();
        let cls = FunctionClass::new(vec![truth.clone(), bumped.clone()]).unwrap();
        let partial = OfflineDataset {
            records: data.records.iter().copied().filter(|r| (r.x, r.a1, r.a2) != (1, 2, 2)).collect(),
            behavior: None,
            seed: None,
        };
        let low = pessimistic_fit_with_radius(&cls, &partial, 0.0).unwrap();
        assert_eq!(low, bumped);
        assert!(pessimistic_fit_baseline(&cls, &partial, 0.0).is_err());
    }

    #[test]
    fn csv_round_trip_and_validation() {
        let game = game();
        let data = sample_dataset(&game, &JointPolicy::uniform(2, 3), 50, 0.5, 11).unwrap();
        let mut buf = Vec::new();
        data.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x,a1,a2,p\n"));
        let back = OfflineDataset::<f64>::read_csv(buf.as_slice(), 2, 3).unwrap();
        assert_eq!(back.records, data.records);
        assert!(OfflineDataset::<f64>::read_csv(buf.as_slice(), 1, 3).is_err());
        assert!(OfflineDataset::<f64>::read_csv("x,a1,a2,p\n0,3,0,0.1\n".as_bytes(), 2, 3).is_err());
        assert!(OfflineDataset::<f64>::read_csv("a,b,c,d\n".as_bytes(), 2, 3).is_err());
    }
}
