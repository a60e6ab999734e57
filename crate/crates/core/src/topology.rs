//! Access structures, rate tuples and the capacity-region checkers.
//!
//! Users and nodes are 0-based inside the library. Files and printed output
//! use 1-based labels; see [`crate::formats`].

use std::collections::BTreeSet;
use std::fmt;

use itertools::Itertools;
use num_rational::Ratio;
use thiserror::Error;

use crate::matching;

/// A nonnegative rate, exact.
pub type Rate = Ratio<u64>;

/// Largest user count accepted by [`CheckMethod::Enumerate`].
pub const ENUMERATION_MAX_USERS: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TopologyError {
    #[error("access structure has no users")]
    NoUsers,
    #[error("node label {0} is not a positive integer")]
    InvalidLabel(u64),
    #[error("rate tuple has {got} entries but there are {expected} users")]
    RateLength { expected: usize, got: usize },
    #[error("rate {0} has a zero denominator")]
    ZeroDenominator(usize),
    #[error("enumeration is capped at {max} users, got {got}")]
    TooManyUsers { max: usize, got: usize },
}

/// The access sets `A_1..A_K` over nodes `0..N`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AccessStructure {
    sets: Vec<BTreeSet<usize>>,
    node_count: usize,
    /// original label of each canonical node
    labels: Vec<u64>,
}

impl AccessStructure {
    /// Canonicalizes positive node labels onto `0..N` in ascending label
    /// order. Empty access sets are allowed; nodes not named by any set do
    /// not exist.
    pub fn new<S: AsRef<[u64]>>(raw_sets: &[S]) -> Result<Self, TopologyError> {
        if raw_sets.is_empty() {
            return Err(TopologyError::NoUsers);
        }
        let mut labels = BTreeSet::new();
        for set in raw_sets {
            for &l in set.as_ref() {
                if l == 0 {
                    return Err(TopologyError::InvalidLabel(l));
                }
                labels.insert(l);
            }
        }
        let labels: Vec<u64> = labels.into_iter().collect();
        let sets = raw_sets
            .iter()
            .map(|set| {
                set.as_ref()
                    .iter()
                    .map(|l| labels.binary_search(l).expect("label collected above"))
                    .collect()
            })
            .collect();
        Ok(AccessStructure {
            node_count: labels.len(),
            sets,
            labels,
        })
    }

    /// Builds from 0-based node sets directly; `node_count` must cover
    /// every node and every node must be used.
    pub fn from_sets(sets: Vec<BTreeSet<usize>>) -> Result<Self, TopologyError> {
        let raw: Vec<Vec<u64>> = sets
            .iter()
            .map(|s| s.iter().map(|&n| n as u64 + 1).collect())
            .collect();
        Self::new(&raw)
    }

    pub fn user_count(&self) -> usize {
        self.sets.len()
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn set(&self, k: usize) -> &BTreeSet<usize> {
        &self.sets[k]
    }

    pub fn sets(&self) -> &[BTreeSet<usize>] {
        &self.sets
    }

    pub fn labels(&self) -> &[u64] {
        &self.labels
    }

    /// True when labels were already `1..=N`.
    pub fn is_identity_labeling(&self) -> bool {
        self.labels.iter().enumerate().all(|(i, &l)| l == i as u64 + 1)
    }

    /// `∪_{i∈S} A_i \ A_k`; pass `None` for a plain union.
    pub fn union_minus(&self, s: &[usize], k: Option<usize>) -> BTreeSet<usize> {
        let mut u: BTreeSet<usize> = s.iter().flat_map(|&i| self.sets[i].iter().copied()).collect();
        if let Some(k) = k {
            for n in &self.sets[k] {
                u.remove(n);
            }
        }
        u
    }

    /// Node indices outside `A_k`, ascending.
    pub fn complement(&self, k: usize) -> Vec<usize> {
        (0..self.node_count).filter(|n| !self.sets[k].contains(n)).collect()
    }
}

/// Message rates `R_1..R_K`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RateTuple {
    rates: Vec<Rate>,
}

impl RateTuple {
    pub fn new(rates: Vec<Rate>) -> Self {
        RateTuple { rates }
    }

    pub fn integral(rates: &[u64]) -> Self {
        RateTuple {
            rates: rates.iter().map(|&r| Rate::from_integer(r)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }

    pub fn get(&self, k: usize) -> Rate {
        self.rates[k]
    }

    pub fn rates(&self) -> &[Rate] {
        &self.rates
    }

    pub fn is_integral(&self) -> bool {
        self.rates.iter().all(|r| r.is_integer())
    }

    /// Integer rates, or the index of the first fractional one.
    pub fn to_integers(&self) -> Result<Vec<usize>, usize> {
        self.rates
            .iter()
            .enumerate()
            .map(|(k, r)| {
                if r.is_integer() {
                    Ok(r.to_integer() as usize)
                } else {
                    Err(k)
                }
            })
            .collect()
    }

    pub fn sum_over(&self, s: &[usize]) -> Rate {
        s.iter().fold(Rate::from_integer(0), |acc, &i| acc + self.rates[i])
    }

    pub fn total(&self) -> Rate {
        self.rates.iter().fold(Rate::from_integer(0), |acc, r| acc + r)
    }

    pub fn check_len(&self, a: &AccessStructure) -> Result<(), TopologyError> {
        if self.rates.len() != a.user_count() {
            Err(TopologyError::RateLength {
                expected: a.user_count(),
                got: self.rates.len(),
            })
        } else {
            Ok(())
        }
    }
}

/// Which inequality a [`Violation`] breaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Constraint {
    /// `Σ_{i∈S} R_i ≤ |∪_{i∈S} A_i \ A_k|`
    PerfectPrivacy,
    /// Single-user resource bound `R_1 ≤ |A_1|`.
    SingleUser,
    /// `R_i ≤ |A_i \ A_k|` for the weak region (S = {i}).
    WeakPerUser,
    /// `Σ_{i∈S} R_i ≤ |∪_{i∈S} A_i|`
    WeakUnion,
}

impl Constraint {
    pub fn name(&self) -> &'static str {
        match self {
            Constraint::PerfectPrivacy => "perfect_privacy",
            Constraint::SingleUser => "single_user",
            Constraint::WeakPerUser => "weak_per_user",
            Constraint::WeakUnion => "weak_union",
        }
    }
}

/// A violated capacity inequality: `lhs = Σ_{i∈s} R_i` exceeds
/// `rhs = |∪_{i∈s} A_i \ A_k|` (no subtraction when `k` is `None`).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Violation {
    pub constraint: Constraint,
    pub k: Option<usize>,
    pub s: Vec<usize>,
    pub lhs: Rate,
    pub rhs: u64,
}

impl Violation {
    pub(crate) fn evaluate(
        constraint: Constraint,
        a: &AccessStructure,
        r: &RateTuple,
        k: Option<usize>,
        s: Vec<usize>,
    ) -> Self {
        let rhs = match constraint {
            Constraint::SingleUser => a.set(s[0]).len(),
            _ => a.union_minus(&s, k).len(),
        } as u64;
        Violation {
            constraint,
            lhs: r.sum_over(&s),
            rhs,
            k,
            s,
        }
    }

    /// Recomputes both sides from the inputs and reports whether this is a
    /// genuine violation.
    pub fn holds_for(&self, a: &AccessStructure, r: &RateTuple) -> bool {
        let recomputed = Violation::evaluate(self.constraint, a, r, self.k, self.s.clone());
        recomputed.lhs == self.lhs
            && recomputed.rhs == self.rhs
            && self.lhs > Rate::from_integer(self.rhs)
            && !self.s.is_empty()
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let users = self.s.iter().map(|i| format!("{}", i + 1)).join(",");
        let sum = self.s.iter().map(|i| format!("R_{}", i + 1)).join(" + ");
        let union = self.s.iter().map(|i| format!("A_{}", i + 1)).join(" ∪ ");
        match (self.constraint, self.k) {
            (Constraint::SingleUser, _) => write!(
                f,
                "R_{u} = {} exceeds |A_{u}| = {}",
                self.lhs,
                self.rhs,
                u = users
            ),
            (_, Some(k)) => write!(
                f,
                "{sum} = {} exceeds |({union}) \\ A_{}| = {} (k = {}, S = {{{users}}})",
                self.lhs,
                k + 1,
                self.rhs,
                k + 1
            ),
            (_, None) => write!(
                f,
                "{sum} = {} exceeds |{union}| = {} (S = {{{users}}})",
                self.lhs, self.rhs
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Verdict {
    Feasible,
    Infeasible(Violation),
}

impl Verdict {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Verdict::Feasible)
    }

    pub fn violation(&self) -> Option<&Violation> {
        match self {
            Verdict::Feasible => None,
            Verdict::Infeasible(v) => Some(v),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CheckMethod {
    /// Sweep every `(k, S)` pair.
    Enumerate,
    /// One maximum-matching test per excluded user.
    #[default]
    Matching,
}

/// Nonempty subsets of `users`, by size then lexicographically.
fn subsets_by_size(users: &[usize]) -> impl Iterator<Item = Vec<usize>> + '_ {
    (1..=users.len()).flat_map(move |size| users.iter().copied().combinations(size))
}

/// Single-user rule: with K = 1 the only constraint is `R_1 ≤ |A_1|`.
fn single_user_verdict(a: &AccessStructure, r: &RateTuple) -> Verdict {
    let v = Violation::evaluate(Constraint::SingleUser, a, r, Some(0), vec![0]);
    if v.lhs > Rate::from_integer(v.rhs) {
        Verdict::Infeasible(v)
    } else {
        Verdict::Feasible
    }
}

/// Decides membership of `r` in the perfect-privacy capacity region.
///
/// Both methods return the same verdict. With `Enumerate` the reported
/// violation is the first in (|S|, S, k) order. With `Matching` each
/// deficient user yields a Hall certificate and the one with the smallest
/// (|S|, S, k) is reported.
pub fn check_perfect_capacity(
    a: &AccessStructure,
    r: &RateTuple,
    method: CheckMethod,
) -> Result<Verdict, TopologyError> {
    r.check_len(a)?;
    let k_count = a.user_count();
    if k_count == 1 {
        return Ok(single_user_verdict(a, r));
    }
    match method {
        CheckMethod::Enumerate => {
            if k_count > ENUMERATION_MAX_USERS {
                return Err(TopologyError::TooManyUsers {
                    max: ENUMERATION_MAX_USERS,
                    got: k_count,
                });
            }
            let users: Vec<usize> = (0..k_count).collect();
            for s in subsets_by_size(&users) {
                if s.len() == k_count {
                    continue;
                }
                for k in (0..k_count).filter(|k| !s.contains(k)) {
                    let v = Violation::evaluate(Constraint::PerfectPrivacy, a, r, Some(k), s.clone());
                    if v.lhs > Rate::from_integer(v.rhs) {
                        return Ok(Verdict::Infeasible(v));
                    }
                }
            }
            Ok(Verdict::Feasible)
        }
        CheckMethod::Matching => {
            let best = (0..k_count)
                .filter_map(|k| matching::deficiency_certificate(a, r, k))
                .min_by(|x, y| (x.s.len(), &x.s, x.k).cmp(&(y.s.len(), &y.s, y.k)));
            Ok(best.map_or(Verdict::Feasible, Verdict::Infeasible))
        }
    }
}

/// Decides membership in the weak-privacy capacity region: per-user bounds
/// `R_k ≤ |A_k \ A_k'|` first (by k, then k'), then union bounds
/// `Σ_{i∈S} R_i ≤ |∪_{i∈S} A_i|` in (|S|, S) order.
pub fn check_weak_capacity(a: &AccessStructure, r: &RateTuple) -> Result<Verdict, TopologyError> {
    r.check_len(a)?;
    let k_count = a.user_count();
    for k in 0..k_count {
        for other in (0..k_count).filter(|&o| o != k) {
            let v = Violation::evaluate(Constraint::WeakPerUser, a, r, Some(other), vec![k]);
            if v.lhs > Rate::from_integer(v.rhs) {
                return Ok(Verdict::Infeasible(v));
            }
        }
    }
    let users: Vec<usize> = (0..k_count).collect();
    for s in subsets_by_size(&users) {
        let v = Violation::evaluate(Constraint::WeakUnion, a, r, None, s);
        if v.lhs > Rate::from_integer(v.rhs) {
            return Ok(Verdict::Infeasible(v));
        }
    }
    Ok(Verdict::Feasible)
}

/// `|A \ F|`: the most unit shares' worth of secret that a decoding set `A`
/// can carry when the colluding set `F` must learn nothing.
pub fn set_difference_bound(decoding_set: &BTreeSet<usize>, colluding_set: &BTreeSet<usize>) -> usize {
    decoding_set.difference(colluding_set).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn example() -> AccessStructure {
        AccessStructure::new(&[vec![1, 2, 4], vec![2, 3, 6], vec![1, 4, 5], vec![3, 5, 6]]).unwrap()
    }

    fn set(v: &[usize]) -> BTreeSet<usize> {
        v.iter().copied().collect()
    }

    #[test]
    fn validate_example() {
        let a = example();
        assert_eq!(a.user_count(), 4);
        assert_eq!(a.node_count(), 6);
        assert!(a.is_identity_labeling());
        assert_eq!(a.set(0), &set(&[0, 1, 3]));
    }

    #[test]
    fn validate_relabels() {
        let a = AccessStructure::new(&[vec![7], vec![9]]).unwrap();
        assert_eq!((a.user_count(), a.node_count()), (2, 2));
        assert_eq!(a.labels(), &[7, 9]);
        assert_eq!(a.set(1), &set(&[1]));
    }

    #[test]
    fn validate_empty_set_and_errors() {
        let a = AccessStructure::new(&[vec![1], vec![]]).unwrap();
        assert_eq!((a.user_count(), a.node_count()), (2, 1));
        assert!(a.set(1).is_empty());
        let none: [Vec<u64>; 0] = [];
        assert_eq!(AccessStructure::new(&none), Err(TopologyError::NoUsers));
        assert_eq!(
            AccessStructure::new(&[vec![0, 1]]),
            Err(TopologyError::InvalidLabel(0))
        );
    }

    #[test]
    fn perfect_example_feasible() {
        let a = example();
        for m in [CheckMethod::Enumerate, CheckMethod::Matching] {
            let v = check_perfect_capacity(&a, &RateTuple::integral(&[1, 1, 1, 1]), m).unwrap();
            assert_eq!(v, Verdict::Feasible);
        }
    }

    #[test]
    fn perfect_example_violation() {
        let a = example();
        let r = RateTuple::integral(&[2, 1, 1, 1]);
        for m in [CheckMethod::Enumerate, CheckMethod::Matching] {
            let v = check_perfect_capacity(&a, &r, m).unwrap();
            let v = v.violation().unwrap();
            assert_eq!(v.k, Some(2));
            assert_eq!(v.s, vec![0]);
            assert_eq!(v.lhs, Rate::from_integer(2));
            assert_eq!(v.rhs, 1);
            assert!(v.holds_for(&a, &r));
        }
    }

    #[test]
    fn single_user_rule() {
        let a = AccessStructure::new(&[vec![1, 2]]).unwrap();
        let ok = check_perfect_capacity(&a, &RateTuple::integral(&[2]), CheckMethod::Matching).unwrap();
        assert!(ok.is_feasible());
        let bad = check_perfect_capacity(&a, &RateTuple::integral(&[3]), CheckMethod::Enumerate).unwrap();
        let v = bad.violation().unwrap();
        assert_eq!((v.k, v.s.clone(), v.rhs), (Some(0), vec![0], 2));
        assert_eq!(v.constraint, Constraint::SingleUser);
    }

    #[test]
    fn rate_length_checked() {
        let a = example();
        assert_eq!(
            check_perfect_capacity(&a, &RateTuple::integral(&[1]), CheckMethod::Matching),
            Err(TopologyError::RateLength { expected: 4, got: 1 })
        );
    }

    #[test]
    fn weak_examples() {
        let a = AccessStructure::new(&[vec![1, 2, 3], vec![3, 4]]).unwrap();
        assert!(check_weak_capacity(&a, &RateTuple::integral(&[2, 1])).unwrap().is_feasible());

        let r = RateTuple::integral(&[3, 1]);
        let v = check_weak_capacity(&a, &r).unwrap();
        let v = v.violation().unwrap();
        assert_eq!((v.constraint, v.k, v.s.clone(), v.rhs), (Constraint::WeakPerUser, Some(1), vec![0], 2));
        assert!(v.holds_for(&a, &r));

        let r = RateTuple::integral(&[2, 2]);
        let v = check_weak_capacity(&a, &r).unwrap();
        let v = v.violation().unwrap();
        assert_eq!((v.constraint, v.k, v.s.clone(), v.rhs), (Constraint::WeakPerUser, Some(0), vec![1], 1));
    }

    #[test]
    fn weak_union_bound() {
        // disjoint-ish sets so only the union bound can bind
        let a = AccessStructure::new(&[vec![1, 2], vec![3]]).unwrap();
        assert!(check_weak_capacity(&a, &RateTuple::integral(&[2, 1])).unwrap().is_feasible());
        let a = AccessStructure::new(&[vec![1]]).unwrap();
        let v = check_weak_capacity(&a, &RateTuple::integral(&[2])).unwrap();
        assert_eq!(v.violation().unwrap().constraint, Constraint::WeakUnion);
    }

    #[test]
    fn fractional_rates_are_checked() {
        let a = AccessStructure::new(&[vec![1, 2], vec![2, 3]]).unwrap();
        let half = Rate::new(1, 2);
        let r = RateTuple::new(vec![Rate::from_integer(1), half]);
        for m in [CheckMethod::Enumerate, CheckMethod::Matching] {
            assert!(check_perfect_capacity(&a, &r, m).unwrap().is_feasible());
        }
        let r = RateTuple::new(vec![Rate::new(3, 2), half]);
        for m in [CheckMethod::Enumerate, CheckMethod::Matching] {
            let v = check_perfect_capacity(&a, &r, m).unwrap();
            assert!(v.violation().unwrap().holds_for(&a, &r));
        }
    }

    #[test]
    fn set_difference_examples() {
        assert_eq!(set_difference_bound(&set(&[1, 2, 4]), &set(&[1, 4, 5])), 1);
        assert_eq!(set_difference_bound(&set(&[1, 2, 4]), &set(&[])), 3);
        assert_eq!(set_difference_bound(&set(&[1, 2]), &set(&[1, 2, 3])), 0);
    }

    #[test]
    fn violation_display() {
        let a = example();
        let r = RateTuple::integral(&[2, 1, 1, 1]);
        let v = check_perfect_capacity(&a, &r, CheckMethod::Enumerate).unwrap();
        assert_eq!(
            v.violation().unwrap().to_string(),
            "R_1 = 2 exceeds |(A_1) \\ A_3| = 1 (k = 3, S = {1})"
        );
    }
}
