//! Per-user demand graphs, Hopcroft–Karp matching, match plans and Hall
//! violator certificates.
//!
//! For an excluded user `k`, every other message `i` contributes `R_i`
//! identical left vertices whose neighbourhood is `A_i \ A_k`. A matching
//! that saturates the left side picks the row sets `C_i^k`; a maximum
//! matching that does not yields a deficient family of messages.

use std::collections::{BTreeSet, VecDeque};

use thiserror::Error;

use crate::topology::{AccessStructure, Constraint, Rate, RateTuple, Violation};

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn lcm(a: u64, b: u64) -> u64 {
    a / gcd(a, b) * b
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MatchingError {
    #[error("no matching saturates the demand graph of user {}", .0 + 1)]
    ImperfectMatching(usize),
    #[error("matching is left-perfect, there is no Hall violator")]
    PerfectMatching,
    #[error("matching is not maximum: an augmenting path exists")]
    NotMaximum,
    #[error("rates must be integral to build a match plan (user {})", .0 + 1)]
    NonIntegralRate(usize),
    #[error("match plan invalid for k = {}, i = {}: {reason}", .k + 1, .i + 1)]
    PlanInvariant { k: usize, i: usize, reason: String },
}

/// Bipartite demand graph for one excluded user.
///
/// Right vertices are nodes, each repeated `scale` times; `scale` is the
/// common denominator of the rates and is 1 for integral rates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DemandGraph {
    pub excluded_user: usize,
    /// `(message i, copy j)`
    pub left: Vec<(usize, usize)>,
    /// ascending right-vertex ids per left vertex
    pub adjacency: Vec<Vec<usize>>,
    pub right_count: usize,
    pub scale: u64,
}

impl DemandGraph {
    pub fn node_of(&self, right: usize) -> usize {
        right / self.scale as usize
    }

    /// Distinct neighbouring nodes of a left vertex.
    pub fn neighbour_nodes(&self, left: usize) -> BTreeSet<usize> {
        self.adjacency[left].iter().map(|&v| self.node_of(v)).collect()
    }
}

/// Builds the demand graph of user `k`. Fractional rates are handled by
/// scaling both sides with the common denominator.
pub fn build_demand_graph(a: &AccessStructure, r: &RateTuple, k: usize) -> DemandGraph {
    let scale = r.rates().iter().fold(1u64, |acc, x| lcm(acc, *x.denom()));
    let mut left = Vec::new();
    let mut adjacency = Vec::new();
    for i in (0..a.user_count()).filter(|&i| i != k) {
        let copies = (r.get(i) * Rate::from_integer(scale)).to_integer();
        let diff = a.union_minus(&[i], Some(k));
        let nbrs: Vec<usize> = diff
            .iter()
            .flat_map(|&n| (0..scale as usize).map(move |c| n * scale as usize + c))
            .collect();
        for j in 0..copies as usize {
            left.push((i, j));
            adjacency.push(nbrs.clone());
        }
    }
    DemandGraph {
        excluded_user: k,
        left,
        adjacency,
        right_count: a.node_count() * scale as usize,
        scale,
    }
}

/// A partial injection from left to right vertices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matching {
    pub left_to_right: Vec<Option<usize>>,
}

impl Matching {
    pub fn size(&self) -> usize {
        self.left_to_right.iter().flatten().count()
    }

    pub fn is_left_perfect(&self) -> bool {
        self.left_to_right.iter().all(Option::is_some)
    }

    fn right_to_left(&self, right_count: usize) -> Vec<Option<usize>> {
        let mut out = vec![None; right_count];
        for (u, v) in self.left_to_right.iter().enumerate() {
            if let Some(v) = v {
                out[*v] = Some(u);
            }
        }
        out
    }
}

const INF: usize = usize::MAX;

/// Maximum-cardinality matching by Hopcroft–Karp. Left vertices are
/// processed in order and neighbours ascending, so the result depends only
/// on the graph.
pub fn max_matching(g: &DemandGraph) -> Matching {
    let n_left = g.left.len();
    let mut pair_left: Vec<Option<usize>> = vec![None; n_left];
    let mut pair_right: Vec<Option<usize>> = vec![None; g.right_count];
    let mut dist = vec![INF; n_left];

    loop {
        // BFS layering from free left vertices
        let mut queue = VecDeque::new();
        for u in 0..n_left {
            if pair_left[u].is_none() {
                dist[u] = 0;
                queue.push_back(u);
            } else {
                dist[u] = INF;
            }
        }
        let mut found = false;
        while let Some(u) = queue.pop_front() {
            for &v in &g.adjacency[u] {
                match pair_right[v] {
                    None => found = true,
                    Some(w) if dist[w] == INF => {
                        dist[w] = dist[u] + 1;
                        queue.push_back(w);
                    }
                    Some(_) => {}
                }
            }
        }
        if !found {
            break;
        }
        for u in 0..n_left {
            if pair_left[u].is_none() {
                augment(g, u, &mut pair_left, &mut pair_right, &mut dist);
            }
        }
    }
    Matching {
        left_to_right: pair_left,
    }
}

fn augment(
    g: &DemandGraph,
    u: usize,
    pair_left: &mut [Option<usize>],
    pair_right: &mut [Option<usize>],
    dist: &mut [usize],
) -> bool {
    for &v in &g.adjacency[u] {
        let ok = match pair_right[v] {
            None => true,
            Some(w) => dist[w] == dist[u].wrapping_add(1) && augment(g, w, pair_left, pair_right, dist),
        };
        if ok {
            pair_left[u] = Some(v);
            pair_right[v] = Some(u);
            return true;
        }
    }
    dist[u] = INF;
    false
}

/// Converts a maximum matching that misses some left vertex into a violated
/// capacity constraint: the messages whose copies are reachable from free
/// left vertices along alternating paths need more nodes than they see.
pub fn hall_violator(
    a: &AccessStructure,
    r: &RateTuple,
    g: &DemandGraph,
    m: &Matching,
) -> Result<Violation, MatchingError> {
    if m.is_left_perfect() {
        return Err(MatchingError::PerfectMatching);
    }
    let mate = m.right_to_left(g.right_count);
    let mut seen_left = vec![false; g.left.len()];
    let mut seen_right = vec![false; g.right_count];
    let mut queue: VecDeque<usize> = (0..g.left.len())
        .filter(|&u| m.left_to_right[u].is_none())
        .collect();
    for &u in &queue {
        seen_left[u] = true;
    }
    while let Some(u) = queue.pop_front() {
        for &v in &g.adjacency[u] {
            if seen_right[v] {
                continue;
            }
            seen_right[v] = true;
            let w = mate[v].ok_or(MatchingError::NotMaximum)?;
            if !seen_left[w] {
                seen_left[w] = true;
                queue.push_back(w);
            }
        }
    }
    let s: BTreeSet<usize> = g
        .left
        .iter()
        .zip(&seen_left)
        .filter(|(_, &seen)| seen)
        .map(|((i, _), _)| *i)
        .collect();
    let v = Violation::evaluate(
        Constraint::PerfectPrivacy,
        a,
        r,
        Some(g.excluded_user),
        s.into_iter().collect(),
    );
    if v.lhs > Rate::from_integer(v.rhs) {
        Ok(v)
    } else {
        Err(MatchingError::NotMaximum)
    }
}

/// Hall certificate for user `k`, or `None` when its demand graph has a
/// left-perfect matching.
pub fn deficiency_certificate(a: &AccessStructure, r: &RateTuple, k: usize) -> Option<Violation> {
    let g = build_demand_graph(a, r, k);
    let m = max_matching(&g);
    if m.is_left_perfect() {
        None
    } else {
        Some(hall_violator(a, r, &g, &m).expect("Hopcroft-Karp returns a maximum matching"))
    }
}

/// The row-index sets `C_i^k` for every excluded user `k` and message
/// `i ≠ k`. `sets[k][k]` is always empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchPlan {
    sets: Vec<Vec<BTreeSet<usize>>>,
}

impl MatchPlan {
    /// Wraps explicit sets after checking them against `(a, r)`.
    pub fn from_sets(
        a: &AccessStructure,
        rates: &[usize],
        sets: Vec<Vec<BTreeSet<usize>>>,
    ) -> Result<Self, MatchingError> {
        let plan = MatchPlan { sets };
        plan.validate(a, rates)?;
        Ok(plan)
    }

    pub fn set(&self, k: usize, i: usize) -> &BTreeSet<usize> {
        &self.sets[k][i]
    }

    pub fn sets(&self) -> &[Vec<BTreeSet<usize>>] {
        &self.sets
    }

    /// Rows `∪_{i≠k} C_i^k`, ascending.
    pub fn rows_for(&self, k: usize) -> Vec<usize> {
        let all: BTreeSet<usize> = self.sets[k].iter().flatten().copied().collect();
        all.into_iter().collect()
    }

    /// Checks `C_i^k ⊆ A_i \ A_k`, `|C_i^k| = R_i` and pairwise disjointness.
    pub fn validate(&self, a: &AccessStructure, rates: &[usize]) -> Result<(), MatchingError> {
        let kk = a.user_count();
        let shape_ok = self.sets.len() == kk && self.sets.iter().all(|row| row.len() == kk);
        if !shape_ok {
            return Err(MatchingError::PlanInvariant {
                k: 0,
                i: 0,
                reason: format!("plan must be {kk} x {kk}"),
            });
        }
        for k in 0..kk {
            if !self.sets[k][k].is_empty() {
                return Err(MatchingError::PlanInvariant {
                    k,
                    i: k,
                    reason: "diagonal entry must be empty".into(),
                });
            }
            let mut used = BTreeSet::new();
            for i in (0..kk).filter(|&i| i != k) {
                let c = &self.sets[k][i];
                let allowed = a.union_minus(&[i], Some(k));
                if let Some(bad) = c.iter().find(|n| !allowed.contains(n)) {
                    return Err(MatchingError::PlanInvariant {
                        k,
                        i,
                        reason: format!("node {} is not in A_{} \\ A_{}", bad + 1, i + 1, k + 1),
                    });
                }
                if c.len() != rates[i] {
                    return Err(MatchingError::PlanInvariant {
                        k,
                        i,
                        reason: format!("|C| = {} but R_{} = {}", c.len(), i + 1, rates[i]),
                    });
                }
                if let Some(bad) = c.iter().find(|n| used.contains(*n)) {
                    return Err(MatchingError::PlanInvariant {
                        k,
                        i,
                        reason: format!("node {} is used by two messages", bad + 1),
                    });
                }
                used.extend(c.iter().copied());
            }
        }
        Ok(())
    }
}

/// Assembles `C_i^k` from the matched right endpoints of every user's
/// demand graph, then re-validates the plan.
pub fn extract_match_plan(
    a: &AccessStructure,
    rates: &[usize],
    graphs: &[DemandGraph],
    matchings: &[Matching],
) -> Result<MatchPlan, MatchingError> {
    let kk = a.user_count();
    let mut sets = vec![vec![BTreeSet::new(); kk]; kk];
    for (g, m) in graphs.iter().zip(matchings) {
        let k = g.excluded_user;
        for (u, &(i, _)) in g.left.iter().enumerate() {
            let v = m.left_to_right[u].ok_or(MatchingError::ImperfectMatching(k))?;
            sets[k][i].insert(g.node_of(v));
        }
    }
    MatchPlan::from_sets(a, rates, sets)
}

/// Builds and matches every user's demand graph and extracts the plan.
pub fn find_match_plan(a: &AccessStructure, r: &RateTuple) -> Result<MatchPlan, MatchingError> {
    let rates = r.to_integers().map_err(MatchingError::NonIntegralRate)?;
    let graphs: Vec<DemandGraph> = (0..a.user_count()).map(|k| build_demand_graph(a, r, k)).collect();
    let matchings: Vec<Matching> = graphs.iter().map(max_matching).collect();
    extract_match_plan(a, &rates, &graphs, &matchings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn set(v: &[usize]) -> BTreeSet<usize> {
        v.iter().copied().collect()
    }

    #[test]
    fn demand_graph_example() {
        let a = fixtures::example_access();
        let g = build_demand_graph(&a, &RateTuple::integral(&[1, 1, 1, 1]), 0);
        assert_eq!(g.left, vec![(1, 0), (2, 0), (3, 0)]);
        assert_eq!(g.neighbour_nodes(0), set(&[2, 5]));
        assert_eq!(g.neighbour_nodes(1), set(&[4]));
        assert_eq!(g.neighbour_nodes(2), set(&[2, 4, 5]));
        for (u, _) in g.left.iter().enumerate() {
            assert!(g.neighbour_nodes(u).is_disjoint(a.set(0)));
        }
    }

    #[test]
    fn demand_graph_edge_cases() {
        let a = fixtures::example_access();
        let g = build_demand_graph(&a, &RateTuple::integral(&[1, 0, 2, 1]), 0);
        assert_eq!(g.left, vec![(2, 0), (2, 1), (3, 0)]);
        assert_eq!(g.adjacency[0], g.adjacency[1]);
        let single = AccessStructure::new(&[vec![1, 2]]).unwrap();
        assert!(build_demand_graph(&single, &RateTuple::integral(&[2]), 0).left.is_empty());
    }

    #[test]
    fn matching_reproduces_example_choice() {
        let a = fixtures::example_access();
        let g = build_demand_graph(&a, &RateTuple::integral(&[1, 1, 1, 1]), 0);
        let m = max_matching(&g);
        assert_eq!(m.left_to_right, vec![Some(2), Some(4), Some(5)]);
    }

    #[test]
    fn matching_small_cases() {
        let g = DemandGraph {
            excluded_user: 0,
            left: vec![(1, 0), (1, 1)],
            adjacency: vec![vec![0], vec![0]],
            right_count: 1,
            scale: 1,
        };
        assert_eq!(max_matching(&g).size(), 1);
        let empty = DemandGraph {
            excluded_user: 0,
            left: vec![],
            adjacency: vec![],
            right_count: 3,
            scale: 1,
        };
        assert_eq!(max_matching(&empty).size(), 0);
    }

    #[test]
    fn plan_matches_example() {
        let a = fixtures::example_access();
        let plan = find_match_plan(&a, &RateTuple::integral(&[1, 1, 1, 1])).unwrap();
        assert_eq!(plan, fixtures::example_plan());
    }

    #[test]
    fn plan_invariant_failures() {
        let a = fixtures::example_access();
        let mut sets = fixtures::example_plan().sets().to_vec();
        sets[0][1] = set(&[1]);
        let err = MatchPlan::from_sets(&a, &[1, 1, 1, 1], sets).unwrap_err();
        assert!(matches!(err, MatchingError::PlanInvariant { k: 0, i: 1, .. }));

        let mut sets = fixtures::example_plan().sets().to_vec();
        sets[0][1] = set(&[4]);
        sets[0][2] = set(&[4]);
        let err = MatchPlan::from_sets(&a, &[1, 1, 1, 1], sets).unwrap_err();
        assert!(matches!(err, MatchingError::PlanInvariant { k: 0, .. }));
    }

    #[test]
    fn imperfect_matching_reported() {
        let a = fixtures::example_access();
        let err = find_match_plan(&a, &RateTuple::integral(&[2, 1, 1, 1])).unwrap_err();
        assert_eq!(err, MatchingError::ImperfectMatching(1));
    }

    #[test]
    fn hall_violator_examples() {
        let a = AccessStructure::new(&[vec![1, 2], vec![1, 2]]).unwrap();
        let r = RateTuple::integral(&[1, 1]);
        let g = build_demand_graph(&a, &r, 0);
        let v = hall_violator(&a, &r, &g, &max_matching(&g)).unwrap();
        assert_eq!((v.s.clone(), v.lhs, v.rhs), (vec![1], Rate::from_integer(1), 0));

        let a = fixtures::example_access();
        let r = RateTuple::integral(&[2, 1, 1, 1]);
        let g = build_demand_graph(&a, &r, 2);
        let v = hall_violator(&a, &r, &g, &max_matching(&g)).unwrap();
        assert_eq!((v.k, v.s.clone(), v.lhs, v.rhs), (Some(2), vec![0], Rate::from_integer(2), 1));

        let r = RateTuple::integral(&[1, 1, 1, 1]);
        let g = build_demand_graph(&a, &r, 2);
        assert_eq!(
            hall_violator(&a, &r, &g, &max_matching(&g)),
            Err(MatchingError::PerfectMatching)
        );
    }

    #[test]
    fn non_maximum_rejected() {
        let a = AccessStructure::new(&[vec![], vec![1]]).unwrap();
        let r = RateTuple::integral(&[0, 1]);
        let g = build_demand_graph(&a, &r, 0);
        let empty = Matching {
            left_to_right: vec![None],
        };
        assert_eq!(hall_violator(&a, &r, &g, &empty), Err(MatchingError::NotMaximum));
    }
}
