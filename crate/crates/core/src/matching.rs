//! Exact maximum-weight bipartite matching and the two iterative matching
//! procedures built on it: agent-perfect rounds over chores and meta-chores,
//! and non-perfect rounds over meta-goods.
//!
//! Ties are resolved inside the objective itself. Each edge carries a
//! lexicographic key `(feasibility, weight, cardinality, order)` where
//! `order` is a per-agent vector with `-column` in the agent's slot. Keys form
//! an ordered abelian group, so the Hungarian method runs on them unchanged
//! and its unique optimum is the maximum-weight matching that (in non-perfect
//! mode) has the most edges and then the lexicographically smallest
//! assignment vector.

use std::ops::{Add, Sub};

use serde::{Deserialize, Serialize};

use crate::model::{bundle_value, Bundle, DiscreteAllocation, Instance, Ratio};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MatchingError {
    #[error("weight matrix has {rows} rows but only {cols} columns")]
    TooFewColumns { rows: usize, cols: usize },
    #[error("weight matrix rows have unequal lengths")]
    Ragged,
    #[error("edge ({agent}, {good}) is out of range or has negative weight")]
    BadEdge { agent: usize, good: usize },
    #[error("pool of {pool} meta-items is not a multiple of {agents} agents")]
    PoolSize { pool: usize, agents: usize },
    #[error("meta-good {index} is valued negatively by every participating agent")]
    Orphan { index: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetaKind {
    Dummy,
    SingletonChore,
    MetaGood,
    MetaChore,
}

/// A bundle of items treated as one indivisible unit during matching.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MetaItem {
    pub kind: MetaKind,
    pub items: Bundle,
}

impl MetaItem {
    pub fn dummy() -> Self {
        MetaItem {
            kind: MetaKind::Dummy,
            items: Bundle::new(),
        }
    }

    pub fn chore(item: usize) -> Self {
        MetaItem {
            kind: MetaKind::SingletonChore,
            items: Bundle::singleton(item),
        }
    }

    pub fn good(items: Bundle) -> Self {
        MetaItem {
            kind: MetaKind::MetaGood,
            items,
        }
    }

    pub fn meta_chore(items: Bundle) -> Self {
        MetaItem {
            kind: MetaKind::MetaChore,
            items,
        }
    }

    pub fn value(&self, inst: &Instance, agent: usize) -> Ratio {
        bundle_value(inst, agent, &self.items)
    }
}

/// One matching round. `assignment[i]` indexes the pool (or the weight
/// matrix columns for the standalone solvers).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundMatching {
    pub assignment: Vec<Option<usize>>,
    pub value: Ratio,
}

/// Full record of an iterative matching run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchingTrace {
    /// Agents that took part; everyone else is unassigned in every round.
    pub agents: Vec<usize>,
    pub pool: Vec<MetaItem>,
    pub rounds: Vec<RoundMatching>,
    /// Pool indices received by each agent, in round order.
    pub allocation: Vec<Vec<usize>>,
}

impl MatchingTrace {
    /// Union of the items behind each agent's meta-items.
    pub fn bundles(&self) -> DiscreteAllocation {
        DiscreteAllocation {
            bundles: self
                .allocation
                .iter()
                .map(|got| {
                    let mut b = Bundle::new();
                    for &k in got {
                        b.extend(&self.pool[k].items);
                    }
                    b
                })
                .collect(),
        }
    }

    /// Value of the meta-item agent `i` got in round `t`; zero when unassigned.
    pub fn round_value(&self, inst: &Instance, t: usize, i: usize) -> Ratio {
        self.rounds[t].assignment[i].map_or_else(Ratio::zero, |k| self.pool[k].value(inst, i))
    }
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Key {
    feasible: i64,
    weight: Ratio,
    cardinality: i64,
    order: Vec<i64>,
}

impl Key {
    fn zero(n: usize) -> Key {
        Key {
            feasible: 0,
            weight: Ratio::zero(),
            cardinality: 0,
            order: vec![0; n],
        }
    }

    fn edge(n: usize, agent: usize, digit: usize, feasible: bool, weight: Ratio, counts: bool) -> Key {
        let mut order = vec![0; n];
        order[agent] = -(digit as i64);
        Key {
            feasible: if feasible { 0 } else { -1 },
            weight,
            cardinality: i64::from(counts),
            order,
        }
    }
}

impl Add<&Key> for &Key {
    type Output = Key;
    fn add(self, rhs: &Key) -> Key {
        Key {
            feasible: self.feasible + rhs.feasible,
            weight: &self.weight + &rhs.weight,
            cardinality: self.cardinality + rhs.cardinality,
            order: self.order.iter().zip(&rhs.order).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub<&Key> for &Key {
    type Output = Key;
    fn sub(self, rhs: &Key) -> Key {
        Key {
            feasible: self.feasible - rhs.feasible,
            weight: &self.weight - &rhs.weight,
            cardinality: self.cardinality - rhs.cardinality,
            order: self.order.iter().zip(&rhs.order).map(|(a, b)| a - b).collect(),
        }
    }
}

/// Hungarian method (shortest augmenting paths with potentials) maximizing
/// the summed key over assignments of every row to a distinct column.
/// Requires `rows <= cols`.
fn hungarian_max(rows: usize, cols: usize, key: impl Fn(usize, usize) -> Key) -> Vec<usize> {
    debug_assert!(rows <= cols);
    if rows == 0 {
        return Vec::new();
    }
    let zero = Key::zero(rows);
    let cost: Vec<Vec<Key>> = (0..rows)
        .map(|i| (0..cols).map(|j| &zero - &key(i, j)).collect())
        .collect();
    // 1-based rows/columns; column 0 is the virtual root.
    let mut u = vec![zero.clone(); rows + 1];
    let mut v = vec![zero.clone(); cols + 1];
    let mut owner = vec![0usize; cols + 1];
    let mut way = vec![0usize; cols + 1];
    for row in 1..=rows {
        owner[0] = row;
        let mut j0 = 0;
        let mut minv: Vec<Option<Key>> = vec![None; cols + 1];
        let mut used = vec![false; cols + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta: Option<Key> = None;
            let mut j1 = 0;
            for j in 1..=cols {
                if used[j] {
                    continue;
                }
                let cur = &(&cost[i0 - 1][j - 1] - &u[i0]) - &v[j];
                if minv[j].as_ref().is_none_or(|m| cur < *m) {
                    minv[j] = Some(cur);
                    way[j] = j0;
                }
                let mj = minv[j].as_ref().expect("set above");
                if delta.as_ref().is_none_or(|d| mj < d) {
                    delta = Some(mj.clone());
                    j1 = j;
                }
            }
            let delta = delta.expect("an unused column exists while rows <= cols");
            for j in 0..=cols {
                if used[j] {
                    u[owner[j]] = &u[owner[j]] + &delta;
                    v[j] = &v[j] - &delta;
                } else if let Some(m) = minv[j].as_mut() {
                    *m = &*m - &delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; rows];
    for j in 1..=cols {
        if owner[j] != 0 {
            assignment[owner[j] - 1] = j - 1;
        }
    }
    assignment
}

fn check_matrix(weights: &[Vec<Ratio>]) -> Result<usize, MatchingError> {
    let cols = weights.first().map_or(0, Vec::len);
    if weights.iter().any(|r| r.len() != cols) {
        return Err(MatchingError::Ragged);
    }
    if weights.len() > cols {
        return Err(MatchingError::TooFewColumns {
            rows: weights.len(),
            cols,
        });
    }
    Ok(cols)
}

/// Maximum-weight matching that assigns every row (agent) a distinct
/// column. Among optimal matchings the lexicographically smallest column
/// vector wins.
pub fn max_weight_perfect_matching(weights: &[Vec<Ratio>]) -> Result<RoundMatching, MatchingError> {
    let cols = check_matrix(weights)?;
    let n = weights.len();
    let assignment = hungarian_max(n, cols, |i, j| Key::edge(n, i, j, true, weights[i][j].clone(), false));
    let value = assignment.iter().enumerate().map(|(i, &j)| &weights[i][j]).sum();
    Ok(RoundMatching {
        assignment: assignment.into_iter().map(Some).collect(),
        value,
    })
}

/// Maximum-weight (not necessarily perfect) matching on a bipartite graph
/// with non-negative edge weights `(agent, good, weight)`. Ties go to larger
/// cardinality, then to the lexicographically smallest assignment vector with
/// "unmatched" ordered after every good.
pub fn max_weight_matching(
    agents: usize,
    goods: usize,
    edges: &[(usize, usize, Ratio)],
) -> Result<RoundMatching, MatchingError> {
    let mut adj: Vec<Vec<Option<Ratio>>> = vec![vec![None; goods]; agents];
    for (i, g, w) in edges {
        if *i >= agents || *g >= goods || w.is_negative() {
            return Err(MatchingError::BadEdge { agent: *i, good: *g });
        }
        let slot = &mut adj[*i][*g];
        if slot.as_ref().is_none_or(|old| w > old) {
            *slot = Some(w.clone());
        }
    }
    // One slack column per agent stands for "unmatched".
    let assignment = hungarian_max(agents, goods + agents, |i, j| {
        if j >= goods {
            Key::edge(agents, i, goods, true, Ratio::zero(), false)
        } else {
            match &adj[i][j] {
                Some(w) => Key::edge(agents, i, j, true, w.clone(), true),
                None => Key::edge(agents, i, j, false, Ratio::zero(), false),
            }
        }
    });
    let assignment: Vec<Option<usize>> = assignment.into_iter().map(|j| (j < goods).then_some(j)).collect();
    let value = assignment
        .iter()
        .enumerate()
        .filter_map(|(i, j)| j.map(|j| adj[i][j].clone().expect("optimum uses only real edges")))
        .sum();
    Ok(RoundMatching { assignment, value })
}

fn finish_trace(n: usize, agents: Vec<usize>, pool: Vec<MetaItem>, rounds: Vec<RoundMatching>) -> MatchingTrace {
    let mut allocation = vec![Vec::new(); n];
    for round in &rounds {
        for (i, got) in round.assignment.iter().enumerate() {
            if let Some(k) = got {
                allocation[i].push(*k);
            }
        }
    }
    MatchingTrace {
        agents,
        pool,
        rounds,
        allocation,
    }
}

/// Iterative maximum-weight perfect matching: `|pool| / n` rounds, each
/// matching every agent to one remaining meta-item. The caller pads the
/// pool with dummies to a multiple of `n`.
pub fn imwpm(inst: &Instance, pool: Vec<MetaItem>) -> Result<MatchingTrace, MatchingError> {
    let n = inst.n();
    if !pool.len().is_multiple_of(n) {
        return Err(MatchingError::PoolSize {
            pool: pool.len(),
            agents: n,
        });
    }
    let values: Vec<Vec<Ratio>> = (0..n)
        .map(|i| pool.iter().map(|h| h.value(inst, i)).collect())
        .collect();
    let mut remaining: Vec<usize> = (0..pool.len()).collect();
    let mut rounds = Vec::with_capacity(pool.len() / n);
    while !remaining.is_empty() {
        let weights: Vec<Vec<Ratio>> = (0..n)
            .map(|i| remaining.iter().map(|&k| values[i][k].clone()).collect())
            .collect();
        let local = max_weight_perfect_matching(&weights)?;
        let assignment: Vec<Option<usize>> = local.assignment.iter().map(|c| c.map(|c| remaining[c])).collect();
        let taken: Vec<usize> = assignment.iter().flatten().copied().collect();
        remaining.retain(|k| !taken.contains(k));
        rounds.push(RoundMatching {
            assignment,
            value: local.value,
        });
    }
    Ok(finish_trace(n, (0..n).collect(), pool, rounds))
}

/// Iterative maximum-weight matching of meta-goods to `agents`: an edge
/// exists only where the agent values the meta-good non-negatively. Runs
/// until every meta-good is taken.
pub fn imwm(inst: &Instance, agents: &[usize], goods: Vec<MetaItem>) -> Result<MatchingTrace, MatchingError> {
    let values: Vec<Vec<Ratio>> = agents
        .iter()
        .map(|&i| goods.iter().map(|h| h.value(inst, i)).collect())
        .collect();
    for k in 0..goods.len() {
        if values.iter().all(|row| row[k].is_negative()) {
            return Err(MatchingError::Orphan { index: k });
        }
    }
    let mut remaining: Vec<usize> = (0..goods.len()).collect();
    let mut rounds = Vec::new();
    while !remaining.is_empty() {
        let edges: Vec<(usize, usize, Ratio)> = values
            .iter()
            .enumerate()
            .flat_map(|(a, row)| {
                remaining
                    .iter()
                    .enumerate()
                    .filter(move |(_, &k)| !row[k].is_negative())
                    .map(move |(c, &k)| (a, c, row[k].clone()))
            })
            .collect();
        let local = max_weight_matching(agents.len(), remaining.len(), &edges)?;
        let mut assignment = vec![None; inst.n()];
        for (a, c) in local.assignment.iter().enumerate() {
            assignment[agents[a]] = c.map(|c| remaining[c]);
        }
        let taken: Vec<usize> = assignment.iter().flatten().copied().collect();
        // Orphan check above guarantees every round takes at least one good.
        debug_assert!(!taken.is_empty());
        remaining.retain(|k| !taken.contains(k));
        rounds.push(RoundMatching {
            assignment,
            value: local.value,
        });
    }
    Ok(finish_trace(inst.n(), agents.to_vec(), goods, rounds))
}

#[cfg(test)]
mod tests {
    use super::*;
    use itertools::Itertools;

    fn ints(rows: &[&[i64]]) -> Vec<Vec<Ratio>> {
        rows.iter()
            .map(|r| r.iter().map(|&x| Ratio::from_integer(x)).collect())
            .collect()
    }

    fn brute_perfect(w: &[Vec<Ratio>]) -> Ratio {
        let n = w.len();
        let cols = w[0].len();
        (0..cols)
            .permutations(n)
            .map(|p| p.iter().enumerate().map(|(i, &j)| &w[i][j]).sum::<Ratio>())
            .max()
            .unwrap()
    }

    #[test]
    fn perfect_matching_examples() {
        let m = max_weight_perfect_matching(&ints(&[&[-1, -2], &[-7, -2]])).unwrap();
        assert_eq!(m.assignment, vec![Some(0), Some(1)]);
        assert_eq!(m.value, Ratio::from_integer(-3));

        let m = max_weight_perfect_matching(&ints(&[&[0, 0, 0], &[0, 0, 0], &[0, 0, 0]])).unwrap();
        assert_eq!(m.assignment, vec![Some(0), Some(1), Some(2)]);
        assert_eq!(m.value, Ratio::zero());

        let m = max_weight_perfect_matching(&ints(&[&[5]])).unwrap();
        assert_eq!(m.value, Ratio::from_integer(5));
    }

    #[test]
    fn perfect_matching_rejects_bad_shapes() {
        assert_eq!(
            max_weight_perfect_matching(&ints(&[&[1], &[2]])),
            Err(MatchingError::TooFewColumns { rows: 2, cols: 1 })
        );
        assert_eq!(
            max_weight_perfect_matching(&ints(&[&[1, 2], &[2]])),
            Err(MatchingError::Ragged)
        );
    }

    #[test]
    fn perfect_matching_tie_break_is_lexicographic() {
        // Two optima of value 3: (0->1, 1->0) and (0->2, 1->0); smaller wins.
        let w = ints(&[&[0, 2, 2], &[1, 0, 0]]);
        let m = max_weight_perfect_matching(&w).unwrap();
        assert_eq!(m.assignment, vec![Some(1), Some(0)]);
    }

    #[test]
    fn perfect_matching_agrees_with_enumeration() {
        let w = ints(&[&[3, -1, 4, 1], &[-5, 9, 2, 6], &[5, 3, -5, 8]]);
        let m = max_weight_perfect_matching(&w).unwrap();
        assert_eq!(m.value, brute_perfect(&w));
    }

    #[test]
    fn non_perfect_matching_examples() {
        let r = |x| Ratio::from_integer(x);
        let m = max_weight_matching(2, 1, &[(0, 0, r(2)), (1, 0, r(3))]).unwrap();
        assert_eq!(m.assignment, vec![None, Some(0)]);
        assert_eq!(m.value, r(3));

        let m = max_weight_matching(2, 3, &[]).unwrap();
        assert_eq!(m.assignment, vec![None, None]);
        assert_eq!(m.value, Ratio::zero());

        let m = max_weight_matching(2, 2, &[(0, 0, r(1)), (1, 1, r(1))]).unwrap();
        assert_eq!(m.assignment, vec![Some(0), Some(1)]);
        assert_eq!(m.value, r(2));

        assert!(matches!(
            max_weight_matching(1, 1, &[(0, 0, r(-1))]),
            Err(MatchingError::BadEdge { .. })
        ));
    }

    #[test]
    fn non_perfect_prefers_cardinality_on_ties() {
        let r = |x| Ratio::from_integer(x);
        // Agent 0 alone on good 0 (value 2) vs agent 0 on good 1 plus agent 1 on good 0 (2 + 0).
        let m = max_weight_matching(2, 2, &[(0, 0, r(2)), (0, 1, r(2)), (1, 0, r(0))]).unwrap();
        assert_eq!(m.assignment, vec![Some(1), Some(0)]);
    }

    #[test]
    fn imwpm_examples() {
        let inst = Instance::from_integers(&[vec![-1, -3], vec![-1, -1]]);
        let trace = imwpm(&inst, vec![MetaItem::chore(0), MetaItem::chore(1)]).unwrap();
        assert_eq!(trace.rounds.len(), 1);
        assert_eq!(trace.allocation, vec![vec![0], vec![1]]);
        assert_eq!(trace.rounds[0].value, Ratio::from_integer(-2));

        let trace = imwpm(&inst, vec![MetaItem::dummy(), MetaItem::dummy()]).unwrap();
        assert_eq!(trace.rounds[0].value, Ratio::zero());
        assert!(trace.bundles().bundles.iter().all(Bundle::is_empty));

        let four = Instance::from_integers(&[vec![-1; 4], vec![-1; 4]]);
        let trace = imwpm(&four, (0..4).map(MetaItem::chore).collect()).unwrap();
        assert_eq!(trace.rounds.len(), 2);
        assert!(trace.bundles().bundles.iter().all(|b| b.len() == 2));

        assert!(matches!(
            imwpm(&inst, vec![MetaItem::dummy()]),
            Err(MatchingError::PoolSize { .. })
        ));
    }

    #[test]
    fn imwm_examples() {
        let inst = Instance::from_integers(&[vec![2, -1], vec![-1, 2]]);
        let goods = vec![
            MetaItem::good(Bundle::singleton(0)),
            MetaItem::good(Bundle::singleton(1)),
        ];
        let trace = imwm(&inst, &[0, 1], goods).unwrap();
        assert_eq!(trace.rounds.len(), 1);
        assert_eq!(trace.allocation, vec![vec![0], vec![1]]);
        assert_eq!(trace.rounds[0].value, Ratio::from_integer(4));

        let single = Instance::from_integers(&[vec![5]]);
        let trace = imwm(&single, &[0], vec![MetaItem::good(Bundle::singleton(0))]).unwrap();
        assert_eq!(trace.allocation, vec![vec![0]]);

        let tie = Instance::from_integers(&[vec![3, 2], vec![1, 0]]);
        let goods = vec![
            MetaItem::good(Bundle::singleton(0)),
            MetaItem::good(Bundle::singleton(1)),
        ];
        let trace = imwm(&tie, &[0, 1], goods).unwrap();
        assert_eq!(trace.allocation, vec![vec![0], vec![1]]);
    }

    #[test]
    fn imwm_rejects_orphans() {
        let inst = Instance::from_integers(&[vec![-1], vec![3]]);
        let goods = vec![MetaItem::good(Bundle::singleton(0))];
        assert_eq!(
            imwm(&inst, &[0], goods.clone()),
            Err(MatchingError::Orphan { index: 0 })
        );
        // Agents outside the subset never receive anything.
        let trace = imwm(&inst, &[1], goods).unwrap();
        assert_eq!(trace.allocation, vec![vec![], vec![0]]);
        assert_eq!(trace.rounds[0].assignment, vec![None, Some(0)]);
    }

    #[test]
    fn imwm_leaves_agents_without_edges_unmatched() {
        // Agent 0 values both goods, agent 1 neither; two rounds.
        let inst = Instance::from_integers(&[vec![4, 1], vec![-1, -1]]);
        let goods = vec![
            MetaItem::good(Bundle::singleton(0)),
            MetaItem::good(Bundle::singleton(1)),
        ];
        let trace = imwm(&inst, &[0, 1], goods).unwrap();
        assert_eq!(trace.rounds.len(), 2);
        assert_eq!(trace.allocation, vec![vec![0, 1], vec![]]);
    }
}
