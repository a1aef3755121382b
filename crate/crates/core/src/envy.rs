//! Envy graphs, positive-cycle detection and heaviest-path subsidies.

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::model::{bundle_value, DiscreteAllocation, Instance, Ratio};

/// Largest agent count the permutation oracle will enumerate.
pub const PERMUTATION_ORACLE_MAX_AGENTS: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EnvyError {
    #[error("{n} agents exceed the permutation oracle limit of {PERMUTATION_ORACLE_MAX_AGENTS}")]
    TooLarge { n: usize },
    #[error("envy graph has a positive-weight cycle")]
    PositiveCycle,
}

/// Complete weighted digraph: `weight(i, j) = u_i(A_j) - u_i(A_i)`.
///
/// Nodes are local indices `0..n()`; [`EnvyGraph::agents`] maps them back to
/// agents of the instance when the graph was built over a subset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnvyGraph {
    agents: Vec<usize>,
    weights: Vec<Vec<Ratio>>,
}

impl EnvyGraph {
    /// Graph with explicit weights over agents `0..n`. The diagonal is zeroed.
    pub fn from_weights(mut weights: Vec<Vec<Ratio>>) -> Self {
        let n = weights.len();
        assert!(weights.iter().all(|r| r.len() == n), "weight matrix must be square");
        for (i, row) in weights.iter_mut().enumerate() {
            row[i] = Ratio::zero();
        }
        EnvyGraph {
            agents: (0..n).collect(),
            weights,
        }
    }

    pub fn n(&self) -> usize {
        self.agents.len()
    }

    pub fn agents(&self) -> &[usize] {
        &self.agents
    }

    pub fn weight(&self, i: usize, j: usize) -> &Ratio {
        &self.weights[i][j]
    }
}

/// Subsidy per graph node, all non-negative.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PaymentVector(pub Vec<Ratio>);

impl PaymentVector {
    pub fn total(&self) -> Ratio {
        self.0.iter().sum()
    }
}

pub fn build_envy_graph(inst: &Instance, a: &DiscreteAllocation, subset: Option<&[usize]>) -> EnvyGraph {
    let agents: Vec<usize> = match subset {
        Some(s) => s.to_vec(),
        None => (0..inst.n()).collect(),
    };
    let weights = agents
        .iter()
        .map(|&i| {
            let own = bundle_value(inst, i, &a.bundles[i]);
            agents
                .iter()
                .map(|&j| {
                    if i == j {
                        Ratio::zero()
                    } else {
                        bundle_value(inst, i, &a.bundles[j]) - &own
                    }
                })
                .collect()
        })
        .collect();
    EnvyGraph { agents, weights }
}

/// Bellman-Ford on negated weights from a virtual source joined to every node:
/// a negative cycle there is a positive cycle here.
pub fn has_positive_cycle(g: &EnvyGraph) -> bool {
    let n = g.n();
    let mut dist = vec![Ratio::zero(); n];
    for round in 0..=n {
        let mut changed = false;
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let cand = &dist[i] - g.weight(i, j);
                if cand < dist[j] {
                    dist[j] = cand;
                    changed = true;
                }
            }
        }
        if !changed {
            return false;
        }
        if round == n {
            return true;
        }
    }
    unreachable!()
}

/// Whether no reassignment of the bundles raises utilitarian welfare.
pub fn envy_freeable_by_permutation(inst: &Instance, a: &DiscreteAllocation) -> Result<bool, EnvyError> {
    let n = inst.n();
    if n > PERMUTATION_ORACLE_MAX_AGENTS {
        return Err(EnvyError::TooLarge { n });
    }
    let value: Vec<Vec<Ratio>> = (0..n)
        .map(|i| a.bundles.iter().map(|b| bundle_value(inst, i, b)).collect())
        .collect();
    let identity: Ratio = (0..n).map(|i| &value[i][i]).sum();
    Ok((0..n)
        .permutations(n)
        .all(|sigma| sigma.iter().enumerate().map(|(i, &s)| &value[i][s]).sum::<Ratio>() <= identity))
}

/// `q_i` = weight of the heaviest path starting at node `i` (the empty path
/// counts, so `q_i >= 0`). Paying `q` makes the allocation envy-free.
pub fn heaviest_path_payments(g: &EnvyGraph) -> Result<PaymentVector, EnvyError> {
    let n = g.n();
    let mut best = vec![Ratio::zero(); n];
    let relax = |best: &mut Vec<Ratio>| {
        let mut changed = false;
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let cand = g.weight(i, j) + &best[j];
                if cand > best[i] {
                    best[i] = cand;
                    changed = true;
                }
            }
        }
        changed
    };
    for _ in 1..n {
        if !relax(&mut best) {
            break;
        }
    }
    // Simple paths have at most n - 1 edges; any further gain needs a cycle.
    if relax(&mut best) {
        return Err(EnvyError::PositiveCycle);
    }
    Ok(PaymentVector(best))
}
