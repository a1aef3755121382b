//! Fairness checkers and exhaustive oracles.
//!
//! Each checker evaluates its definition directly with exact arithmetic and
//! reports every failing ordered pair. Nothing here calls into the solver.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::envy::{envy_freeable_by_permutation, PERMUTATION_ORACLE_MAX_AGENTS};
use crate::matching::MatchingTrace;
use crate::model::{bundle_value, cake_value, Bundle, DiscreteAllocation, Divisible, Instance, MixedAllocation, Ratio};

/// Largest `n^m` the brute-force oracle enumerates by default.
pub const DEFAULT_BRUTE_FORCE_BUDGET: u64 = 2187;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum VerifyError {
    #[error("{n} agents and {m} items give {count} allocations, over the budget of {budget}")]
    TooLarge {
        n: usize,
        m: usize,
        count: u128,
        budget: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub envier: usize,
    pub envied: usize,
    pub reason: String,
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "agent {} -> agent {}: {}", self.envier, self.envied, self.reason)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub verdict: bool,
    pub witnesses: Vec<Witness>,
}

impl FairnessReport {
    fn from_witnesses(witnesses: Vec<Witness>) -> Self {
        FairnessReport {
            verdict: witnesses.is_empty(),
            witnesses,
        }
    }
}

fn witness(i: usize, j: usize, reason: &str) -> Witness {
    Witness {
        envier: i,
        envied: j,
        reason: reason.to_string(),
    }
}

/// Whether `i` stops envying `j` after one item is removed from either
/// bundle, or already does not envy.
fn ef1_pair(inst: &Instance, i: usize, own: &Bundle, other: &Bundle) -> bool {
    let mine = bundle_value(inst, i, own);
    let theirs = bundle_value(inst, i, other);
    if mine >= theirs {
        return true;
    }
    own.iter().chain(other.iter()).any(|t| {
        let u = inst.utility(i, t);
        let a = if own.contains(t) { &mine - u } else { mine.clone() };
        let b = if other.contains(t) { &theirs - u } else { theirs.clone() };
        a >= b
    })
}

pub fn check_ef1(inst: &Instance, a: &DiscreteAllocation) -> FairnessReport {
    let n = inst.n();
    let mut out = Vec::new();
    for i in 0..n {
        for j in (0..n).filter(|&j| j != i) {
            if !ef1_pair(inst, i, &a.bundles[i], &a.bundles[j]) {
                out.push(witness(i, j, "no single removal removes the envy"));
            }
        }
    }
    FairnessReport::from_witnesses(out)
}

/// `u_i(A_i) + p_i >= u_i(A_j) + p_j` for every pair.
pub fn check_envy_free_money(inst: &Instance, a: &DiscreteAllocation, p: &[Ratio]) -> FairnessReport {
    let n = inst.n();
    let mut out = Vec::new();
    for i in 0..n {
        let mine = bundle_value(inst, i, &a.bundles[i]) + &p[i];
        for j in (0..n).filter(|&j| j != i) {
            if mine < bundle_value(inst, i, &a.bundles[j]) + &p[j] {
                out.push(witness(i, j, "envy remains after payments"));
            }
        }
    }
    FairnessReport::from_witnesses(out)
}

/// Per ordered pair: envy-free counting the divisible shares, or the envied
/// agent's divisible share is worthless to the envier and EF1 holds on the
/// discrete bundles.
pub fn check_efm(inst: &Instance, mixed: &MixedAllocation) -> FairnessReport {
    let n = inst.n();
    let a = &mixed.discrete;
    let share = |i: usize, j: usize| -> Ratio {
        match &mixed.divisible {
            Divisible::Payments(p) => p[j].clone(),
            Divisible::Pieces(pieces) => cake_value(inst, i, &pieces[j]),
        }
    };
    let clause = match mixed.divisible {
        Divisible::Payments(_) => "money clause",
        Divisible::Pieces(_) => "cake clause",
    };
    let mut out = Vec::new();
    for i in 0..n {
        let mine = bundle_value(inst, i, &a.bundles[i]) + share(i, i);
        for j in (0..n).filter(|&j| j != i) {
            let theirs_div = share(i, j);
            if mine >= bundle_value(inst, i, &a.bundles[j]) + &theirs_div {
                continue;
            }
            if !theirs_div.is_zero() {
                out.push(witness(i, j, clause));
            } else if !ef1_pair(inst, i, &a.bundles[i], &a.bundles[j]) {
                out.push(witness(i, j, "EF1 clause"));
            }
        }
    }
    FairnessReport::from_witnesses(out)
}

/// For every pair of agents `i, j` and rounds `t < t'`, agent `i` likes what
/// it got in round `t` at least as much as what `j` got in round `t'`.
/// Unmatched slots count as an empty bundle.
pub fn check_round_monotonicity(inst: &Instance, trace: &MatchingTrace) -> FairnessReport {
    let mut out = Vec::new();
    let value = |i: usize, t: usize, j: usize| -> Ratio {
        trace.rounds[t].assignment[j].map_or_else(Ratio::zero, |k| bundle_value(inst, i, &trace.pool[k].items))
    };
    for &i in &trace.agents {
        for &j in &trace.agents {
            let bad =
                (0..trace.rounds.len()).any(|t| (t + 1..trace.rounds.len()).any(|t2| value(i, t, i) < value(i, t2, j)));
            if bad {
                out.push(witness(i, j, "prefers a later-round item of the other agent"));
            }
        }
    }
    FairnessReport::from_witnesses(out)
}

fn allocation_count(inst: &Instance, budget: u64) -> Result<u64, VerifyError> {
    let (n, m) = (inst.n(), inst.m());
    let count = (n as u128).checked_pow(m as u32).unwrap_or(u128::MAX);
    if count > u128::from(budget) || n > PERMUTATION_ORACLE_MAX_AGENTS {
        return Err(VerifyError::TooLarge { n, m, count, budget });
    }
    Ok(count as u64)
}

/// The `idx`-th owner vector, item 0 as the most significant digit.
fn decode_owners(mut idx: u64, n: usize, m: usize) -> Vec<usize> {
    let mut owners = vec![0; m];
    for t in (0..m).rev() {
        owners[t] = (idx % n as u64) as usize;
        idx /= n as u64;
    }
    owners
}

fn ef1_and_efable(inst: &Instance, a: &DiscreteAllocation) -> bool {
    check_ef1(inst, a).verdict && envy_freeable_by_permutation(inst, a).unwrap_or(false)
}

/// First allocation in enumeration order that is EF1 and envy-freeable.
pub fn brute_force_ef1_efable(inst: &Instance, budget: u64) -> Result<Option<DiscreteAllocation>, VerifyError> {
    let count = allocation_count(inst, budget)?;
    let (n, m) = (inst.n(), inst.m());
    Ok((0..count)
        .into_par_iter()
        .map(|idx| DiscreteAllocation::from_owners(n, &decode_owners(idx, n, m)))
        .find_first(|a| ef1_and_efable(inst, a)))
}

/// Every EF1 and envy-freeable allocation, in enumeration order.
pub fn all_ef1_efable(inst: &Instance, budget: u64) -> Result<Vec<DiscreteAllocation>, VerifyError> {
    let count = allocation_count(inst, budget)?;
    let (n, m) = (inst.n(), inst.m());
    Ok((0..count)
        .into_par_iter()
        .map(|idx| DiscreteAllocation::from_owners(n, &decode_owners(idx, n, m)))
        .filter(|a| ef1_and_efable(inst, a))
        .collect())
}
