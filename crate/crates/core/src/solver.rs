//! EF1 and envy-freeable allocations of mixed goods and chores.
//!
//! After the initial merge the instance falls into one of five cases:
//!
//! * `empty`: no items.
//! * `chores-only`: every item is an objective chore; iterative perfect
//!   matching over the chores padded with dummies.
//! * `I`: at least `n` objective chores remain. Every meta-good is attached
//!   to a distinct chore, and the attachment whose round values are
//!   lexicographically largest is kept.
//! * `II.1`: no chores remain (possibly after refinement); iterative
//!   matching over good-minimal meta-goods.
//! * `II.2`: between 1 and `n - 1` chores remain after refinement. Loose
//!   goods and meta-goods are distributed over the chores, one perfect
//!   matching decides who takes a chore, and the agents matched to dummies
//!   share the leftovers.
//!
//! The two searches are exhaustive up to a candidate budget. Beyond it the
//! solver fails unless the local-search mode is enabled.

use std::cmp::Ordering;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bundling::{
    is_chore_maximal, is_good_minimal, iterative_item_merge, make_good_minimal, refine, BundlingError, BundlingState,
};
use crate::matching::{
    imwm, imwpm, max_weight_perfect_matching, MatchingError, MatchingTrace, MetaItem, RoundMatching,
};
use crate::model::{bundle_value, Bundle, DiscreteAllocation, Instance, Ratio};

pub const DEFAULT_BUDGET: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CaseTag {
    #[serde(rename = "empty")]
    Empty,
    #[serde(rename = "chores-only")]
    ChoresOnly,
    #[serde(rename = "I")]
    ManyChores,
    #[serde(rename = "II.1")]
    NoChores,
    #[serde(rename = "II.2")]
    FewChores,
}

impl fmt::Display for CaseTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CaseTag::Empty => "empty",
            CaseTag::ChoresOnly => "chores-only",
            CaseTag::ManyChores => "I",
            CaseTag::NoChores => "II.1",
            CaseTag::FewChores => "II.2",
        })
    }
}

/// The choice made by the case's search.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Choice {
    None,
    /// `targets[r]` is the chore (item index) meta-good `r` is attached to.
    Injection {
        targets: Vec<usize>,
    },
    /// `sets[i]` lists indices into [`BundlingState::goods_pool`] attached
    /// to the `i`-th chore; `dummy_agents` were matched to dummies.
    ChoreSets {
        sets: Vec<Vec<usize>>,
        dummy_agents: Vec<usize>,
    },
}

/// Enough information to rebuild the allocation without searching.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolveCertificate {
    pub case: CaseTag,
    pub bundling: BundlingState,
    pub choice: Choice,
    pub traces: Vec<MatchingTrace>,
    /// Whether local search replaced exhaustive search.
    pub heuristic: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Solution {
    pub allocation: DiscreteAllocation,
    pub certificate: SolveCertificate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolverConfig {
    /// Maximum number of candidates an exhaustive search may evaluate.
    pub budget: u64,
    /// Fall back to local search instead of failing when over budget.
    pub heuristic: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            budget: DEFAULT_BUDGET,
            heuristic: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SolveError {
    #[error("case {case} needs {candidates} candidates, over the budget of {budget}")]
    BudgetExceeded {
        case: CaseTag,
        candidates: u128,
        budget: u64,
    },
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("internal invariant violated: {0}")]
    Invariant(String),
    #[error(transparent)]
    Matching(#[from] MatchingError),
    #[error(transparent)]
    Bundling(#[from] BundlingError),
}

pub fn solve_ef1_envy_freeable(inst: &Instance) -> Result<Solution, SolveError> {
    solve(inst, &SolverConfig::default())
}

pub fn solve(inst: &Instance, config: &SolverConfig) -> Result<Solution, SolveError> {
    if inst.m() == 0 {
        return Ok(Solution {
            allocation: DiscreteAllocation::empty(inst.n()),
            certificate: SolveCertificate {
                case: CaseTag::Empty,
                bundling: BundlingState {
                    meta_goods: Vec::new(),
                    loose_goods: Bundle::new(),
                    chores: Bundle::new(),
                },
                choice: Choice::None,
                traces: Vec::new(),
                heuristic: false,
            },
        });
    }
    if (0..inst.m()).all(|t| inst.is_objective_chore(t)) {
        return solve_chores_only(inst);
    }
    let state = iterative_item_merge(inst);
    let k = state.chores.len();
    if k >= inst.n() {
        solve_case_one(inst, state, config)
    } else if k == 0 {
        solve_case_two_zero(inst, state)
    } else {
        let refined = refine(inst, state)?;
        if refined.chores.is_empty() {
            solve_case_two_zero(inst, refined)
        } else {
            solve_case_two_pos(inst, refined, config)
        }
    }
}

fn padded(mut pool: Vec<MetaItem>, n: usize) -> Vec<MetaItem> {
    while !pool.len().is_multiple_of(n) {
        pool.push(MetaItem::dummy());
    }
    pool
}

pub fn solve_chores_only(inst: &Instance) -> Result<Solution, SolveError> {
    if let Some(t) = (0..inst.m()).find(|&t| !inst.is_objective_chore(t)) {
        return Err(SolveError::Precondition(format!(
            "item `{}` is not an objective chore",
            inst.item_ids()[t]
        )));
    }
    let chores: Bundle = (0..inst.m()).collect();
    let trace = imwpm(inst, padded(chores.iter().map(MetaItem::chore).collect(), inst.n()))?;
    Ok(Solution {
        allocation: trace.bundles(),
        certificate: SolveCertificate {
            case: CaseTag::ChoresOnly,
            bundling: BundlingState {
                meta_goods: Vec::new(),
                loose_goods: Bundle::new(),
                chores,
            },
            choice: Choice::None,
            traces: vec![trace],
            heuristic: false,
        },
    })
}

fn falling_factorial(k: usize, l: usize) -> u128 {
    (0..l).fold(1u128, |acc, r| acc.saturating_mul((k - r) as u128))
}

/// The `idx`-th injection `[l] -> [k]` in lexicographic order.
fn decode_injection(mut idx: u128, k: usize, l: usize) -> Vec<usize> {
    let mut free: Vec<usize> = (0..k).collect();
    let mut out = Vec::with_capacity(l);
    for r in 0..l {
        let block = falling_factorial(k - r - 1, l - r - 1);
        let digit = (idx / block) as usize;
        idx %= block;
        out.push(free.remove(digit));
    }
    out
}

/// Pool for attachment `phi` (positions into the chore list): chores in
/// order, attached ones carrying their meta-good, then dummies.
fn attachment_pool(state: &BundlingState, phi: &[usize], n: usize) -> Vec<MetaItem> {
    let chores = state.chores.items();
    let pool = chores
        .iter()
        .enumerate()
        .map(|(pos, &c)| match phi.iter().position(|&p| p == pos) {
            Some(r) => MetaItem::meta_chore(state.meta_goods[r].union(&Bundle::singleton(c))),
            None => MetaItem::chore(c),
        })
        .collect();
    padded(pool, n)
}

fn round_values(trace: &MatchingTrace) -> Vec<Ratio> {
    trace.rounds.iter().map(|r| r.value.clone()).collect()
}

struct Scored<K> {
    key: K,
    tie: Vec<usize>,
}

/// Higher key wins; equal keys go to the smaller tie vector.
fn better<K: Ord>(a: Scored<K>, b: Scored<K>) -> Scored<K> {
    match a.key.cmp(&b.key) {
        Ordering::Greater => a,
        Ordering::Less => b,
        Ordering::Equal => {
            if a.tie <= b.tie {
                a
            } else {
                b
            }
        }
    }
}

fn pick<K: Ord>(a: Result<Scored<K>, SolveError>, b: Result<Scored<K>, SolveError>) -> Result<Scored<K>, SolveError> {
    Ok(better(a?, b?))
}

/// Steepest-ascent local search from `start` over `neighbours`.
fn hill_climb<K: Ord + Clone>(
    start: Vec<usize>,
    eval: impl Fn(&[usize]) -> Result<K, SolveError>,
    neighbours: impl Fn(&[usize]) -> Vec<Vec<usize>>,
) -> Result<Vec<usize>, SolveError> {
    let mut current = Scored {
        key: eval(&start)?,
        tie: start,
    };
    loop {
        let mut best: Option<Scored<K>> = None;
        for cand in neighbours(&current.tie) {
            let scored = Scored {
                key: eval(&cand)?,
                tie: cand,
            };
            best = Some(match best {
                None => scored,
                Some(b) => better(b, scored),
            });
        }
        match best {
            Some(b) if b.key > current.key => current = b,
            _ => return Ok(current.tie),
        }
    }
}

pub fn solve_case_one(inst: &Instance, state: BundlingState, config: &SolverConfig) -> Result<Solution, SolveError> {
    let n = inst.n();
    let k = state.chores.len();
    let l = state.meta_goods.len();
    if k < n || l > k {
        return Err(SolveError::Precondition(format!(
            "{k} chores cannot host {l} meta-goods for {n} agents"
        )));
    }
    for m in &state.meta_goods {
        if !is_chore_maximal(inst, m, &state.chores)? {
            return Err(SolveError::Precondition(format!(
                "meta-good {:?} is not chore-maximal",
                m.items()
            )));
        }
    }
    let eval = |phi: &[usize]| -> Result<Vec<Ratio>, SolveError> {
        Ok(round_values(&imwpm(inst, attachment_pool(&state, phi, n))?))
    };
    let count = falling_factorial(k, l);
    let (phi, heuristic) = if count <= u128::from(config.budget) {
        let best = (0..count)
            .into_par_iter()
            .map(|idx| {
                let phi = decode_injection(idx, k, l);
                Ok(Scored {
                    key: eval(&phi)?,
                    tie: phi,
                })
            })
            .reduce_with(pick)
            .expect("at least one injection exists")?;
        (best.tie, false)
    } else if config.heuristic {
        let moves = |phi: &[usize]| {
            let mut out = Vec::new();
            for r in 0..l {
                for c in (0..k).filter(|c| !phi.contains(c)) {
                    let mut next = phi.to_vec();
                    next[r] = c;
                    out.push(next);
                }
                for r2 in r + 1..l {
                    let mut next = phi.to_vec();
                    next.swap(r, r2);
                    out.push(next);
                }
            }
            out
        };
        (hill_climb((0..l).collect(), eval, moves)?, true)
    } else {
        return Err(SolveError::BudgetExceeded {
            case: CaseTag::ManyChores,
            candidates: count,
            budget: config.budget,
        });
    };

    let trace = imwpm(inst, attachment_pool(&state, &phi, n))?;
    // Each attached meta-good must end up with an agent who values it
    // non-negatively; EF1 relies on it.
    for (r, &pos) in phi.iter().enumerate() {
        let owner = trace
            .allocation
            .iter()
            .position(|got| got.contains(&pos))
            .ok_or_else(|| SolveError::Invariant(format!("meta-chore {r} was not matched")))?;
        if bundle_value(inst, owner, &state.meta_goods[r]).is_negative() {
            return Err(SolveError::Invariant(format!(
                "meta-good {:?} went to agent {owner}, who values it negatively",
                state.meta_goods[r].items()
            )));
        }
    }
    let targets = phi.iter().map(|&p| state.chores.items()[p]).collect();
    Ok(Solution {
        allocation: trace.bundles(),
        certificate: SolveCertificate {
            case: CaseTag::ManyChores,
            bundling: state,
            choice: Choice::Injection { targets },
            traces: vec![trace],
            heuristic,
        },
    })
}

pub fn solve_case_two_zero(inst: &Instance, state: BundlingState) -> Result<Solution, SolveError> {
    if !state.chores.is_empty() {
        return Err(SolveError::Precondition("objective chores remain".into()));
    }
    let metas = make_good_minimal(inst, state.goods_pool());
    let all: Vec<usize> = (0..inst.n()).collect();
    let trace = imwm(inst, &all, metas.iter().cloned().map(MetaItem::good).collect())?;
    Ok(Solution {
        allocation: trace.bundles(),
        certificate: SolveCertificate {
            case: CaseTag::NoChores,
            bundling: BundlingState {
                meta_goods: metas,
                loose_goods: Bundle::new(),
                chores: Bundle::new(),
            },
            choice: Choice::None,
            traces: vec![trace],
            heuristic: false,
        },
    })
}

/// Assignment code: `assign[e] = 0` leaves pool element `e` out, `i + 1`
/// attaches it to chore `i`.
fn sets_from_assignment(assign: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut sets = vec![Vec::new(); k];
    for (e, &a) in assign.iter().enumerate() {
        if a > 0 {
            sets[a - 1].push(e);
        }
    }
    sets
}

fn chore_set_pool(state: &BundlingState, pool: &[Bundle], sets: &[Vec<usize>], n: usize) -> Vec<MetaItem> {
    let mut items: Vec<MetaItem> = state
        .chores
        .iter()
        .zip(sets)
        .map(|(c, set)| {
            let mut b = Bundle::singleton(c);
            for &e in set {
                b.extend(&pool[e]);
            }
            MetaItem::meta_chore(b)
        })
        .collect();
    items.resize(n, MetaItem::dummy());
    items
}

fn perfect_round(inst: &Instance, items: &[MetaItem]) -> Result<RoundMatching, SolveError> {
    let weights: Vec<Vec<Ratio>> = (0..inst.n())
        .map(|i| items.iter().map(|h| h.value(inst, i)).collect())
        .collect();
    Ok(max_weight_perfect_matching(&weights)?)
}

/// Candidate key: matching value, then total attached elements. Ties go to
/// the lexicographically smallest list of sets.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord)]
struct SetsKey {
    value: Ratio,
    attached: usize,
}

pub fn solve_case_two_pos(
    inst: &Instance,
    state: BundlingState,
    config: &SolverConfig,
) -> Result<Solution, SolveError> {
    let n = inst.n();
    let k = state.chores.len();
    if k == 0 || k >= n {
        return Err(SolveError::Precondition(format!("{k} chores for {n} agents")));
    }
    for m in &state.meta_goods {
        if !is_good_minimal(inst, m)? || !is_chore_maximal(inst, m, &state.chores)? {
            return Err(SolveError::Precondition(format!(
                "meta-good {:?} is not good-minimal and chore-maximal",
                m.items()
            )));
        }
    }
    if !state.supporter_sets_disjoint(inst) || !state.chores_unabsorbable(inst) {
        return Err(SolveError::Precondition("bundling is not refined".into()));
    }
    let pool = state.goods_pool();
    let p = pool.len();
    let eval = |assign: &[usize]| -> Result<(SetsKey, Vec<Vec<usize>>), SolveError> {
        let sets = sets_from_assignment(assign, k);
        let round = perfect_round(inst, &chore_set_pool(&state, &pool, &sets, n))?;
        let key = SetsKey {
            value: round.value,
            attached: assign.iter().filter(|&&a| a > 0).count(),
        };
        Ok((key, sets))
    };
    let count = (k as u128 + 1).checked_pow(p as u32).unwrap_or(u128::MAX);
    let (sets, heuristic) = if count <= u128::from(config.budget) {
        let best = (0..count)
            .into_par_iter()
            .map(|idx| {
                let mut code = idx;
                let assign: Vec<usize> = (0..p)
                    .map(|_| {
                        let d = (code % (k as u128 + 1)) as usize;
                        code /= k as u128 + 1;
                        d
                    })
                    .collect();
                let (key, sets) = eval(&assign)?;
                Ok(Scored {
                    key,
                    tie: encode_sets(&sets),
                })
            })
            .reduce_with(pick)
            .expect("at least the empty collection exists")?;
        (decode_sets(&best.tie, k), false)
    } else if config.heuristic {
        let moves = |assign: &[usize]| {
            let mut out = Vec::new();
            for e in 0..p {
                for a in (0..=k).filter(|&a| a != assign[e]) {
                    let mut next = assign.to_vec();
                    next[e] = a;
                    out.push(next);
                }
            }
            out
        };
        // Lexicographic set order as the last tie-break: compare encodings reversed.
        let key = |assign: &[usize]| -> Result<(SetsKey, std::cmp::Reverse<Vec<usize>>), SolveError> {
            let (key, sets) = eval(assign)?;
            Ok((key, std::cmp::Reverse(encode_sets(&sets))))
        };
        let assign = hill_climb(vec![0; p], key, moves)?;
        (sets_from_assignment(&assign, k), true)
    } else {
        return Err(SolveError::BudgetExceeded {
            case: CaseTag::FewChores,
            candidates: count,
            budget: config.budget,
        });
    };

    let (allocation, traces, dummy_agents) = chore_set_allocation(inst, &state, &pool, &sets)?;
    check_chore_set_observations(inst, &state, &pool, &sets, &traces[0], &dummy_agents)?;
    Ok(Solution {
        allocation,
        certificate: SolveCertificate {
            case: CaseTag::FewChores,
            bundling: state,
            choice: Choice::ChoreSets { sets, dummy_agents },
            traces,
            heuristic,
        },
    })
}

/// Sets flattened with a separator so that plain vector comparison orders
/// them set by set.
fn encode_sets(sets: &[Vec<usize>]) -> Vec<usize> {
    let mut out = Vec::new();
    for s in sets {
        out.extend(s.iter().map(|e| e + 1));
        out.push(0);
    }
    out
}

fn decode_sets(code: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut sets = vec![Vec::new(); k];
    let mut i = 0;
    for &x in code {
        if x == 0 {
            i += 1;
        } else {
            sets[i].push(x - 1);
        }
    }
    sets
}

/// Chore receivers get their chore plus attached elements; the leftovers
/// go to the dummy-matched agents by iterative matching.
fn chore_set_allocation(
    inst: &Instance,
    state: &BundlingState,
    pool: &[Bundle],
    sets: &[Vec<usize>],
) -> Result<(DiscreteAllocation, Vec<MatchingTrace>, Vec<usize>), SolveError> {
    let n = inst.n();
    let k = state.chores.len();
    let items = chore_set_pool(state, pool, sets, n);
    let round = perfect_round(inst, &items)?;
    let dummy_agents: Vec<usize> = (0..n)
        .filter(|&i| round.assignment[i].is_some_and(|c| c >= k))
        .collect();
    let first = MatchingTrace {
        agents: (0..n).collect(),
        allocation: round.assignment.iter().map(|c| c.iter().copied().collect()).collect(),
        pool: items.clone(),
        rounds: vec![round.clone()],
    };
    let attached: Vec<usize> = sets.iter().flatten().copied().collect();
    let leftovers: Vec<MetaItem> = (0..pool.len())
        .filter(|e| !attached.contains(e))
        .map(|e| MetaItem::good(pool[e].clone()))
        .collect();
    let rest = imwm(inst, &dummy_agents, leftovers).map_err(|e| match e {
        MatchingError::Orphan { index } => SolveError::Invariant(format!(
            "leftover element {index} has no supporter among dummy-matched agents"
        )),
        other => other.into(),
    })?;
    let mut allocation = rest.bundles();
    for (i, c) in round.assignment.iter().enumerate() {
        if let Some(c) = c.filter(|&c| c < k) {
            allocation.bundles[i].extend(&items[c].items);
        }
    }
    Ok((allocation, vec![first, rest], dummy_agents))
}

fn check_chore_set_observations(
    inst: &Instance,
    state: &BundlingState,
    pool: &[Bundle],
    sets: &[Vec<usize>],
    first: &MatchingTrace,
    dummy_agents: &[usize],
) -> Result<(), SolveError> {
    let n = inst.n();
    let k = state.chores.len();
    for (i, c) in first.rounds[0].assignment.iter().enumerate() {
        let Some(c) = c.filter(|&c| c < k) else { continue };
        if let Some(&e) = sets[c].iter().find(|&&e| bundle_value(inst, i, &pool[e]).is_negative()) {
            return Err(SolveError::Invariant(format!(
                "agent {i} took chore bundle {c} but values attached element {e} negatively"
            )));
        }
    }
    let attached: Vec<usize> = sets.iter().flatten().copied().collect();
    for e in (0..pool.len()).filter(|e| !attached.contains(e)) {
        for r in (0..n).filter(|r| !dummy_agents.contains(r)) {
            if !bundle_value(inst, r, &pool[e]).is_negative() {
                return Err(SolveError::Invariant(format!(
                    "chore receiver {r} values leftover element {e} non-negatively"
                )));
            }
        }
    }
    for (c, h) in first.pool.iter().take(k).enumerate() {
        if let Some(r) = (0..n).find(|&r| !h.value(inst, r).is_negative()) {
            return Err(SolveError::Invariant(format!(
                "agent {r} values chore bundle {c} non-negatively"
            )));
        }
    }
    Ok(())
}

/// Rebuilds the allocation recorded in a certificate without searching.
pub fn replay(inst: &Instance, cert: &SolveCertificate) -> Result<DiscreteAllocation, SolveError> {
    let n = inst.n();
    let state = &cert.bundling;
    let mismatch = || SolveError::Precondition(format!("choice does not fit case {}", cert.case));
    match (&cert.case, &cert.choice) {
        (CaseTag::Empty, Choice::None) => Ok(DiscreteAllocation::empty(n)),
        (CaseTag::ChoresOnly, Choice::None) => {
            let pool = padded(state.chores.iter().map(MetaItem::chore).collect(), n);
            Ok(imwpm(inst, pool)?.bundles())
        }
        (CaseTag::NoChores, Choice::None) => {
            let all: Vec<usize> = (0..n).collect();
            let pool = state.goods_pool().into_iter().map(MetaItem::good).collect();
            Ok(imwm(inst, &all, pool)?.bundles())
        }
        (CaseTag::ManyChores, Choice::Injection { targets }) => {
            let phi = targets
                .iter()
                .map(|&c| state.chores.items().iter().position(|&z| z == c).ok_or_else(mismatch))
                .collect::<Result<Vec<_>, _>>()?;
            if phi.len() != state.meta_goods.len() {
                return Err(mismatch());
            }
            Ok(imwpm(inst, attachment_pool(state, &phi, n))?.bundles())
        }
        (CaseTag::FewChores, Choice::ChoreSets { sets, .. }) => {
            let pool = state.goods_pool();
            if sets.len() != state.chores.len() || sets.iter().flatten().any(|&e| e >= pool.len()) {
                return Err(mismatch());
            }
            Ok(chore_set_allocation(inst, state, &pool, sets)?.0)
        }
        _ => Err(mismatch()),
    }
}
