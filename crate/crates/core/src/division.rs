//! Turning an EF1 and envy-freeable discrete allocation into an EFM
//! allocation, either with one unit of money or with a cake.
//!
//! Heaviest-path subsidies make the paid agents envy-free. When they sum to
//! at most one, everybody gets the same top-up. Otherwise the unit is handed
//! out in rounds from the highest subsidy level down, so that nobody envies
//! an agent who ends up with a positive share. The cake version splits every
//! elementary interval of the agents' densities proportionally, which gives
//! each paid agent a piece that all paid agents value at exactly its share.

use serde::{Deserialize, Serialize};

use crate::envy::{build_envy_graph, heaviest_path_payments, EnvyError, PaymentVector};
use crate::model::{normalize, CakePiece, DiscreteAllocation, Divisible, Instance, MixedAllocation, Ratio};
use crate::solver::{solve, Solution, SolveError, SolverConfig};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DivisionError {
    #[error("no agent receives money")]
    NoPaidAgents,
    #[error("agent index {0} is out of range or listed twice")]
    BadAgent(usize),
    #[error("allocation restricted to the paid agents is not envy-freeable")]
    NotEnvyFreeable,
    #[error("shares sum to {0}, more than the whole cake")]
    SharesExceedOne(Ratio),
    #[error("share of agent {0} is negative or assigned outside the paid agents")]
    BadShare(usize),
    #[error("instance has no cake")]
    NoCake,
    #[error("agent {agent} values the whole cake at {total}, not 1")]
    Unnormalized { agent: usize, total: Ratio },
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// How the unit of money was handed out when subsidies exceeded it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundSchedule {
    /// Distinct subsidy levels, strictly decreasing, ending at 0.
    pub distinct_values: Vec<Ratio>,
    /// `groups[t]` holds the paid agents whose subsidy is `distinct_values[t]`.
    pub groups: Vec<Vec<usize>>,
    /// Zero-based index of the last round that paid anything.
    pub final_round: usize,
    /// Equal share given in the final round when its full increment did not
    /// fit; zero otherwise.
    pub residual_share: Ratio,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoneySplit {
    /// Heaviest-path subsidies over the paid agents (zero elsewhere).
    pub subsidies: PaymentVector,
    /// Shares of the unit, zero outside the paid agents.
    pub payments: PaymentVector,
    /// Present only when the subsidies summed to more than one.
    pub schedule: Option<RoundSchedule>,
}

fn check_agents(n: usize, agents: &[usize]) -> Result<(), DivisionError> {
    let mut seen = vec![false; n];
    for &i in agents {
        if i >= n || seen[i] {
            return Err(DivisionError::BadAgent(i));
        }
        seen[i] = true;
    }
    Ok(())
}

/// Splits one unit of money among `paid` so that, together with `a`, the
/// paid agents are EFM with money: nobody envies an agent holding a positive
/// share.
pub fn efm_money(inst: &Instance, a: &DiscreteAllocation, paid: &[usize]) -> Result<MoneySplit, DivisionError> {
    let n = inst.n();
    if paid.is_empty() {
        return Err(DivisionError::NoPaidAgents);
    }
    check_agents(n, paid)?;
    let graph = build_envy_graph(inst, a, Some(paid));
    let q = heaviest_path_payments(&graph).map_err(|e| match e {
        EnvyError::PositiveCycle | EnvyError::TooLarge { .. } => DivisionError::NotEnvyFreeable,
    })?;
    let mut subsidies = vec![Ratio::zero(); n];
    for (&i, qi) in paid.iter().zip(&q.0) {
        subsidies[i] = qi.clone();
    }
    let total = q.total();
    let mut payments = vec![Ratio::zero(); n];
    let one = Ratio::one();

    if total <= one {
        let top_up = (&one - &total) / Ratio::from_integer(paid.len() as i64);
        for &i in paid {
            payments[i] = &subsidies[i] + &top_up;
        }
        return Ok(MoneySplit {
            subsidies: PaymentVector(subsidies),
            payments: PaymentVector(payments),
            schedule: None,
        });
    }

    let mut distinct_values: Vec<Ratio> = q.0.clone();
    distinct_values.sort_by(|x, y| y.cmp(x));
    distinct_values.dedup();
    let groups: Vec<Vec<usize>> = distinct_values
        .iter()
        .map(|v| paid.iter().copied().filter(|&i| &subsidies[i] == v).collect())
        .collect();

    let mut remaining = one;
    let mut recipients: Vec<usize> = Vec::new();
    let mut final_round = 0;
    let mut residual_share = Ratio::zero();
    for r in 0..distinct_values.len() - 1 {
        recipients.extend(&groups[r]);
        let step = &distinct_values[r] - &distinct_values[r + 1];
        let count = Ratio::from_integer(recipients.len() as i64);
        let need = &step * &count;
        final_round = r;
        if need < remaining {
            for &i in &recipients {
                payments[i] += &step;
            }
            remaining -= need;
        } else {
            let share = if need == remaining {
                step
            } else {
                residual_share = &remaining / &count;
                residual_share.clone()
            };
            for &i in &recipients {
                payments[i] += &share;
            }
            break;
        }
    }
    Ok(MoneySplit {
        subsidies: PaymentVector(subsidies),
        payments: PaymentVector(payments),
        schedule: Some(RoundSchedule {
            distinct_values,
            groups,
            final_round,
            residual_share,
        }),
    })
}

/// Cuts the cake so that every agent in `paid` values the piece of agent `i`
/// at exactly `shares[i]`. Cake left over when the shares sum below one goes
/// to the lowest-indexed paid agent.
pub fn consensus_split(inst: &Instance, paid: &[usize], shares: &[Ratio]) -> Result<Vec<CakePiece>, DivisionError> {
    let n = inst.n();
    let cake = inst.cake().ok_or(DivisionError::NoCake)?;
    if paid.is_empty() {
        return Err(DivisionError::NoPaidAgents);
    }
    check_agents(n, paid)?;
    if shares.len() != n {
        return Err(DivisionError::BadShare(shares.len()));
    }
    for (i, s) in shares.iter().enumerate() {
        if s.is_negative() || (s.is_positive() && !paid.contains(&i)) {
            return Err(DivisionError::BadShare(i));
        }
    }
    let total: Ratio = shares.iter().sum();
    if total > Ratio::one() {
        return Err(DivisionError::SharesExceedOne(total));
    }
    for &i in paid {
        let v = inst.cake_total(i);
        if v != Ratio::one() {
            return Err(DivisionError::Unnormalized { agent: i, total: v });
        }
    }

    let mut cuts = vec![Ratio::zero(), Ratio::one()];
    for &i in paid {
        for s in &cake[i] {
            cuts.push(s.start.clone());
            cuts.push(s.end.clone());
        }
    }
    cuts.sort();
    cuts.dedup();

    let mut order: Vec<usize> = paid.to_vec();
    order.sort_unstable();
    let mut pieces = vec![CakePiece::empty(); n];
    for w in cuts.windows(2) {
        let (lo, hi) = (&w[0], &w[1]);
        let width = hi - lo;
        let mut cursor = lo.clone();
        for &i in &order {
            if shares[i].is_positive() {
                let end = &cursor + &(&shares[i] * &width);
                pieces[i].push(cursor.clone(), end.clone());
                cursor = end;
            }
        }
        if &cursor < hi {
            pieces[order[0]].push(cursor, hi.clone());
        }
    }
    for p in &mut pieces {
        p.canonicalize();
    }
    Ok(pieces)
}

/// Result of the end-to-end pipeline. Everything refers to the normalized
/// instance, in which every agent values the whole cake at 0 or 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EfmOutcome {
    pub normalized: Instance,
    pub discrete: Solution,
    pub paid: Vec<usize>,
    pub money: Option<MoneySplit>,
    pub allocation: MixedAllocation,
}

/// Solves the discrete part, then shares the cake among agents who value it.
/// If nobody values the cake, agent 0 takes all of it.
pub fn solve_efm(inst: &Instance, config: &SolverConfig) -> Result<EfmOutcome, DivisionError> {
    if !inst.has_cake() {
        return Err(DivisionError::NoCake);
    }
    let normalized = normalize(inst);
    let discrete = solve(&normalized, config)?;
    let n = normalized.n();
    let paid: Vec<usize> = (0..n).filter(|&i| normalized.cake_total(i).is_positive()).collect();
    let (money, pieces) = if paid.is_empty() {
        let mut pieces = vec![CakePiece::empty(); n];
        pieces[0] = CakePiece::whole();
        (None, pieces)
    } else {
        let money = efm_money(&normalized, &discrete.allocation, &paid)?;
        let pieces = consensus_split(&normalized, &paid, &money.payments.0)?;
        (Some(money), pieces)
    };
    let allocation = MixedAllocation {
        discrete: discrete.allocation.clone(),
        divisible: Divisible::Pieces(pieces),
    };
    Ok(EfmOutcome {
        normalized,
        discrete,
        paid,
        money,
        allocation,
    })
}

/// Same pipeline with one unit of money in place of a cake; every agent
/// values money identically, so all agents are paid.
pub fn solve_efm_money(inst: &Instance, config: &SolverConfig) -> Result<(Solution, MoneySplit), DivisionError> {
    let discrete = solve(inst, config)?;
    let all: Vec<usize> = (0..inst.n()).collect();
    let money = efm_money(inst, &discrete.allocation, &all)?;
    Ok((discrete, money))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{cake_value, Bundle, DensitySegment};

    fn r(p: i64, q: i64) -> Ratio {
        Ratio::new(p, q)
    }

    fn int(p: i64) -> Ratio {
        Ratio::from_integer(p)
    }

    fn uniform(n: usize) -> Vec<Vec<DensitySegment>> {
        vec![vec![DensitySegment::new(int(0), int(1), int(1))]; n]
    }

    /// One item per agent, owned by that agent and worth 10 to it, so
    /// every envy edge not set up on purpose is strongly negative.
    fn instance(rows: &[Vec<Ratio>]) -> Instance {
        let n = rows.len();
        let agents = (0..n).map(|i| format!("a{i}")).collect();
        let items = (0..rows[0].len()).map(|t| format!("t{t}")).collect();
        Instance::new(agents, items, rows.to_vec(), None).unwrap()
    }

    #[test]
    fn surplus_tops_up_equally() {
        let inst = Instance::from_integers(&[vec![], vec![]]);
        let split = efm_money(&inst, &DiscreteAllocation::empty(2), &[0, 1]).unwrap();
        assert_eq!(split.payments.0, vec![r(1, 2), r(1, 2)]);
        assert!(split.schedule.is_none());
    }

    #[test]
    fn deficit_pays_highest_level_first() {
        // Agent 0 envies agent 1 by 3/2 and agent 1 envies agent 2 by 1/2,
        // so the heaviest paths are (2, 1/2, 0).
        let inst = instance(&[
            vec![int(10), r(23, 2), int(0)],
            vec![int(0), int(10), r(21, 2)],
            vec![int(0), int(0), int(10)],
        ]);
        let a = DiscreteAllocation::from_owners(3, &[0, 1, 2]);
        let split = efm_money(&inst, &a, &[0, 1, 2]).unwrap();
        assert_eq!(split.subsidies.0, vec![int(2), r(1, 2), int(0)]);
        assert_eq!(split.payments.0, vec![int(1), int(0), int(0)]);
        let sched = split.schedule.unwrap();
        assert_eq!(sched.distinct_values, vec![int(2), r(1, 2), int(0)]);
        assert_eq!(sched.final_round, 0);
        assert_eq!(sched.residual_share, int(1));
    }

    #[test]
    fn deficit_exact_round() {
        // Subsidies (3/2, 1/2, 0): round one needs exactly the unit.
        let inst = instance(&[
            vec![int(10), int(11), int(0)],
            vec![int(0), int(10), r(21, 2)],
            vec![int(0), int(0), int(10)],
        ]);
        let a = DiscreteAllocation::from_owners(3, &[0, 1, 2]);
        let split = efm_money(&inst, &a, &[0, 1, 2]).unwrap();
        assert_eq!(split.subsidies.0, vec![r(3, 2), r(1, 2), int(0)]);
        assert_eq!(split.payments.0, vec![int(1), int(0), int(0)]);
        assert_eq!(split.schedule.unwrap().residual_share, int(0));
    }

    #[test]
    fn deficit_truncates_to_residual() {
        let inst = instance(&[vec![int(10), int(12)], vec![int(0), int(10)]]);
        let a = DiscreteAllocation::from_owners(2, &[0, 1]);
        let split = efm_money(&inst, &a, &[0, 1]).unwrap();
        assert_eq!(split.payments.0, vec![int(1), int(0)]);
        assert_eq!(split.schedule.unwrap().residual_share, int(1));
    }

    #[test]
    fn rejects_positive_cycles() {
        let inst = instance(&[vec![int(0), int(1)], vec![int(1), int(0)]]);
        let a = DiscreteAllocation::from_owners(2, &[0, 1]);
        assert_eq!(efm_money(&inst, &a, &[0, 1]), Err(DivisionError::NotEnvyFreeable));
        assert_eq!(efm_money(&inst, &a, &[]), Err(DivisionError::NoPaidAgents));
    }

    #[test]
    fn consensus_on_uniform_cake() {
        let inst = Instance::from_integers(&[vec![], vec![]])
            .with_cake(uniform(2))
            .unwrap();
        let pieces = consensus_split(&inst, &[0, 1], &[r(1, 2), r(1, 2)]).unwrap();
        assert_eq!(pieces[0].intervals.len(), 1);
        assert_eq!(pieces[0].intervals[0].end, r(1, 2));
        assert_eq!(pieces[1].intervals[0].start, r(1, 2));

        let pieces = consensus_split(&inst, &[0, 1], &[int(1), int(0)]).unwrap();
        assert_eq!(pieces[0], CakePiece::whole());
        assert!(pieces[1].is_empty());
    }

    #[test]
    fn consensus_on_mixed_densities() {
        let cake = vec![
            vec![DensitySegment::new(int(0), int(1), int(1))],
            vec![
                DensitySegment::new(int(0), r(1, 2), int(2)),
                DensitySegment::new(r(1, 2), int(1), int(0)),
            ],
        ];
        let inst = Instance::from_integers(&[vec![], vec![]]).with_cake(cake).unwrap();
        let pieces = consensus_split(&inst, &[0, 1], &[r(1, 2), r(1, 2)]).unwrap();
        let starts: Vec<(Ratio, Ratio)> = pieces[0]
            .intervals
            .iter()
            .map(|iv| (iv.start.clone(), iv.end.clone()))
            .collect();
        assert_eq!(starts, vec![(int(0), r(1, 4)), (r(1, 2), r(3, 4))]);
        for j in 0..2 {
            for piece in &pieces {
                assert_eq!(cake_value(&inst, j, piece), r(1, 2));
            }
        }
    }

    #[test]
    fn consensus_errors() {
        let inst = Instance::from_integers(&[vec![], vec![]])
            .with_cake(uniform(2))
            .unwrap();
        assert!(matches!(
            consensus_split(&inst, &[0, 1], &[int(1), int(1)]),
            Err(DivisionError::SharesExceedOne(_))
        ));
        let heavy = vec![vec![DensitySegment::new(int(0), int(1), int(2))]; 2];
        let inst = Instance::from_integers(&[vec![], vec![]]).with_cake(heavy).unwrap();
        assert!(matches!(
            consensus_split(&inst, &[0, 1], &[r(1, 2), r(1, 2)]),
            Err(DivisionError::Unnormalized { agent: 0, .. })
        ));
        let bare = Instance::from_integers(&[vec![]]);
        assert_eq!(consensus_split(&bare, &[0], &[int(1)]), Err(DivisionError::NoCake));
    }

    #[test]
    fn leftover_goes_to_lowest_paid_agent() {
        let inst = Instance::from_integers(&[vec![], vec![]])
            .with_cake(uniform(2))
            .unwrap();
        let pieces = consensus_split(&inst, &[1, 0], &[int(0), r(1, 2)]).unwrap();
        assert_eq!(pieces[0].length(), r(1, 2));
        assert_eq!(pieces[1].length(), r(1, 2));
    }

    #[test]
    fn pipeline_example() {
        let inst = Instance::from_integers(&[vec![2, -1, -5], vec![-1, 2, -5]])
            .with_cake(uniform(2))
            .unwrap();
        let out = solve_efm(&inst, &SolverConfig::default()).unwrap();
        assert_eq!(
            out.discrete.allocation.bundles,
            vec![Bundle::from_iter([0, 2]), Bundle::from_iter([1])]
        );
        let money = out.money.unwrap();
        assert_eq!(money.subsidies.0, vec![int(2), int(0)]);
        assert_eq!(money.payments.0, vec![int(1), int(0)]);
        assert_eq!(
            out.allocation.divisible,
            Divisible::Pieces(vec![CakePiece::whole(), CakePiece::empty()])
        );
        out.allocation.validate(&out.normalized).unwrap();
    }

    #[test]
    fn pipeline_without_items_or_interest() {
        let inst = Instance::from_integers(&[vec![], vec![]])
            .with_cake(uniform(2))
            .unwrap();
        let out = solve_efm(&inst, &SolverConfig::default()).unwrap();
        assert_eq!(out.money.unwrap().payments.0, vec![r(1, 2), r(1, 2)]);

        let none = vec![Vec::new(), Vec::new()];
        let inst = Instance::from_integers(&[vec![1], vec![1]]).with_cake(none).unwrap();
        let out = solve_efm(&inst, &SolverConfig::default()).unwrap();
        assert!(out.paid.is_empty());
        assert_eq!(
            out.allocation.divisible,
            Divisible::Pieces(vec![CakePiece::whole(), CakePiece::empty()])
        );

        assert!(matches!(
            solve_efm(&Instance::from_integers(&[vec![1]]), &SolverConfig::default()),
            Err(DivisionError::NoCake)
        ));
    }

    #[test]
    fn money_form() {
        let inst = Instance::from_integers(&[vec![2, -1, -5], vec![-1, 2, -5]]);
        let (_, money) = solve_efm_money(&inst, &SolverConfig::default()).unwrap();
        assert_eq!(money.payments.total(), int(1));
    }
}
