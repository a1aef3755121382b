use proptest::prelude::*;

use efm_core::division::{consensus_split, solve_efm};
use efm_core::envy::{build_envy_graph, envy_freeable_by_permutation, has_positive_cycle, heaviest_path_payments};
use efm_core::model::{
    cake_value, instance_to_json, parse_instance, DiscreteAllocation, Divisible, Instance, MixedAllocation, Ratio,
};
use efm_core::solver::{replay, solve_ef1_envy_freeable};
use efm_core::verify::{check_ef1, check_efm, check_envy_free_money, check_round_monotonicity};

fn utilities(max_agents: usize, max_items: usize) -> impl Strategy<Value = Vec<Vec<i64>>> {
    (1..=max_agents, 0..=max_items)
        .prop_flat_map(|(n, m)| prop::collection::vec(prop::collection::vec(-4i64..=3, m), n))
}

fn owners_for(u: &[Vec<i64>]) -> impl Strategy<Value = Vec<usize>> {
    let (n, m) = (u.len(), u[0].len());
    prop::collection::vec(0..n, m)
}

/// Reverses agent order. A fair allocation stays fair under relabelling.
fn reversed(u: &[Vec<i64>]) -> Vec<Vec<i64>> {
    u.iter().rev().cloned().collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn solver_output_is_ef1_and_envy_freeable(u in utilities(4, 7)) {
        let inst = Instance::from_integers(&u);
        let sol = solve_ef1_envy_freeable(&inst).unwrap();
        prop_assert!(sol.allocation.validate(&inst).is_ok());
        prop_assert!(check_ef1(&inst, &sol.allocation).verdict);
        prop_assert!(!has_positive_cycle(&build_envy_graph(&inst, &sol.allocation, None)));
        for trace in &sol.certificate.traces {
            prop_assert!(check_round_monotonicity(&inst, trace).verdict);
        }
    }

    #[test]
    fn certificate_replays_to_same_allocation(u in utilities(4, 7)) {
        let inst = Instance::from_integers(&u);
        let sol = solve_ef1_envy_freeable(&inst).unwrap();
        let json = serde_json::to_string(&sol.certificate).unwrap();
        let cert = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(replay(&inst, &cert).unwrap(), sol.allocation);
    }

    #[test]
    fn solver_is_deterministic(u in utilities(4, 6)) {
        let inst = Instance::from_integers(&u);
        let a = solve_ef1_envy_freeable(&inst).unwrap();
        let b = solve_ef1_envy_freeable(&inst).unwrap();
        prop_assert_eq!(a.allocation, b.allocation);
    }

    #[test]
    fn relabelled_agents_still_get_a_fair_allocation(u in utilities(4, 6)) {
        let inst = Instance::from_integers(&reversed(&u));
        let sol = solve_ef1_envy_freeable(&inst).unwrap();
        prop_assert!(check_ef1(&inst, &sol.allocation).verdict);
        prop_assert!(!has_positive_cycle(&build_envy_graph(&inst, &sol.allocation, None)));
    }

    #[test]
    fn envy_freeability_tests_agree((u, owners) in utilities(4, 7).prop_filter("items", |u| !u[0].is_empty())
        .prop_flat_map(|u| { let o = owners_for(&u); (Just(u), o) }))
    {
        let inst = Instance::from_integers(&u);
        let a = DiscreteAllocation::from_owners(inst.n(), &owners);
        let graph = build_envy_graph(&inst, &a, None);
        let acyclic = !has_positive_cycle(&graph);
        prop_assert_eq!(acyclic, envy_freeable_by_permutation(&inst, &a).unwrap());
        match heaviest_path_payments(&graph) {
            Ok(p) => {
                prop_assert!(acyclic);
                prop_assert!(p.0.iter().all(|x| !x.is_negative()));
                prop_assert!(p.0.iter().any(|x| x.is_zero()));
                prop_assert!(check_envy_free_money(&inst, &a, &p.0).verdict);
            }
            Err(_) => prop_assert!(!acyclic),
        }
    }

    #[test]
    fn efm_without_divisible_part_is_ef1((u, owners) in utilities(4, 6).prop_filter("items", |u| !u[0].is_empty())
        .prop_flat_map(|u| { let o = owners_for(&u); (Just(u), o) }))
    {
        let inst = Instance::from_integers(&u);
        let a = DiscreteAllocation::from_owners(inst.n(), &owners);
        let zero = vec![Ratio::zero(); inst.n()];
        let mixed = MixedAllocation { discrete: a.clone(), divisible: Divisible::Payments(zero) };
        prop_assert_eq!(check_efm(&inst, &mixed).verdict, check_ef1(&inst, &a).verdict);
    }

    #[test]
    fn efm_with_generated_cake(seed in any::<u64>(), n in 1u64..=4, m in 0u64..=5) {
        let cfg = efm_core::cli::GenConfig { seed, agents: n as usize, items: m as usize, cake: true, chores_only: false };
        let inst = efm_core::cli::generate_instance(&cfg);
        let out = solve_efm(&inst, &Default::default()).unwrap();
        prop_assert!(out.allocation.validate(&inst).is_ok());
        prop_assert!(check_efm(&inst, &out.allocation).verdict);
    }

    #[test]
    fn consensus_pieces_are_valued_at_their_share(seed in any::<u64>(), n in 2u64..=5, w in prop::collection::vec(0i64..=4, 5)) {
        let cfg = efm_core::cli::GenConfig { seed, agents: n as usize, items: 0, cake: true, chores_only: false };
        let inst = efm_core::cli::generate_instance(&cfg);
        let paid: Vec<usize> = (0..inst.n()).filter(|&i| inst.cake_total(i) == Ratio::one()).collect();
        prop_assume!(!paid.is_empty());
        let total: i64 = paid.iter().map(|&i| w[i]).sum();
        prop_assume!(total > 0);
        let mut shares = vec![Ratio::zero(); inst.n()];
        for &i in &paid {
            shares[i] = Ratio::new(w[i], total);
        }
        let pieces = consensus_split(&inst, &paid, &shares).unwrap();
        for &i in &paid {
            for &j in &paid {
                prop_assert_eq!(cake_value(&inst, j, &pieces[i]), shares[i].clone());
            }
        }
    }

    #[test]
    fn instance_json_round_trips(seed in any::<u64>(), n in 1u64..=4, m in 0u64..=6, cake in any::<bool>()) {
        let cfg = efm_core::cli::GenConfig { seed, agents: n as usize, items: m as usize, cake, chores_only: false };
        let inst = efm_core::cli::generate_instance(&cfg);
        let back = parse_instance(&instance_to_json(&inst)).unwrap();
        prop_assert_eq!(back, inst);
    }
}
