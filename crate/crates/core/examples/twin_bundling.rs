//! Two agents share one good and one chore they value identically. Handing
//! out one item each breaks EF1, so the solver bundles them.

use efm_core::model::Instance;
use efm_core::solver::solve_ef1_envy_freeable;
use efm_core::verify::{all_ef1_efable, check_ef1, DEFAULT_BRUTE_FORCE_BUDGET};

fn main() {
    let inst = Instance::from_integers(&[vec![1, -1], vec![1, -1]]);
    let sol = solve_ef1_envy_freeable(&inst).expect("always solvable");
    println!("case {}", sol.certificate.case);
    for (i, b) in sol.allocation.bundles.iter().enumerate() {
        println!("agent {i} gets items {:?}", b.items());
    }
    println!("EF1: {}", check_ef1(&inst, &sol.allocation).verdict);

    let all = all_ef1_efable(&inst, DEFAULT_BRUTE_FORCE_BUDGET).expect("tiny instance");
    println!("{} allocations are EF1 and envy-freeable:", all.len());
    for a in all {
        println!(
            "  {:?}",
            a.bundles.iter().map(|b| b.items().to_vec()).collect::<Vec<_>>()
        );
    }
}
