//! Checks a hand-made allocation, then asks the brute-force oracle for one
//! that is EF1 and envy-freeable.

use efm_core::envy::{build_envy_graph, has_positive_cycle};
use efm_core::model::{DiscreteAllocation, Instance};
use efm_core::verify::{brute_force_ef1_efable, check_ef1, DEFAULT_BRUTE_FORCE_BUDGET};

fn main() {
    let inst = Instance::from_integers(&[vec![3, 2, -1, -2], vec![1, 3, -2, -1], vec![2, 2, -1, -1]]);
    let guess = DiscreteAllocation::from_owners(3, &[0, 0, 1, 1]);
    let report = check_ef1(&inst, &guess);
    println!("guess EF1: {}", report.verdict);
    for w in &report.witnesses {
        println!("  {w}");
    }
    let found = brute_force_ef1_efable(&inst, DEFAULT_BRUTE_FORCE_BUDGET)
        .expect("within budget")
        .expect("one always exists");
    println!(
        "oracle: {:?}",
        found.bundles.iter().map(|b| b.items().to_vec()).collect::<Vec<_>>()
    );
    println!(
        "EF1 {}, positive cycle {}",
        check_ef1(&inst, &found).verdict,
        has_positive_cycle(&build_envy_graph(&inst, &found, None))
    );
}
