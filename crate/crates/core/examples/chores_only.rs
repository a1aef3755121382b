//! When every item is a chore for everyone, the solver runs the matching
//! rounds on chores alone.

use efm_core::envy::{build_envy_graph, has_positive_cycle};
use efm_core::model::{bundle_value, Instance};
use efm_core::solver::solve_ef1_envy_freeable;
use efm_core::verify::check_ef1;

fn main() {
    let u = vec![
        vec![-1, -2, -3, -1, -2],
        vec![-2, -1, -1, -3, -1],
        vec![-3, -3, -1, -2, -1],
    ];
    let inst = Instance::from_integers(&u);
    let sol = solve_ef1_envy_freeable(&inst).expect("always solvable");
    println!("case {}", sol.certificate.case);
    for (i, b) in sol.allocation.bundles.iter().enumerate() {
        println!(
            "agent {i}: items {:?}, own value {}",
            b.items(),
            bundle_value(&inst, i, b)
        );
    }
    let graph = build_envy_graph(&inst, &sol.allocation, None);
    println!(
        "EF1 {}, positive cycle {}",
        check_ef1(&inst, &sol.allocation).verdict,
        has_positive_cycle(&graph)
    );
}
