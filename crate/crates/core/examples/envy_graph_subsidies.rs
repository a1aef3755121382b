//! Envy graph of an allocation and the smallest subsidies that remove all
//! envy: each agent is paid the weight of the heaviest path leaving it.

use efm_core::envy::{build_envy_graph, envy_freeable_by_permutation, has_positive_cycle, heaviest_path_payments};
use efm_core::model::{DiscreteAllocation, Instance};
use efm_core::verify::check_envy_free_money;

fn main() {
    let inst = Instance::from_integers(&[vec![4, 1, 0], vec![5, 2, 1], vec![3, 3, 2]]);
    let a = DiscreteAllocation::from_owners(3, &[0, 1, 2]);
    let g = build_envy_graph(&inst, &a, None);
    for i in 0..g.n() {
        let row: Vec<String> = (0..g.n()).map(|j| g.weight(i, j).to_string()).collect();
        println!("envy of agent {i}: [{}]", row.join(", "));
    }
    println!("positive cycle: {}", has_positive_cycle(&g));
    println!(
        "permutation oracle: {}",
        envy_freeable_by_permutation(&inst, &a).unwrap()
    );
    let p = heaviest_path_payments(&g).expect("no positive cycle");
    println!(
        "subsidies {:?}, total {}",
        p.0.iter().map(|x| x.to_string()).collect::<Vec<_>>(),
        p.total()
    );
    println!(
        "envy-free with subsidies: {}",
        check_envy_free_money(&inst, &a, &p.0).verdict
    );

    let crossed = Instance::from_integers(&[vec![1, 5], vec![5, 1]]);
    let a = DiscreteAllocation::from_owners(2, &[0, 1]);
    let g = build_envy_graph(&crossed, &a, None);
    println!(
        "two agents holding each other's favourite: positive cycle {}",
        has_positive_cycle(&g)
    );
    println!("subsidies exist: {}", heaviest_path_payments(&g).is_ok());
}
