//! Item bundling: goods that several agents like are merged into meta-goods,
//! chores are absorbed where some agent still sees a non-negative total, and
//! refinement trims each meta-good back to a good-minimal core.

use efm_core::bundling::{is_good_minimal, iterative_item_merge, refine};
use efm_core::model::{bundle_value, Instance};

fn main() {
    let u = vec![vec![2, 1, 0, -1, -4], vec![2, 1, -1, -1, -4], vec![-1, -1, 3, -2, -4]];
    let inst = Instance::from_integers(&u);
    let merged = iterative_item_merge(&inst);
    println!("after merging:");
    for b in &merged.meta_goods {
        let vals: Vec<String> = (0..inst.n()).map(|i| bundle_value(&inst, i, b).to_string()).collect();
        println!("  meta-good {:?} valued [{}]", b.items(), vals.join(", "));
    }
    println!(
        "  loose goods {:?}, chores {:?}",
        merged.loose_goods.items(),
        merged.chores.items()
    );

    let refined = refine(&inst, merged).expect("fewer chores than agents");
    println!("after refining:");
    for b in &refined.meta_goods {
        println!(
            "  meta-good {:?}, good-minimal {}",
            b.items(),
            is_good_minimal(&inst, b).unwrap()
        );
    }
    println!(
        "  loose goods {:?}, chores {:?}",
        refined.loose_goods.items(),
        refined.chores.items()
    );
}
