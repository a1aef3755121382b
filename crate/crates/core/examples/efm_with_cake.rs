//! End-to-end EFM: allocate the items, then split a piecewise-constant cake so
//! that every envy left over is either covered by cake or within one item.

use efm_core::division::solve_efm;
use efm_core::model::{bundle_value, cake_value, DensitySegment, Divisible, Instance, Ratio};
use efm_core::verify::check_efm;

fn r(n: i64, d: i64) -> Ratio {
    Ratio::new(n, d)
}

fn main() {
    let inst = Instance::from_integers(&[vec![3, -1, 2], vec![1, -2, 4], vec![2, -1, 1]])
        .with_cake(vec![
            vec![DensitySegment::new(r(0, 1), r(1, 2), r(2, 1))],
            vec![DensitySegment::new(r(0, 1), r(1, 1), r(1, 1))],
            vec![DensitySegment::new(r(1, 2), r(1, 1), r(3, 1))],
        ])
        .expect("valid cake");
    let out = solve_efm(&inst, &Default::default()).expect("solvable");
    if let Some(money) = &out.money {
        println!(
            "subsidies {:?}",
            money.subsidies.0.iter().map(|x| x.to_string()).collect::<Vec<_>>()
        );
        println!(
            "shares    {:?}",
            money.payments.0.iter().map(|x| x.to_string()).collect::<Vec<_>>()
        );
    }
    let Divisible::Pieces(pieces) = &out.allocation.divisible else {
        unreachable!("cake instances yield pieces")
    };
    for i in 0..inst.n() {
        let b = &out.allocation.discrete.bundles[i];
        println!(
            "agent {i}: items {:?} worth {}, cake {:?} worth {}",
            b.items(),
            bundle_value(&out.normalized, i, b),
            pieces[i]
                .intervals
                .iter()
                .map(|iv| format!("[{}, {}]", iv.start, iv.end))
                .collect::<Vec<_>>(),
            cake_value(&out.normalized, i, &pieces[i]),
        );
    }
    println!("EFM: {}", check_efm(&inst, &out.allocation).verdict);
}
