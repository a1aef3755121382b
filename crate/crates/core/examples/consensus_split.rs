//! Consensus split: cut the cake so that every listed agent values piece i at
//! exactly share i.

use efm_core::division::consensus_split;
use efm_core::model::{cake_value, DensitySegment, Instance, Ratio};

fn r(n: i64, d: i64) -> Ratio {
    Ratio::new(n, d)
}

fn main() {
    let inst = Instance::from_integers(&[vec![], vec![], vec![]])
        .with_cake(vec![
            vec![DensitySegment::new(r(0, 1), r(1, 1), r(1, 1))],
            vec![DensitySegment::new(r(0, 1), r(1, 4), r(4, 1))],
            vec![
                DensitySegment::new(r(0, 1), r(1, 2), r(1, 2)),
                DensitySegment::new(r(1, 2), r(1, 1), r(3, 2)),
            ],
        ])
        .expect("valid cake");
    let shares = [r(1, 2), r(1, 3), r(1, 6)];
    let pieces = consensus_split(&inst, &[0, 1, 2], &shares).expect("shares sum to one");
    for (k, piece) in pieces.iter().enumerate() {
        let vals: Vec<String> = (0..3).map(|j| cake_value(&inst, j, piece).to_string()).collect();
        println!(
            "piece {k}: {} intervals, valued [{}]",
            piece.intervals.len(),
            vals.join(", ")
        );
    }
}
