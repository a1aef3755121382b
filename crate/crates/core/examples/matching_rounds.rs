//! Iterative maximum-weight matching: each round matches every agent to one
//! remaining item, so values never increase from round to round.

use efm_core::matching::{imwpm, max_weight_perfect_matching, MetaItem};
use efm_core::model::{Instance, Ratio};
use efm_core::verify::check_round_monotonicity;

fn main() {
    let w: Vec<Vec<Ratio>> = [[3, 1, 2], [2, 3, 1], [1, 2, 3]]
        .iter()
        .map(|r| r.iter().map(|&x| Ratio::from_integer(x)).collect())
        .collect();
    let m = max_weight_perfect_matching(&w).unwrap();
    println!("single matching {:?}, weight {}", m.assignment, m.value);

    let inst = Instance::from_integers(&[vec![5, 4, 1, 2, 3, 0], vec![1, 5, 4, 3, 0, 2]]);
    let pool = (0..inst.m())
        .map(|t| MetaItem::good([t].into_iter().collect()))
        .collect();
    let trace = imwpm(&inst, pool).unwrap();
    for (t, round) in trace.rounds.iter().enumerate() {
        let vals: Vec<String> = (0..inst.n())
            .map(|i| trace.round_value(&inst, t, i).to_string())
            .collect();
        println!("round {t}: {:?} values [{}]", round.assignment, vals.join(", "));
    }
    println!("monotone: {}", check_round_monotonicity(&inst, &trace).verdict);
}
