//! Generates a seeded instance, writes it as JSON, parses it back and solves it.

use efm_core::cli::{generate_instance, AllocationDoc, GenConfig};
use efm_core::model::{instance_to_json, parse_instance};
use efm_core::solver::solve_ef1_envy_freeable;

fn main() {
    let cfg = GenConfig {
        seed: 42,
        agents: 3,
        items: 4,
        cake: true,
        chores_only: false,
    };
    let text = instance_to_json(&generate_instance(&cfg));
    println!("{text}");
    let inst = parse_instance(&text).expect("generated instances parse");
    let sol = solve_ef1_envy_freeable(&inst.without_cake()).expect("solvable");
    let doc = AllocationDoc::new(&inst, &sol.allocation, None);
    println!("{}", serde_json::to_string_pretty(&doc).unwrap());
}
