//! Places clones of one distribution operator at different transmission
//! nodes and compares the joint market cost.

use flexcoop::game::GameOptions;
use flexcoop::market::PricingScheme;
use flexcoop::scenario::load_scenario;
use flexcoop::study::run_placement;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/placement_3bus.json").into());
    let s = load_scenario(&std::fs::read_to_string(path)?)?;
    let template = s.sorted_dsos()[0].id.clone();
    let nodes: Vec<String> = s.transmission.nodes.iter().skip(1).cloned().collect();
    let r = run_placement(&s, &template, &nodes, PricingScheme::PayAsBid, &GameOptions::default())?;
    print!("{}", r.to_csv());
    for n in &nodes {
        if let Some(c) = r.cost_at(n) {
            println!("{template} at node {n}: €{c:.2}");
        }
    }
    Ok(())
}
