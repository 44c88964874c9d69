//! Builds the coalition cost game of a generated scenario and checks its
//! structure: submodularity, concavity, core and the best partition.

use flexcoop::game::{best_partition, build_game, check_concavity, check_submodular, core_nonempty, GameOptions};
use flexcoop::market::PricingScheme;
use flexcoop::scenario::{generate_scenario, GeneratorConfig, GeneratorKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(0);
    let s = generate_scenario(&GeneratorConfig { kind: GeneratorKind::Small, seed });
    let g = build_game(&s, PricingScheme::PayAsBid, &GameOptions::default())?;
    print!("{}", g.to_csv());

    println!("submodular: {}", check_submodular(&g).holds());
    println!("concave:    {}", check_concavity(&g).holds());
    let cert = core_nonempty(&g)?;
    println!("core non-empty: {} (witness {:?})", cert.nonempty, cert.witness);
    let (parts, cost) = best_partition(&g);
    let labels: Vec<String> = parts.iter().map(|&m| g.label(m)).collect();
    println!("cheapest structure {labels:?} at €{cost:.2}");
    Ok(())
}
