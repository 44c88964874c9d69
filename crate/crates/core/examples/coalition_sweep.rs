//! Cost of every coalition structure over a range of interface limits.

use flexcoop::game::GameOptions;
use flexcoop::market::PricingScheme;
use flexcoop::scenario::load_scenario;
use flexcoop::study::run_sweep_coalitions;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/ieee14_3dso.json").into());
    let s = load_scenario(&std::fs::read_to_string(path)?)?;
    let factors = [1.0, 0.5, 0.2];
    let r = run_sweep_coalitions(&s, &factors, PricingScheme::PayAsBid, &GameOptions::default())?;
    print!("{}", r.to_csv());
    for f in factors {
        if let Some(x) = r.savings(f) {
            println!("factor {f}: grand coalition saves {:.2}%", 100.0 * x);
        }
    }
    Ok(())
}
