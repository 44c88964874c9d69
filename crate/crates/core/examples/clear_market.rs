//! Clears one coalition market and prints activations, prices and flows.
//!
//! `cargo run --example clear_market -- [scenario.json] [members]`

use flexcoop::market::{build_coalition_market, clear, settle, MarketOptions, Players, PricingScheme};
use flexcoop::scenario::load_scenario;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/two_bus_dso.json").into());
    let s = load_scenario(&std::fs::read_to_string(path)?)?;
    let players = Players::from_scenario(&s);
    let coalition = match args.next() {
        Some(m) => players.parse(&m)?,
        None => players.grand(),
    };

    let m = build_coalition_market(&s, coalition, &MarketOptions::default())?;
    let o = clear(&m)?;
    println!("coalition {}: {} at €{:.2}", players.label(coalition), o.status, o.objective);
    for a in o.activations.iter().filter(|a| a.volume_mw > 1e-9) {
        println!("  {:<6} node {:<4} {:<9} {:>8.3} MW at €{}", a.owner, a.node, format!("{:?}", a.product), a.volume_mw, a.price);
    }
    for p in &o.nodal_prices {
        println!("  price {}@{} = {:.3}", p.owner, p.node, p.price);
    }
    for f in &o.interface {
        println!("  interface {} tp {:.3}{}", f.dso, f.tp, if f.fixed { " (fixed)" } else { "" });
    }
    for (who, cost) in settle(&m, &o, PricingScheme::PayAsBid)? {
        println!("  {who} pays €{cost:.2}");
    }
    Ok(())
}
