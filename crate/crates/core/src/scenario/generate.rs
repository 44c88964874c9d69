//! Seeded scenario generation.
//!
//! Prices are drawn uniformly from [10, 15] €/MWh for downward products and
//! [50, 55] €/MWh for upward products. The `Small` family builds a meshed
//! 5-bus transmission grid in upward-balancing deficit, served at the margin
//! by one ample bid at the slack, and three random feeders that each carry
//! one internal congestion.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    Bid, BidSet, BaseProfile, DistributionLine, Injection, PerNode, Product, RadialNetwork, Scenario,
    TransmissionLine, TransmissionNetwork,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GeneratorKind {
    /// Synthetic 5-bus grid with three feeders.
    Small,
    /// Keeps the template's network, base and bid quantities; redraws prices.
    Reprice(Box<Scenario>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub kind: GeneratorKind,
    pub seed: u64,
}

fn price(rng: &mut ChaCha8Rng, p: Product) -> f64 {
    let x = match p {
        Product::GenUp | Product::DemUp => rng.gen_range(50.0..55.0),
        Product::GenDown | Product::DemDown => rng.gen_range(10.0..15.0),
    };
    round4(x)
}

fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

pub fn generate_scenario(cfg: &GeneratorConfig) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    match &cfg.kind {
        GeneratorKind::Small => small(&mut rng),
        GeneratorKind::Reprice(t) => reprice(t, &mut rng),
    }
}

fn reprice(t: &Scenario, rng: &mut ChaCha8Rng) -> Scenario {
    let mut s = t.clone();
    for b in &mut s.bids.transmission {
        b.price = price(rng, b.product);
    }
    for bids in s.bids.dsos.values_mut() {
        for b in bids {
            b.price = price(rng, b.product);
        }
    }
    s
}

fn small(rng: &mut ChaCha8Rng) -> Scenario {
    let tnodes: Vec<String> = (1..=5).map(|i| i.to_string()).collect();
    let mut tlines = Vec::new();
    for (a, b) in [(1, 2), (2, 3), (3, 4), (4, 5), (5, 1), (1, 3)] {
        tlines.push(TransmissionLine {
            from: a.to_string(),
            to: b.to_string(),
            x: round4(rng.gen_range(0.05..0.2)),
            fmax: 1000.0,
        });
    }
    let mut candidates = vec!["2", "3", "4", "5"];
    candidates.shuffle(rng);
    let mut iface: Vec<String> = candidates[..3].iter().map(|s| s.to_string()).collect();
    iface.sort();

    let mut base = BaseProfile::default();
    let mut bids = BidSet::default();
    let mut dsos = Vec::new();
    let mut feeder_load = 0.0;
    let mut spare_capacity = 0.0;
    for (k, node) in iface.iter().enumerate() {
        let id = format!("dso{}", k + 1);
        let (net, load, dbase, dbids, spare) = feeder(rng, &id, node);
        feeder_load += load;
        spare_capacity += spare;
        dsos.push(net);
        base.dsos.insert(id.clone(), dbase);
        bids.dsos.insert(id, dbids);
    }

    // transmission demand, generation at the slack below total demand
    let mut tdemand = 0.0;
    for n in &tnodes[1..] {
        let d = round4(rng.gen_range(20.0..60.0));
        tdemand += d;
        base.transmission.insert(n.clone(), Injection { p: 0.0, d, qd: 0.0 });
    }
    let mut small_up = 0.0;
    for n in &tnodes[1..] {
        let q = round4(rng.gen_range(2.0..6.0));
        small_up += q;
        bids.transmission.push(Bid { node: n.clone(), product: Product::GenUp, price: price(rng, Product::GenUp), quantity: q });
        bids.transmission.push(Bid {
            node: n.clone(),
            product: Product::DemDown,
            price: price(rng, Product::DemDown),
            quantity: round4(rng.gen_range(2.0..6.0)),
        });
    }
    let deficit = round4(small_up + spare_capacity + rng.gen_range(10.0..40.0));
    let gen = round4(tdemand + feeder_load - deficit);
    base.transmission.insert("1".into(), Injection { p: gen, d: 0.0, qd: 0.0 });
    // the slack's upward bid stays marginal over every feasible interface shift
    let reserve = deficit + spare_capacity + 50.0;
    bids.transmission.push(Bid { node: "1".into(), product: Product::GenUp, price: price(rng, Product::GenUp), quantity: round4(reserve) });
    bids.transmission.push(Bid {
        node: "1".into(),
        product: Product::GenDown,
        price: price(rng, Product::GenDown),
        quantity: round4(gen.min(20.0)),
    });

    Scenario {
        base_mva: 100.0,
        transmission: TransmissionNetwork {
            nodes: tnodes,
            lines: tlines,
            interface_nodes: iface,
            slack: Some("1".into()),
        },
        dsos,
        base,
        bids,
        polygon_sides: 12,
    }
}

/// Random feeder with one congested line. Returns the network, its total
/// load, base profile, bids and the largest interface shift its bids allow.
fn feeder(
    rng: &mut ChaCha8Rng,
    id: &str,
    iface: &str,
) -> (RadialNetwork, f64, BTreeMap<String, Injection>, Vec<Bid>, f64) {
    let n = rng.gen_range(5..=8);
    let names: Vec<String> = (0..n).map(|i| i.to_string()).collect();
    let mut parent = vec![0usize; n];
    for (i, p) in parent.iter_mut().enumerate().skip(1) {
        // bias towards chains so congested subtrees have several nodes
        *p = if rng.gen_bool(0.6) { i - 1 } else { rng.gen_range(0..i) };
    }
    let mut load = vec![0.0; n];
    for l in load.iter_mut().skip(1) {
        *l = round4(rng.gen_range(0.3..1.0));
    }
    let qd: Vec<f64> = load.iter().map(|d| round4(0.2 * d)).collect();
    // subtree sums
    let mut sub_p = load.clone();
    let mut sub_q = qd.clone();
    for i in (1..n).rev() {
        let p = parent[i];
        sub_p[p] += sub_p[i];
        sub_q[p] += sub_q[i];
    }

    let mut bids = Vec::new();
    let mut up_qty = vec![0.0; n];
    for i in 1..n {
        let q = round4(load[i] * rng.gen_range(0.3..0.6));
        up_qty[i] = q;
        bids.push(Bid { node: names[i].clone(), product: Product::DemUp, price: price(rng, Product::DemUp), quantity: q });
        if rng.gen_bool(0.5) {
            bids.push(Bid {
                node: names[i].clone(),
                product: Product::DemDown,
                price: price(rng, Product::DemDown),
                quantity: round4(load[i] * rng.gen_range(0.1..0.3)),
            });
        }
    }
    let total_up: f64 = up_qty.iter().sum();
    bids.push(Bid {
        node: names[0].clone(),
        product: Product::DemDown,
        price: price(rng, Product::DemDown),
        quantity: round4(total_up + 0.5),
    });

    // congested line: into a node whose subtree holds upward flexibility
    let mut sub_up = up_qty.clone();
    for i in (1..n).rev() {
        let p = parent[i];
        sub_up[p] += sub_up[i];
    }
    let choices: Vec<usize> = (1..n).filter(|&i| sub_up[i] > 0.2).collect();
    let cong = *choices.choose(rng).unwrap_or(&1);
    let overload = sub_up[cong] * rng.gen_range(0.3..0.6);

    let mut lines = Vec::new();
    for i in 1..n {
        let flow = (sub_p[i].powi(2) + sub_q[i].powi(2)).sqrt();
        let smax = if i == cong {
            round4(flow - overload)
        } else {
            round4(2.0 * flow + 1.0)
        };
        lines.push(DistributionLine {
            from: names[parent[i]].clone(),
            to: names[i].clone(),
            r: round4(rng.gen_range(0.01..0.05)),
            x: round4(rng.gen_range(0.01..0.05)),
            smax,
        });
    }
    let total: f64 = load.iter().sum();
    let base: BTreeMap<String, Injection> = (1..n)
        .map(|i| (names[i].clone(), Injection { p: 0.0, d: load[i], qd: qd[i] }))
        .collect();
    let tp_max = round4(5.0 * total);
    let tq = round4(5.0 * sub_q[0] + 1.0);
    let net = RadialNetwork {
        id: id.to_string(),
        interface_node: iface.to_string(),
        root: names[0].clone(),
        lines,
        vmin: PerNode::Uniform(0.81),
        vmax: PerNode::Uniform(1.21),
        qmin: PerNode::Uniform(-0.1),
        qmax: PerNode::Uniform(0.1),
        tp_min: -tp_max,
        tp_max,
        tq_min: -tq,
        tq_max: tq,
    };
    (net, total, base, bids, total_up + 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::validate;

    #[test]
    fn seeded_generation_is_reproducible_and_valid() {
        let cfg = GeneratorConfig { kind: GeneratorKind::Small, seed: 3 };
        let a = generate_scenario(&cfg);
        let b = generate_scenario(&cfg);
        assert_eq!(a, b);
        let r = validate(&a);
        assert!(r.is_valid(), "{r}");
        assert!(r.warnings.is_empty());
        let c = generate_scenario(&GeneratorConfig { kind: GeneratorKind::Small, seed: 4 });
        assert_ne!(a, c);
    }

    #[test]
    fn prices_fall_in_their_bands() {
        let s = generate_scenario(&GeneratorConfig { kind: GeneratorKind::Small, seed: 11 });
        let all = s.bids.transmission.iter().chain(s.bids.dsos.values().flatten());
        for b in all {
            match b.product {
                Product::GenUp | Product::DemUp => assert!((50.0..=55.0).contains(&b.price)),
                _ => assert!((10.0..=15.0).contains(&b.price)),
            }
        }
    }
}
