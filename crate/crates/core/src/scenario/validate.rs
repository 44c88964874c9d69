use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{compute_gsf, Bid, Scenario};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub location: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    /// Conditions that are legal but usually unintended.
    pub warnings: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn err(&mut self, location: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            location: location.into(),
            message: message.into(),
        });
    }

    fn warn(&mut self, location: impl Into<String>, message: impl Into<String>) {
        self.warnings.push(Violation {
            location: location.into(),
            message: message.into(),
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .violations
            .iter()
            .map(|v| format!("{}: {}", v.location, v.message))
            .collect();
        write!(f, "{}", parts.join("; "))
    }
}

fn finite(r: &mut ValidationReport, loc: &str, name: &str, v: f64) {
    if !v.is_finite() {
        r.err(loc, format!("{name} is not finite"));
    }
}

pub fn validate(s: &Scenario) -> ValidationReport {
    let mut r = ValidationReport::default();
    if !(s.base_mva > 0.0 && s.base_mva.is_finite()) {
        r.err("base_mva", "must be positive");
    }
    if s.polygon_sides < 4 {
        r.err("polygon_sides", format!("{} < 4", s.polygon_sides));
    }

    let t = &s.transmission;
    let mut tnodes = HashSet::new();
    if t.nodes.is_empty() {
        r.err("transmission.nodes", "empty");
    }
    for n in &t.nodes {
        if !tnodes.insert(n.as_str()) {
            r.err(format!("transmission.nodes[{n}]"), "duplicate node");
        }
    }
    let mut lines_ok = true;
    for (k, l) in t.lines.iter().enumerate() {
        let loc = format!("transmission.lines[{k}]");
        if !tnodes.contains(l.from.as_str()) || !tnodes.contains(l.to.as_str()) {
            r.err(&loc, format!("unknown endpoint {}-{}", l.from, l.to));
            lines_ok = false;
        } else if l.from == l.to {
            r.err(&loc, "self-loop");
            lines_ok = false;
        }
        if !(l.x > 0.0 && l.x.is_finite()) {
            r.err(&loc, "reactance must be strictly positive");
            lines_ok = false;
        }
        if !(l.fmax > 0.0 && l.fmax.is_finite()) {
            r.err(&loc, "flow limit must be strictly positive");
        }
    }
    let slack = t.slack_node();
    if !tnodes.contains(slack) {
        r.err("transmission.slack", format!("unknown slack node {slack}"));
        lines_ok = false;
    }
    if lines_ok && !t.nodes.is_empty() && !connected(s) {
        r.err("transmission", "network is not connected");
    } else if lines_ok && !t.nodes.is_empty() && compute_gsf(t).is_err() {
        r.err("transmission", "singular reduced susceptance matrix");
    }
    let mut iface = HashSet::new();
    for n in &t.interface_nodes {
        if !tnodes.contains(n.as_str()) {
            r.err(format!("transmission.interface_nodes[{n}]"), "unknown node");
        }
        if !iface.insert(n.as_str()) {
            r.err(format!("transmission.interface_nodes[{n}]"), "duplicate interface");
        }
    }

    let mut ids = HashSet::new();
    let mut hosted: HashMap<&str, &str> = HashMap::new();
    for d in &s.dsos {
        let loc = format!("dsos[{}]", d.id);
        if !ids.insert(d.id.as_str()) {
            r.err(&loc, "duplicate dso id");
        }
        if !iface.contains(d.interface_node.as_str()) {
            r.err(&loc, format!("interface node {} is not declared", d.interface_node));
        }
        if let Some(other) = hosted.insert(d.interface_node.as_str(), d.id.as_str()) {
            r.err(
                &loc,
                format!("duplicate interface: node {} also hosts {other}", d.interface_node),
            );
        }
        let tree = match d.tree() {
            Ok(tree) => Some(tree),
            Err(why) => {
                r.err(&loc, format!("radiality violated at dso {}: {why}", d.id));
                None
            }
        };
        for (k, l) in d.lines.iter().enumerate() {
            let lloc = format!("{loc}.lines[{k}]");
            if !(l.r >= 0.0 && l.r.is_finite()) || !(l.x >= 0.0 && l.x.is_finite()) {
                r.err(&lloc, "impedance must be finite and non-negative");
            }
            if !(l.smax > 0.0 && l.smax.is_finite()) {
                r.err(&lloc, "S^max must be strictly positive");
            }
        }
        let nodes = tree.map(|t| t.nodes).unwrap_or_else(|| d.node_ids());
        for n in &nodes {
            let nloc = format!("{loc}.node[{n}]");
            let get = |p: &super::PerNode| p.get(n);
            match (get(&d.vmin), get(&d.vmax)) {
                (Some(lo), Some(hi)) => {
                    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                        r.err(&nloc, format!("vmin {lo} must be below vmax {hi}"));
                    } else if lo <= 0.0 {
                        r.err(&nloc, "vmin must be positive");
                    }
                }
                _ => r.err(&nloc, "voltage bounds missing"),
            }
            match (get(&d.qmin), get(&d.qmax)) {
                (Some(lo), Some(hi)) => {
                    if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
                        r.err(&nloc, format!("qmin {lo} exceeds qmax {hi}"));
                    }
                }
                _ => r.err(&nloc, "reactive bounds missing"),
            }
        }
        for (name, lo, hi) in [("tp", d.tp_min, d.tp_max), ("tq", d.tq_min, d.tq_max)] {
            finite(&mut r, &loc, &format!("{name}_min"), lo);
            finite(&mut r, &loc, &format!("{name}_max"), hi);
            if lo > hi {
                r.err(&loc, format!("{name}_min exceeds {name}_max"));
            }
        }
        let tb = s.base_transfer(d);
        if tb < d.tp_min - 1e-9 || tb > d.tp_max + 1e-9 {
            r.warn(
                &loc,
                format!("base transfer {tb} lies outside [{}, {}]", d.tp_min, d.tp_max),
            );
        }
        if let Some(base) = s.base.dsos.get(&d.id) {
            for (n, inj) in base {
                if !nodes.contains(n) {
                    r.err(format!("base.dsos.{}.{n}", d.id), "unknown node");
                }
                for (k, v) in [("p", inj.p), ("d", inj.d), ("qd", inj.qd)] {
                    finite(&mut r, &format!("base.dsos.{}.{n}", d.id), k, v);
                }
            }
        }
        if let Some(bids) = s.bids.dsos.get(&d.id) {
            check_bids(&mut r, &format!("bids.dsos.{}", d.id), bids, |n| nodes.contains(&n.to_string()));
        }
    }
    for n in &t.interface_nodes {
        if !hosted.contains_key(n.as_str()) {
            r.err(format!("transmission.interface_nodes[{n}]"), "hosts no dso");
        }
    }
    for id in s.base.dsos.keys() {
        if !ids.contains(id.as_str()) {
            r.err(format!("base.dsos.{id}"), "unknown dso");
        }
    }
    for id in s.bids.dsos.keys() {
        if !ids.contains(id.as_str()) {
            r.err(format!("bids.dsos.{id}"), "unknown dso");
        }
    }
    for (n, inj) in &s.base.transmission {
        let loc = format!("base.transmission.{n}");
        if !tnodes.contains(n.as_str()) {
            r.err(&loc, "unknown node");
        }
        for (k, v) in [("p", inj.p), ("d", inj.d), ("qd", inj.qd)] {
            finite(&mut r, &loc, k, v);
        }
    }
    check_bids(&mut r, "bids.transmission", &s.bids.transmission, |n| tnodes.contains(n));
    r
}

fn check_bids(r: &mut ValidationReport, loc: &str, bids: &[Bid], known: impl Fn(&str) -> bool) {
    let mut seen = HashSet::new();
    for (k, b) in bids.iter().enumerate() {
        let bloc = format!("{loc}[{k}]");
        if !known(&b.node) {
            r.err(&bloc, format!("unknown node {}", b.node));
        }
        if !seen.insert((b.node.as_str(), b.product)) {
            r.err(&bloc, format!("duplicate {} bid at {}", b.product.as_str(), b.node));
        }
        if !b.price.is_finite() {
            r.err(&bloc, "price is not finite");
        }
        if !(b.quantity >= 0.0 && b.quantity.is_finite()) {
            r.err(&bloc, "quantity must be non-negative");
        }
    }
}

fn connected(s: &Scenario) -> bool {
    let t = &s.transmission;
    let idx = t.node_index();
    let mut adj = vec![Vec::new(); t.nodes.len()];
    for l in &t.lines {
        let (a, b) = (idx[l.from.as_str()], idx[l.to.as_str()]);
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut seen = vec![false; t.nodes.len()];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(u) = stack.pop() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    seen.into_iter().all(|s| s)
}
