//! Interconnected transmission/distribution system description.

mod generate;
mod gsf;
mod polygon;
mod validate;

use std::collections::{BTreeMap, HashMap, VecDeque};

use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

pub use generate::{generate_scenario, GeneratorConfig, GeneratorKind};
pub use gsf::{compute_gsf, GsfMatrix};
pub use polygon::{polygon_coefficients, polygon_vertices, PolygonFacet};
pub use validate::{validate, ValidationReport, Violation};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("parse error at {path} (line {line}, column {column}): {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid scenario: {0}")]
    Invalid(ValidationReport),
    #[error("singular reduced susceptance matrix: transmission network is disconnected")]
    SingularSusceptance,
    #[error("polygon needs at least 4 sides, got {0}")]
    PolygonSides(usize),
    #[error("interface scaling factor must be positive, got {0}")]
    BadFactor(f64),
    #[error("unknown dso {0}")]
    UnknownDso(String),
}

/// Node ids are strings; plain JSON numbers are accepted and converted.
fn node_id<'de, D: Deserializer<'de>>(d: D) -> Result<String, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        S(String),
        I(i64),
    }
    Ok(match Raw::deserialize(d)? {
        Raw::S(s) => s,
        Raw::I(i) => i.to_string(),
    })
}

fn opt_node_id<'de, D: Deserializer<'de>>(d: D) -> Result<Option<String>, D::Error> {
    #[derive(Deserialize)]
    struct W(#[serde(deserialize_with = "node_id")] String);
    Ok(Option::<W>::deserialize(d)?.map(|w| w.0))
}

fn node_ids<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<String>, D::Error> {
    #[derive(Deserialize)]
    struct W(#[serde(deserialize_with = "node_id")] String);
    Ok(Vec::<W>::deserialize(d)?.into_iter().map(|w| w.0).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransmissionLine {
    #[serde(deserialize_with = "node_id")]
    pub from: String,
    #[serde(deserialize_with = "node_id")]
    pub to: String,
    /// Reactance, p.u. on the system base.
    pub x: f64,
    /// Flow limit in MW.
    pub fmax: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransmissionNetwork {
    #[serde(deserialize_with = "node_ids")]
    pub nodes: Vec<String>,
    pub lines: Vec<TransmissionLine>,
    #[serde(default, deserialize_with = "node_ids")]
    pub interface_nodes: Vec<String>,
    #[serde(default, deserialize_with = "opt_node_id", skip_serializing_if = "Option::is_none")]
    pub slack: Option<String>,
}

impl TransmissionNetwork {
    pub fn slack_node(&self) -> &str {
        self.slack
            .as_deref()
            .or(self.nodes.first().map(|s| s.as_str()))
            .unwrap_or("")
    }

    pub fn node_index(&self) -> HashMap<&str, usize> {
        self.nodes.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionLine {
    #[serde(deserialize_with = "node_id")]
    pub from: String,
    #[serde(deserialize_with = "node_id")]
    pub to: String,
    /// Resistance, p.u. on the system base.
    pub r: f64,
    /// Reactance, p.u. on the system base.
    pub x: f64,
    /// Apparent power limit in MVA.
    pub smax: f64,
}

/// A per-node quantity: one value for every node, or a map keyed by node id
/// where the optional key `"default"` covers the remaining nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerNode {
    Uniform(f64),
    Map(BTreeMap<String, f64>),
}

impl PerNode {
    pub fn get(&self, node: &str) -> Option<f64> {
        match self {
            PerNode::Uniform(v) => Some(*v),
            PerNode::Map(m) => m.get(node).or_else(|| m.get("default")).copied(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadialNetwork {
    pub id: String,
    #[serde(deserialize_with = "node_id")]
    pub interface_node: String,
    #[serde(deserialize_with = "node_id")]
    pub root: String,
    pub lines: Vec<DistributionLine>,
    /// Squared voltage magnitude bounds, p.u.
    pub vmin: PerNode,
    pub vmax: PerNode,
    /// Reactive injection bounds, MVAr.
    pub qmin: PerNode,
    pub qmax: PerNode,
    pub tp_min: f64,
    pub tp_max: f64,
    pub tq_min: f64,
    pub tq_max: f64,
}

/// Oriented view of a feeder: node 0 is the root, every other node has a
/// parent and the index of the line feeding it.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub nodes: Vec<String>,
    pub parent: Vec<Option<usize>>,
    pub line_in: Vec<Option<usize>>,
    pub children: Vec<Vec<usize>>,
}

impl Tree {
    pub fn index(&self) -> HashMap<&str, usize> {
        self.nodes.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect()
    }
}

impl RadialNetwork {
    /// Every node mentioned by the feeder, root first, then in line order.
    pub fn node_ids(&self) -> Vec<String> {
        let mut out = vec![self.root.clone()];
        for l in &self.lines {
            for n in [&l.from, &l.to] {
                if !out.contains(n) {
                    out.push(n.clone());
                }
            }
        }
        out
    }

    /// Breadth-first orientation from the root; `Err(node)` names the node
    /// where radiality fails.
    pub fn tree(&self) -> Result<Tree, String> {
        let nodes = self.node_ids();
        let idx: HashMap<&str, usize> = nodes.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
        if self.lines.len() + 1 != nodes.len() {
            return Err(format!(
                "{} lines for {} nodes",
                self.lines.len(),
                nodes.len()
            ));
        }
        let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nodes.len()];
        for (k, l) in self.lines.iter().enumerate() {
            let (a, b) = (idx[l.from.as_str()], idx[l.to.as_str()]);
            if a == b {
                return Err(format!("self-loop at {}", l.from));
            }
            adj[a].push((b, k));
            adj[b].push((a, k));
        }
        let n = nodes.len();
        let mut parent = vec![None; n];
        let mut line_in = vec![None; n];
        let mut children = vec![Vec::new(); n];
        let mut seen = vec![false; n];
        let mut order = Vec::with_capacity(n);
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(u) = queue.pop_front() {
            order.push(u);
            for &(v, k) in &adj[u] {
                if Some(k) == line_in[u] {
                    continue;
                }
                if seen[v] {
                    return Err(format!("cycle through {}", nodes[v]));
                }
                seen[v] = true;
                parent[v] = Some(u);
                line_in[v] = Some(k);
                children[u].push(v);
                queue.push_back(v);
            }
        }
        if let Some(v) = seen.iter().position(|s| !s) {
            return Err(format!("{} unreachable from root", nodes[v]));
        }
        Ok(Tree {
            nodes,
            parent,
            line_in,
            children,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Product {
    GenUp,
    GenDown,
    DemUp,
    DemDown,
}

impl Product {
    pub const ALL: [Product; 4] = [Product::GenUp, Product::GenDown, Product::DemUp, Product::DemDown];

    /// Effect of one activated MW on the net injection.
    pub fn injection_sign(self) -> f64 {
        match self {
            Product::GenUp | Product::DemUp => 1.0,
            Product::GenDown | Product::DemDown => -1.0,
        }
    }

    /// Objective weight relative to the bid price: upward activations are
    /// paid, downward ones pay back.
    pub fn cost_sign(self) -> f64 {
        self.injection_sign()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Product::GenUp => "gen_up",
            Product::GenDown => "gen_down",
            Product::DemUp => "dem_up",
            Product::DemDown => "dem_down",
        }
    }

    pub fn short(self) -> &'static str {
        match self {
            Product::GenUp => "dp+",
            Product::GenDown => "dp-",
            Product::DemUp => "dd+",
            Product::DemDown => "dd-",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bid {
    #[serde(deserialize_with = "node_id")]
    pub node: String,
    pub product: Product,
    /// €/MWh.
    pub price: f64,
    /// MW.
    pub quantity: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BidSet {
    #[serde(default)]
    pub transmission: Vec<Bid>,
    #[serde(default)]
    pub dsos: BTreeMap<String, Vec<Bid>>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Injection {
    /// Scheduled generation, MW.
    #[serde(default)]
    pub p: f64,
    /// Scheduled demand, MW.
    #[serde(default)]
    pub d: f64,
    /// Reactive demand, MVAr (distribution nodes only).
    #[serde(default)]
    pub qd: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseProfile {
    #[serde(default)]
    pub transmission: BTreeMap<String, Injection>,
    #[serde(default)]
    pub dsos: BTreeMap<String, BTreeMap<String, Injection>>,
}

fn default_base_mva() -> f64 {
    100.0
}

fn default_sides() -> usize {
    12
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "default_base_mva")]
    pub base_mva: f64,
    pub transmission: TransmissionNetwork,
    #[serde(default)]
    pub dsos: Vec<RadialNetwork>,
    #[serde(default)]
    pub base: BaseProfile,
    #[serde(default)]
    pub bids: BidSet,
    #[serde(default = "default_sides")]
    pub polygon_sides: usize,
}

/// Parses a scenario document without checking its invariants.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let mut s: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        ScenarioError::Parse {
            path,
            line: inner.line(),
            column: inner.column(),
            message: inner.to_string(),
        }
    })?;
    if s.transmission.slack.is_none() {
        s.transmission.slack = s.transmission.nodes.first().cloned();
    }
    Ok(s)
}

/// Parses and validates a scenario document.
pub fn load_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let s = parse_scenario(text)?;
    let report = validate(&s);
    if !report.is_valid() {
        return Err(ScenarioError::Invalid(report));
    }
    Ok(s)
}

/// Copy with every `T^{p,min/max}` multiplied by `factor`.
pub fn scale_interface_limits(s: &Scenario, factor: f64) -> Result<Scenario, ScenarioError> {
    if !(factor > 0.0 && factor.is_finite()) {
        return Err(ScenarioError::BadFactor(factor));
    }
    let mut out = s.clone();
    for d in &mut out.dsos {
        d.tp_min *= factor;
        d.tp_max *= factor;
    }
    Ok(out)
}

impl Scenario {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// DSOs in canonical (id-sorted) order.
    pub fn sorted_dsos(&self) -> Vec<&RadialNetwork> {
        let mut v: Vec<&RadialNetwork> = self.dsos.iter().collect();
        v.sort_by(|a, b| a.id.cmp(&b.id));
        v
    }

    pub fn dso(&self, id: &str) -> Result<&RadialNetwork, ScenarioError> {
        self.dsos
            .iter()
            .find(|d| d.id == id)
            .ok_or_else(|| ScenarioError::UnknownDso(id.to_string()))
    }

    pub fn base_t(&self, node: &str) -> Injection {
        self.base.transmission.get(node).copied().unwrap_or_default()
    }

    pub fn base_d(&self, dso: &str, node: &str) -> Injection {
        self.base
            .dsos
            .get(dso)
            .and_then(|m| m.get(node))
            .copied()
            .unwrap_or_default()
    }

    /// Base interface transfer into the feeder: Σ (d° − p°) over its nodes.
    pub fn base_transfer(&self, dso: &RadialNetwork) -> f64 {
        dso.node_ids()
            .iter()
            .map(|n| {
                let b = self.base_d(&dso.id, n);
                b.d - b.p
            })
            .sum()
    }

    /// Base reactive transfer into the feeder: Σ qd over its nodes.
    pub fn base_reactive_transfer(&self, dso: &RadialNetwork) -> f64 {
        dso.node_ids().iter().map(|n| self.base_d(&dso.id, n).qd).sum()
    }

    /// Bid for `(node, product)` at transmission level, if any.
    pub fn bid_t(&self, node: &str, product: Product) -> Option<&Bid> {
        self.bids
            .transmission
            .iter()
            .find(|b| b.node == node && b.product == product)
    }

    pub fn bid_d(&self, dso: &str, node: &str, product: Product) -> Option<&Bid> {
        self.bids
            .dsos
            .get(dso)
            .and_then(|v| v.iter().find(|b| b.node == node && b.product == product))
    }

    /// Stable content hash, used to key memoized coalition values.
    pub fn content_hash(&self) -> u64 {
        // FNV-1a over the canonical JSON form
        let text = serde_json::to_string(self).expect("scenario serializes");
        let mut h: u64 = 0xcbf29ce484222325;
        for b in text.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        h
    }
}
