//! Market LPs for every coalition of system operators, clearing and
//! settlement.
//!
//! Sign conventions: upward products raise the net injection and are paid
//! their bid price, downward products lower it and pay the price back.
//! `T^p > 0` is a transfer from transmission into the distribution system.
//! The nodal price at a node is the marginal cost of one extra MW of
//! withdrawal there.

mod build;
mod coalition;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use build::{
    build_coalition_market, build_disjoint_dso, build_disjoint_tso, ActVar, FlowVars, InterfaceVars,
    Layout, MarketModel, MarketOptions, NodeRow, NodeVar, Ownership, SlackVar,
};
pub use coalition::{Coalition, Players, TSO};

use crate::lp::{solve_lp, LpError, LpSolution, LpStatus};
use crate::report::fmt_num;
use crate::scenario::{polygon_coefficients, Product, Scenario, ScenarioError};

#[derive(Debug, Error)]
pub enum MarketError {
    #[error("unknown coalition member {0}")]
    UnknownMember(String),
    #[error("coalition must not be empty")]
    EmptyCoalition,
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("market for coalition {coalition} is infeasible{}", margin.map(|m| format!(" (Farkas margin {m:.3e})")).unwrap_or_default())]
    Infeasible { coalition: String, margin: Option<f64> },
    #[error("market for coalition {coalition} is unbounded")]
    Unbounded { coalition: String },
    #[error("numerical failure clearing {coalition}: {source}")]
    Numerical {
        coalition: String,
        #[source]
        source: LpError,
    },
    #[error("settlement requires an optimal outcome")]
    NotOptimal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PricingScheme {
    PayAsBid,
    Nodal,
}

impl std::str::FromStr for PricingScheme {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "payasbid" | "pay-as-bid" | "pab" => Ok(PricingScheme::PayAsBid),
            "nodal" => Ok(PricingScheme::Nodal),
            other => Err(format!("unknown pricing scheme {other}")),
        }
    }
}

impl std::fmt::Display for PricingScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PricingScheme::PayAsBid => "payasbid",
            PricingScheme::Nodal => "nodal",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Activation {
    pub owner: String,
    pub node: String,
    pub product: Product,
    pub volume_mw: f64,
    pub offered_mw: f64,
    pub price: f64,
    /// `±price·volume`, negative for downward products.
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodalPrice {
    pub owner: String,
    pub node: String,
    pub price: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterfaceFlow {
    pub dso: String,
    pub tp: f64,
    pub tq: Option<f64>,
    pub fixed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineFlow {
    pub owner: String,
    pub line: String,
    pub p: f64,
    pub q: Option<f64>,
    pub limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledValue {
    pub label: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualVector {
    pub eq: Vec<LabeledValue>,
    pub ineq: Vec<LabeledValue>,
    pub bounds: Vec<LabeledValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketOutcome {
    pub coalition: Vec<String>,
    pub status: LpStatus,
    pub objective: f64,
    pub activations: Vec<Activation>,
    pub nodal_prices: Vec<NodalPrice>,
    pub interface: Vec<InterfaceFlow>,
    pub flows: Vec<LineFlow>,
    pub voltages: Vec<LabeledValue>,
    /// Elastic slack use, MW (only with a slack penalty).
    pub slack_mw: f64,
    pub duals: DualVector,
    pub iterations: usize,
    #[serde(skip)]
    pub solution: Option<LpSolution>,
}

/// Solves the model and assembles the outcome.
pub fn clear(m: &MarketModel) -> Result<MarketOutcome, MarketError> {
    let label = m.players.label(m.coalition);
    let sol = solve_lp(&m.lp).map_err(|e| MarketError::Numerical {
        coalition: label.clone(),
        source: e,
    })?;
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => {
            let margin = sol.farkas.as_ref().and_then(|f| f.margin(&m.lp));
            return Err(MarketError::Infeasible { coalition: label, margin });
        }
        LpStatus::Unbounded => return Err(MarketError::Unbounded { coalition: label }),
    }
    Ok(outcome(m, sol))
}

fn outcome(m: &MarketModel, sol: LpSolution) -> MarketOutcome {
    let x = &sol.x;
    let l = &m.layout;
    let activations = l
        .activations
        .iter()
        .map(|a| Activation {
            owner: a.owner.clone(),
            node: a.node.clone(),
            product: a.product,
            volume_mw: x[a.var],
            offered_mw: a.quantity,
            price: a.price,
            cost: a.product.cost_sign() * a.price * x[a.var],
        })
        .collect();
    let nodal_prices = l
        .injection_rows
        .iter()
        .map(|r| NodalPrice {
            owner: r.owner.clone(),
            node: r.node.clone(),
            price: sol.eq_duals[r.row],
        })
        .collect();
    let interface = l
        .interface
        .iter()
        .map(|iv| InterfaceFlow {
            dso: iv.dso.clone(),
            tp: x[iv.tp],
            tq: iv.tq.map(|v| x[v]),
            fixed: iv.fixed,
        })
        .collect();
    let flows = l
        .flows
        .iter()
        .map(|f| LineFlow {
            owner: f.owner.clone(),
            line: f.line.clone(),
            p: x[f.p],
            q: f.q.map(|v| x[v]),
            limit: f.limit,
        })
        .collect();
    let voltages = l
        .voltages
        .iter()
        .map(|v| LabeledValue {
            label: format!("{}:{}", v.owner, v.node),
            value: x[v.var],
        })
        .collect();
    let lab = |labels: &mut dyn Iterator<Item = &String>, vals: &[f64]| -> Vec<LabeledValue> {
        labels
            .zip(vals)
            .map(|(l, v)| LabeledValue { label: l.clone(), value: *v })
            .collect()
    };
    let duals = DualVector {
        eq: lab(&mut m.lp.eq.iter().map(|c| &c.label), &sol.eq_duals),
        ineq: lab(&mut m.lp.ineq.iter().map(|c| &c.label), &sol.ineq_duals),
        bounds: lab(&mut m.lp.var_labels.iter(), &sol.reduced_costs),
    };
    MarketOutcome {
        coalition: m.players.members(m.coalition).iter().map(|s| s.to_string()).collect(),
        status: sol.status,
        objective: sol.objective,
        activations,
        nodal_prices,
        interface,
        flows,
        voltages,
        slack_mw: l.slacks.iter().map(|s| x[s.var]).sum(),
        duals,
        iterations: sol.iterations,
        solution: Some(sol),
    }
}

/// Per-member cost, in coalition member order.
pub fn settle(m: &MarketModel, o: &MarketOutcome, scheme: PricingScheme) -> Result<Vec<(String, f64)>, MarketError> {
    if o.status != LpStatus::Optimal {
        return Err(MarketError::NotOptimal);
    }
    let sol = o.solution.as_ref().ok_or(MarketError::NotOptimal)?;
    let members = m.players.members(m.coalition);
    let price_at = |owner: &str, node: &str| -> f64 {
        m.layout
            .injection_rows
            .iter()
            .find(|r| r.owner == owner && r.node == node)
            .map(|r| sol.eq_duals[r.row])
            .unwrap_or(0.0)
    };
    let mut out: Vec<(String, f64)> = members.iter().map(|s| (s.to_string(), 0.0)).collect();
    let slot = |owner: &str| members.iter().position(|mm| *mm == owner);
    for a in &m.layout.activations {
        let vol = sol.x[a.var];
        if vol == 0.0 {
            continue;
        }
        let Some(k) = slot(&a.owner) else { continue };
        out[k].1 += match scheme {
            PricingScheme::PayAsBid => a.product.cost_sign() * a.price * vol,
            PricingScheme::Nodal => price_at(&a.owner, &a.node) * a.product.injection_sign() * vol,
        };
    }
    for sv in &m.layout.slacks {
        let vol = sol.x[sv.var];
        if vol == 0.0 {
            continue;
        }
        let Some(k) = slot(&sv.owner) else { continue };
        out[k].1 += match scheme {
            PricingScheme::PayAsBid => m.lp.cost[sv.var] * vol,
            PricingScheme::Nodal => price_at(&sv.owner, &sv.node) * sv.sign * vol,
        };
    }
    Ok(out)
}

/// Total settled cost of the coalition.
pub fn coalition_value(m: &MarketModel, o: &MarketOutcome, scheme: PricingScheme) -> Result<f64, MarketError> {
    Ok(settle(m, o, scheme)?.iter().map(|(_, v)| v).sum())
}

/// Violations of the outcome invariants: bid bounds, line limits (including
/// the polygon), and objective consistency.
pub fn check_outcome(s: &Scenario, m: &MarketModel, o: &MarketOutcome, tol: f64) -> Vec<String> {
    let mut bad = Vec::new();
    let mut obj = 0.0;
    for (a, av) in o.activations.iter().zip(&m.layout.activations) {
        if a.volume_mw < -tol || a.volume_mw > av.quantity + tol {
            bad.push(format!("{}:{} {} outside bid bound", a.owner, a.node, a.product.as_str()));
        }
        obj += a.cost;
    }
    if let Some(sol) = &o.solution {
        for sv in &m.layout.slacks {
            obj += m.lp.cost[sv.var] * sol.x[sv.var];
        }
    }
    if (obj - o.objective).abs() > tol * (1.0 + o.objective.abs()) {
        bad.push(format!("objective {} differs from bid-weighted sum {obj}", o.objective));
    }
    for f in &o.flows {
        match f.q {
            None => {
                if f.p.abs() > f.limit + tol {
                    bad.push(format!("{} line {} over its limit", f.owner, f.line));
                }
            }
            Some(q) => {
                if let Ok(facets) = polygon_coefficients(s.polygon_sides, f.limit) {
                    if facets.iter().any(|fc| !fc.holds(f.p, q, tol)) {
                        bad.push(format!("{} line {} outside its polygon", f.owner, f.line));
                    }
                }
            }
        }
    }
    bad
}

/// Per-node activation table: `node, product, volume_mw, price, cost`.
pub fn outcome_csv(o: &MarketOutcome) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["node", "product", "volume_mw", "price", "cost"]).unwrap();
    for a in o.activations.iter().filter(|a| a.offered_mw > 0.0) {
        w.write_record([
            format!("{}:{}", a.owner, a.node),
            a.product.as_str().to_string(),
            fmt_num(a.volume_mw),
            fmt_num(a.price),
            fmt_num(a.cost),
        ])
        .unwrap();
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}
