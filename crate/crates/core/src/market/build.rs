use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Coalition, MarketError, Players};
use crate::lp::LpProblem;
use crate::scenario::{compute_gsf, polygon_coefficients, Product, RadialNetwork, Scenario};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MarketOptions {
    /// Price of elastic slack on every injection-definition row; `None`
    /// keeps the market hard-constrained.
    pub slack_penalty: Option<f64>,
}

/// One flexibility activation variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActVar {
    pub owner: String,
    pub node: String,
    pub product: Product,
    pub price: f64,
    pub quantity: f64,
    pub var: usize,
}

/// Elastic slack on an injection row; `sign` is its effect on injection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlackVar {
    pub owner: String,
    pub node: String,
    pub sign: f64,
    pub var: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRow {
    pub owner: String,
    pub node: String,
    pub row: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterfaceVars {
    pub dso: String,
    pub tp: usize,
    pub tq: Option<usize>,
    /// Whether `T^p` is pinned to its base value.
    pub fixed: bool,
    pub base: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowVars {
    pub owner: String,
    pub line: String,
    pub p: usize,
    pub q: Option<usize>,
    pub limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeVar {
    pub owner: String,
    pub node: String,
    pub var: usize,
}

/// Index of the economically meaningful parts of a market LP.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub activations: Vec<ActVar>,
    pub slacks: Vec<SlackVar>,
    /// Injection-definition rows, whose duals are the nodal prices.
    pub injection_rows: Vec<NodeRow>,
    pub interface: Vec<InterfaceVars>,
    pub flows: Vec<FlowVars>,
    pub voltages: Vec<NodeVar>,
}

/// Owner of each LP variable and row, used by the Lagrangian split.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Ownership {
    pub vars: Vec<String>,
    pub ineq: Vec<String>,
    pub eq: Vec<String>,
    /// Variables shared by two owners (the free interface transfers).
    pub shared: Vec<(usize, String, String)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketModel {
    pub players: Players,
    pub coalition: Coalition,
    pub lp: LpProblem,
    pub layout: Layout,
    pub ownership: Ownership,
}

struct Builder<'a> {
    s: &'a Scenario,
    opts: &'a MarketOptions,
    lp: LpProblem,
    layout: Layout,
    own: Ownership,
}

impl<'a> Builder<'a> {
    fn new(s: &'a Scenario, opts: &'a MarketOptions, name: String) -> Self {
        Builder {
            s,
            opts,
            lp: LpProblem::new(name),
            layout: Layout::default(),
            own: Ownership::default(),
        }
    }

    fn var(&mut self, owner: &str, label: String, cost: f64, lo: f64, hi: f64) -> usize {
        self.own.vars.push(owner.to_string());
        self.lp.add_var(label, cost, lo, hi)
    }

    fn eq(&mut self, owner: &str, label: String, coeffs: Vec<(usize, f64)>, rhs: f64) -> usize {
        self.own.eq.push(owner.to_string());
        self.lp.add_eq(label, coeffs, rhs)
    }

    fn le(&mut self, owner: &str, label: String, coeffs: Vec<(usize, f64)>, rhs: f64) -> usize {
        self.own.ineq.push(owner.to_string());
        self.lp.add_le(label, coeffs, rhs)
    }

    /// Interface transfer variable for `d`, pinned to its base value.
    fn interface_var(&mut self, owner: &str, d: &RadialNetwork) -> usize {
        let base = self.s.base_transfer(d);
        let v = self.var(owner, format!("Tp[{}]", d.id), 0.0, base, base);
        self.layout.interface.push(InterfaceVars {
            dso: d.id.clone(),
            tp: v,
            tq: None,
            fixed: true,
            base,
        });
        v
    }

    /// Activation variables at one node, plus the injection definition row
    /// `p − Σ sign·Δ (− slk⁺ + slk⁻) = p° − d°`. Returns the `p` variable.
    fn injection(&mut self, owner: &str, prefix: &str, node: &str, p0: f64, d0: f64) -> usize {
        let mut coeffs = Vec::new();
        for product in Product::ALL {
            let bid = if owner == super::TSO {
                self.s.bid_t(node, product)
            } else {
                self.s.bid_d(owner, node, product)
            };
            let (price, qty) = bid.map(|b| (b.price, b.quantity)).unwrap_or((0.0, 0.0));
            let v = self.var(
                owner,
                format!("{prefix}{}[{node}]", product.short()),
                product.cost_sign() * price,
                0.0,
                qty,
            );
            coeffs.push((v, -product.injection_sign()));
            self.layout.activations.push(ActVar {
                owner: owner.to_string(),
                node: node.to_string(),
                product,
                price,
                quantity: qty,
                var: v,
            });
        }
        if let Some(pen) = self.opts.slack_penalty {
            for (sign, tag) in [(1.0, "+"), (-1.0, "-")] {
                let v = self.var(owner, format!("{prefix}slk{tag}[{node}]"), pen, 0.0, f64::INFINITY);
                coeffs.push((v, -sign));
                self.layout.slacks.push(SlackVar {
                    owner: owner.to_string(),
                    node: node.to_string(),
                    sign,
                    var: v,
                });
            }
        }
        let p = self.var(owner, format!("{prefix}p[{node}]"), 0.0, f64::NEG_INFINITY, f64::INFINITY);
        coeffs.insert(0, (p, 1.0));
        let row = self.eq(owner, format!("{prefix}inj[{node}]"), coeffs, p0 - d0);
        self.layout.injection_rows.push(NodeRow {
            owner: owner.to_string(),
            node: node.to_string(),
            row,
        });
        p
    }

    fn tso_block(&mut self, tp: &BTreeMap<String, usize>) -> Result<(), MarketError> {
        let s = self.s;
        let t = &s.transmission;
        let owner = super::TSO;
        let gsf = compute_gsf(t)?;
        let idx = t.node_index();
        let mut p = Vec::with_capacity(t.nodes.len());
        for n in &t.nodes {
            let b = s.base_t(n);
            p.push(self.injection(owner, "T.", n, b.p, b.d));
        }
        let mut pl = Vec::with_capacity(t.lines.len());
        for (k, l) in t.lines.iter().enumerate() {
            let v = self.var(owner, format!("T.P[{k}:{}-{}]", l.from, l.to), 0.0, -l.fmax, l.fmax);
            pl.push(v);
            self.layout.flows.push(FlowVars {
                owner: owner.to_string(),
                line: format!("{}-{}", l.from, l.to),
                p: v,
                q: None,
                limit: l.fmax,
            });
        }
        // P_l = Σ X_ln p_n − Σ_d X_l,node(d) T_d
        for (k, l) in t.lines.iter().enumerate() {
            let mut coeffs = vec![(pl[k], 1.0)];
            for (n, &pv) in p.iter().enumerate() {
                let x = gsf.x[k][n];
                if x != 0.0 {
                    coeffs.push((pv, -x));
                }
            }
            for d in s.sorted_dsos() {
                let x = gsf.x[k][idx[d.interface_node.as_str()]];
                if x != 0.0 {
                    coeffs.push((tp[&d.id], x));
                }
            }
            self.eq(owner, format!("T.flow[{k}:{}-{}]", l.from, l.to), coeffs, 0.0);
        }
        // nodal balance
        for (i, n) in t.nodes.iter().enumerate() {
            let mut coeffs = vec![(p[i], 1.0)];
            for d in s.sorted_dsos() {
                if &d.interface_node == n {
                    coeffs.push((tp[&d.id], -1.0));
                }
            }
            for (k, l) in t.lines.iter().enumerate() {
                if &l.from == n {
                    coeffs.push((pl[k], -1.0));
                } else if &l.to == n {
                    coeffs.push((pl[k], 1.0));
                }
            }
            self.eq(owner, format!("T.bal[{n}]"), coeffs, 0.0);
        }
        Ok(())
    }

    fn dso_block(&mut self, d: &RadialNetwork, tp: usize) -> Result<(), MarketError> {
        let s = self.s;
        let owner = d.id.as_str();
        let pre = format!("D[{}].", d.id);
        let tree = d.tree().map_err(|why| {
            MarketError::Scenario(crate::scenario::ScenarioError::Invalid(
                crate::scenario::ValidationReport {
                    violations: vec![crate::scenario::Violation {
                        location: format!("dsos[{}]", d.id),
                        message: format!("radiality violated at dso {}: {why}", d.id),
                    }],
                    warnings: vec![],
                },
            ))
        })?;
        let n = tree.nodes.len();
        let facets = |smax: f64| polygon_coefficients(s.polygon_sides, smax);
        let mut p = Vec::with_capacity(n);
        let mut q = Vec::with_capacity(n);
        let mut v = Vec::with_capacity(n);
        for node in &tree.nodes {
            let b = s.base_d(owner, node);
            p.push(self.injection(owner, &pre, node, b.p, b.d));
            let (qlo, qhi) = (d.qmin.get(node).unwrap_or(0.0), d.qmax.get(node).unwrap_or(0.0));
            q.push(self.var(owner, format!("{pre}q[{node}]"), 0.0, qlo, qhi));
            let (vlo, vhi) = (d.vmin.get(node).unwrap_or(0.0), d.vmax.get(node).unwrap_or(f64::INFINITY));
            let vv = self.var(owner, format!("{pre}v[{node}]"), 0.0, vlo, vhi);
            v.push(vv);
            self.layout.voltages.push(NodeVar {
                owner: owner.to_string(),
                node: node.clone(),
                var: vv,
            });
        }
        let mut pf = vec![usize::MAX; n];
        let mut qf = vec![usize::MAX; n];
        for i in 1..n {
            let node = &tree.nodes[i];
            let line = &d.lines[tree.line_in[i].expect("non-root has a line")];
            pf[i] = self.var(owner, format!("{pre}P[{node}]"), 0.0, f64::NEG_INFINITY, f64::INFINITY);
            qf[i] = self.var(owner, format!("{pre}Q[{node}]"), 0.0, f64::NEG_INFINITY, f64::INFINITY);
            self.layout.flows.push(FlowVars {
                owner: owner.to_string(),
                line: format!("{}-{}", tree.nodes[tree.parent[i].unwrap()], node),
                p: pf[i],
                q: Some(qf[i]),
                limit: line.smax,
            });
        }
        let tq = self.var(owner, format!("{pre}Tq"), 0.0, d.tq_min, d.tq_max);
        if let Some(iv) = self.layout.interface.iter_mut().find(|iv| iv.dso == d.id) {
            iv.tq = Some(tq);
        }
        // active and reactive balances
        for i in 0..n {
            let node = &tree.nodes[i];
            let qd = s.base_d(owner, node).qd;
            let (mut cp, mut cq) = if i == 0 {
                (vec![(tp, 1.0), (p[0], 1.0)], vec![(tq, 1.0), (q[0], 1.0)])
            } else {
                (vec![(p[i], 1.0), (pf[i], 1.0)], vec![(q[i], 1.0), (qf[i], 1.0)])
            };
            for &c in &tree.children[i] {
                cp.push((pf[c], -1.0));
                cq.push((qf[c], -1.0));
            }
            self.eq(owner, format!("{pre}balP[{node}]"), cp, 0.0);
            self.eq(owner, format!("{pre}balQ[{node}]"), cq, qd);
        }
        // voltage drop v_n = v_A(n) − 2(rP + xQ)/base
        for i in 1..n {
            let line = &d.lines[tree.line_in[i].unwrap()];
            let par = tree.parent[i].unwrap();
            let k = 2.0 / s.base_mva;
            let mut coeffs = vec![(v[i], 1.0), (v[par], -1.0)];
            if line.r != 0.0 {
                coeffs.push((pf[i], k * line.r));
            }
            if line.x != 0.0 {
                coeffs.push((qf[i], k * line.x));
            }
            self.eq(owner, format!("{pre}volt[{}]", tree.nodes[i]), coeffs, 0.0);
        }
        // polygonal apparent-power limits
        for i in 1..n {
            let line = &d.lines[tree.line_in[i].unwrap()];
            for (m, f) in facets(line.smax)?.iter().enumerate() {
                let mut coeffs = Vec::with_capacity(2);
                if f.alpha.abs() > 1e-15 {
                    coeffs.push((pf[i], f.alpha));
                }
                if f.beta.abs() > 1e-15 {
                    coeffs.push((qf[i], f.beta));
                }
                self.le(owner, format!("{pre}poly[{},{m}]", tree.nodes[i]), coeffs, f.rhs);
            }
        }
        Ok(())
    }

    fn finish(self, players: Players, coalition: Coalition) -> MarketModel {
        let mut own = self.own;
        for iv in &self.layout.interface {
            if !iv.fixed {
                own.shared.push((iv.tp, super::TSO.to_string(), iv.dso.clone()));
            }
        }
        MarketModel {
            players,
            coalition,
            lp: self.lp,
            layout: self.layout,
            ownership: own,
        }
    }
}

/// Disjoint transmission market with every interface transfer at its base.
pub fn build_disjoint_tso(s: &Scenario, opts: &MarketOptions) -> Result<MarketModel, MarketError> {
    let players = Players::from_scenario(s);
    let c = Coalition(1);
    let mut b = Builder::new(s, opts, format!("market {}", players.label(c)));
    let mut tp = BTreeMap::new();
    for d in s.sorted_dsos() {
        tp.insert(d.id.clone(), b.interface_var(super::TSO, d));
    }
    b.tso_block(&tp)?;
    Ok(b.finish(players, c))
}

/// Disjoint distribution market of one DSO.
pub fn build_disjoint_dso(s: &Scenario, dso: &str, opts: &MarketOptions) -> Result<MarketModel, MarketError> {
    let players = Players::from_scenario(s);
    let c = players.singleton(dso)?;
    let d = s.dso(dso)?;
    let mut b = Builder::new(s, opts, format!("market {}", players.label(c)));
    let tp = b.interface_var(&d.id, d);
    b.dso_block(d, tp)?;
    Ok(b.finish(players, c))
}

/// Sub-common market of coalition `c`. Interface transfers of member DSOs
/// become bounded decision variables when the TSO is also a member.
pub fn build_coalition_market(
    s: &Scenario,
    c: Coalition,
    opts: &MarketOptions,
) -> Result<MarketModel, MarketError> {
    let players = Players::from_scenario(s);
    if c.0 == 0 {
        return Err(MarketError::EmptyCoalition);
    }
    if c.0 >> players.len() != 0 {
        return Err(MarketError::UnknownMember(format!("player bit in {c}")));
    }
    let mut b = Builder::new(s, opts, format!("market {}", players.label(c)));
    let dsos = s.sorted_dsos();
    let mut tp = BTreeMap::new();
    if c.has_tso() {
        for d in &dsos {
            tp.insert(d.id.clone(), b.interface_var(super::TSO, d));
        }
        b.tso_block(&tp)?;
    }
    for (k, d) in dsos.iter().enumerate() {
        if !c.contains(k + 1) {
            continue;
        }
        let v = if c.has_tso() {
            let v = tp[&d.id];
            b.lp.lower[v] = d.tp_min;
            b.lp.upper[v] = d.tp_max;
            let iv = b.layout.interface.iter_mut().find(|iv| iv.dso == d.id).unwrap();
            iv.fixed = false;
            v
        } else {
            b.interface_var(&d.id, d)
        };
        b.dso_block(d, v)?;
    }
    Ok(b.finish(players, c))
}

impl MarketModel {
    /// Block-diagonal union of two markets over the same players and
    /// coalition. Its value is the sum of both values, so it realizes the
    /// sum of two games at the LP level. Labels get `a.`/`b.` prefixes.
    pub fn stack(&self, other: &MarketModel) -> Result<MarketModel, MarketError> {
        if self.players != other.players || self.coalition != other.coalition {
            return Err(MarketError::UnknownMember("stacked markets need the same players and coalition".into()));
        }
        let (nv, ne) = (self.lp.num_vars(), self.lp.eq.len());
        let mut lp = LpProblem::new(format!("{} + {}", self.lp.name, other.lp.name));
        let mut layout = Layout::default();
        let mut own = Ownership::default();
        for (tag, m, dv, de) in [("a", self, 0, 0), ("b", other, nv, ne)] {
            let p = &m.lp;
            for j in 0..p.num_vars() {
                lp.add_var(format!("{tag}.{}", p.var_labels[j]), p.cost[j], p.lower[j], p.upper[j]);
            }
            let shift = |c: &Vec<(usize, f64)>| c.iter().map(|&(j, a)| (j + dv, a)).collect::<Vec<_>>();
            for r in &p.ineq {
                lp.add_le(format!("{tag}.{}", r.label), shift(&r.coeffs), r.rhs);
            }
            for r in &p.eq {
                lp.add_eq(format!("{tag}.{}", r.label), shift(&r.coeffs), r.rhs);
            }
            let l = &m.layout;
            layout.activations.extend(l.activations.iter().map(|a| ActVar { var: a.var + dv, ..a.clone() }));
            layout.slacks.extend(l.slacks.iter().map(|a| SlackVar { var: a.var + dv, ..a.clone() }));
            layout.injection_rows.extend(l.injection_rows.iter().map(|r| NodeRow { row: r.row + de, ..r.clone() }));
            layout.interface.extend(l.interface.iter().map(|iv| InterfaceVars {
                tp: iv.tp + dv,
                tq: iv.tq.map(|v| v + dv),
                ..iv.clone()
            }));
            layout.flows.extend(l.flows.iter().map(|f| FlowVars {
                p: f.p + dv,
                q: f.q.map(|v| v + dv),
                ..f.clone()
            }));
            layout.voltages.extend(l.voltages.iter().map(|v| NodeVar { var: v.var + dv, ..v.clone() }));
            let o = &m.ownership;
            own.vars.extend(o.vars.iter().cloned());
            own.ineq.extend(o.ineq.iter().cloned());
            own.eq.extend(o.eq.iter().cloned());
            own.shared.extend(o.shared.iter().map(|(v, a, b)| (v + dv, a.clone(), b.clone())));
        }
        Ok(MarketModel {
            players: self.players.clone(),
            coalition: self.coalition,
            lp,
            layout,
            ownership: own,
        })
    }
}
