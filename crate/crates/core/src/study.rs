//! Study drivers: coalition sweeps over interface limits, identical-DSO
//! placement and allocation comparison. Each emits plot-ready CSV plus a
//! JSON document carrying the game tables behind it.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::allocation::{
    audit, from_table, lagrangian, Allocation, AllocationError, Axiom, InterfaceSplit, Mechanism, Verdict,
};
use crate::game::{
    best_partition, build_game, check_concavity, check_submodular, coalition_value_cached, core_nonempty, CoreCertificate,
    GameError, GameOptions, GameTable, PropertyReport,
};
use crate::market::{build_coalition_market, clear, Coalition, MarketError, Players, PricingScheme};
use crate::report::fmt_num;
use crate::scenario::{scale_interface_limits, Scenario, ScenarioError};

#[derive(Debug, Error)]
pub enum StudyError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error("interface factor {0} outside (0, 1]")]
    Factor(f64),
    #[error("{0}")]
    Config(String),
    #[error("writing {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Study {
    Clear,
    Game,
    Allocate,
    SweepCoalitions,
    SweepInterface,
    Placement,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub scenario: Option<PathBuf>,
    pub study: Study,
    pub scheme: PricingScheme,
    pub mechanisms: Vec<Mechanism>,
    pub factors: Vec<f64>,
    pub out_dir: PathBuf,
    pub seed: Option<u64>,
    pub game: GameOptions,
}

impl StudyConfig {
    pub fn validate(&self) -> Result<(), StudyError> {
        for &f in &self.factors {
            if !(f > 0.0 && f <= 1.0) {
                return Err(StudyError::Factor(f));
            }
        }
        if self.factors.is_empty() {
            return Err(StudyError::Config("at least one interface factor is required".into()));
        }
        Ok(())
    }
}

/// A partition of the players: one block with the TSO, the rest alone.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Structure {
    pub name: String,
    pub blocks: Vec<Coalition>,
}

impl Structure {
    pub fn label(&self, p: &Players) -> String {
        self.blocks.iter().map(|&b| p.label(b)).collect::<Vec<_>>().join("|")
    }
}

/// Structures `C1..C_{2^K}`: the TSO joined by each subset of DSOs, ordered
/// by subset size then lexicographically, so `C1` is fully disjoint and the
/// last entry is the grand coalition.
pub fn coalition_structures(p: &Players) -> Vec<Structure> {
    let k = p.len() - 1;
    let mut subsets: Vec<u32> = (0..1u32 << k).collect();
    let key = |s: &u32| -> (u32, Vec<usize>) { (s.count_ones(), (0..k).filter(|i| s >> i & 1 == 1).collect()) };
    subsets.sort_by_key(key);
    subsets
        .iter()
        .enumerate()
        .map(|(i, &sub)| {
            let tso = Coalition(1 | sub << 1);
            let mut blocks = vec![tso];
            blocks.extend((0..k).filter(|j| sub >> j & 1 == 0).map(|j| Coalition(1 << (j + 1))));
            Structure { name: format!("C{}", i + 1), blocks }
        })
        .collect()
}

/// Game table with its structural checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameReport {
    pub game: GameTable,
    pub submodularity: PropertyReport,
    pub concavity: PropertyReport,
    pub core: CoreCertificate,
    /// Cheapest partition of the players and its total cost.
    pub best_partition: (Vec<String>, f64),
}

pub fn run_game(s: &Scenario, scheme: PricingScheme, opts: &GameOptions) -> Result<GameReport, StudyError> {
    let game = build_game(s, scheme, opts)?;
    let (parts, total) = best_partition(&game);
    Ok(GameReport {
        submodularity: check_submodular(&game),
        concavity: check_concavity(&game),
        core: core_nonempty(&game)?,
        best_partition: (parts.iter().map(|&m| game.label(m)).collect(), total),
        game,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub structure: String,
    pub members: String,
    pub factor: f64,
    pub total_cost: Option<f64>,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub players: Vec<String>,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn cost(&self, structure: &str, factor: f64) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.structure == structure && r.factor == factor)
            .and_then(|r| r.total_cost)
    }

    /// Relative saving of the last structure against `C1`; `None` when
    /// the disjoint markets cost nothing.
    pub fn savings(&self, factor: f64) -> Option<f64> {
        let last = self.rows.iter().filter(|r| r.factor == factor).last()?;
        let first = self.cost("C1", factor).filter(|c| c.abs() > 1e-9)?;
        Some((first - last.total_cost?) / first)
    }

    /// CSV: `structure, members, factor, total_cost_eur, status`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["structure", "members", "factor", "total_cost_eur", "status"]).unwrap();
        for r in &self.rows {
            w.write_record([
                r.structure.clone(),
                r.members.clone(),
                fmt_num(r.factor),
                r.total_cost.map(fmt_num).unwrap_or_default(),
                r.status.clone(),
            ])
            .unwrap();
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }
}

fn scaled(s: &Scenario, factor: f64) -> Result<Scenario, StudyError> {
    if !(factor > 0.0 && factor <= 1.0) {
        return Err(StudyError::Factor(factor));
    }
    Ok(scale_interface_limits(s, factor)?)
}

fn structure_cost(
    s: &Scenario,
    hash: u64,
    st: &Structure,
    scheme: PricingScheme,
    opts: &GameOptions,
) -> Result<f64, GameError> {
    st.blocks
        .iter()
        .map(|&b| coalition_value_cached(s, hash, b, scheme, opts).map(|(v, _)| v))
        .sum()
}

/// Total cost of every structure at every interface factor.
pub fn run_sweep_coalitions(
    s: &Scenario,
    factors: &[f64],
    scheme: PricingScheme,
    opts: &GameOptions,
) -> Result<SweepReport, StudyError> {
    let players = Players::from_scenario(s);
    let structures = coalition_structures(&players);
    let scenarios: Vec<(f64, Scenario, u64)> = factors
        .iter()
        .map(|&f| {
            let sc = scaled(s, f)?;
            let h = sc.content_hash();
            Ok((f, sc, h))
        })
        .collect::<Result<_, StudyError>>()?;
    let cells: Vec<(usize, usize)> = (0..scenarios.len())
        .flat_map(|fi| (0..structures.len()).map(move |si| (fi, si)))
        .collect();
    let rows = cells
        .par_iter()
        .map(|&(fi, si)| {
            let (f, sc, h) = &scenarios[fi];
            let st = &structures[si];
            let (total_cost, status) = match structure_cost(sc, *h, st, scheme, opts) {
                Ok(v) => (Some(v), "optimal".to_string()),
                Err(e) => (None, e.to_string()),
            };
            SweepRow {
                structure: st.name.clone(),
                members: st.label(&players),
                factor: *f,
                total_cost,
                status,
            }
        })
        .collect();
    Ok(SweepReport { players: players.ids, rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementRow {
    pub structure: String,
    pub clone_node: Option<String>,
    pub total_cost: Option<f64>,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementReport {
    pub template: String,
    pub rows: Vec<PlacementRow>,
}

impl PlacementReport {
    /// CSV: `structure, clone_node, total_cost_eur, status`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["structure", "clone_node", "total_cost_eur", "status"]).unwrap();
        for r in &self.rows {
            w.write_record([
                r.structure.clone(),
                r.clone_node.clone().unwrap_or_default(),
                r.total_cost.map(fmt_num).unwrap_or_default(),
                r.status.clone(),
            ])
            .unwrap();
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }

    pub fn cost_at(&self, node: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.clone_node.as_deref() == Some(node))
            .and_then(|r| r.total_cost)
    }
}

/// Copies of `template` attached at each of `nodes`, replacing the original.
pub fn placement_scenario(s: &Scenario, template: &str, nodes: &[String]) -> Result<Scenario, StudyError> {
    let t = s.dso(template)?.clone();
    let mut out = s.clone();
    out.dsos.retain(|d| d.id != template);
    let base = out.base.dsos.remove(template).unwrap_or_default();
    let bids = out.bids.dsos.remove(template).unwrap_or_default();
    let iface: std::collections::BTreeSet<&String> = s.dsos.iter().filter(|d| d.id != template).map(|d| &d.interface_node).collect();
    out.transmission.interface_nodes.retain(|n| iface.contains(n));
    for n in nodes {
        if !s.transmission.nodes.contains(n) {
            return Err(StudyError::Config(format!("placement node {n} is not a transmission node")));
        }
        let id = format!("{template}@{n}");
        let mut d = t.clone();
        d.id = id.clone();
        d.interface_node = n.clone();
        if !out.transmission.interface_nodes.contains(n) {
            out.transmission.interface_nodes.push(n.clone());
        }
        out.dsos.push(d);
        out.base.dsos.insert(id.clone(), base.clone());
        out.bids.dsos.insert(id, bids.clone());
    }
    Ok(out)
}

/// Clones the template at every candidate node, then prices the disjoint
/// structure and each `{TSO, clone}` structure.
pub fn run_placement(
    s: &Scenario,
    template: &str,
    nodes: &[String],
    scheme: PricingScheme,
    opts: &GameOptions,
) -> Result<PlacementReport, StudyError> {
    if nodes.len() < 2 {
        return Err(StudyError::Config("placement needs at least two candidate nodes".into()));
    }
    let ps = placement_scenario(s, template, nodes)?;
    let players = Players::from_scenario(&ps);
    let hash = ps.content_hash();
    let singles: Vec<Coalition> = (0..players.len()).map(|i| Coalition(1 << i)).collect();
    let mut structures = vec![(None, Structure { name: players.ids.iter().map(|i| format!("{{{i}}}")).collect(), blocks: singles.clone() })];
    for n in nodes {
        let id = format!("{template}@{n}");
        let k = players.index(&id).expect("clone is a player");
        let mut blocks = vec![Coalition(1 | 1 << k)];
        blocks.extend(singles.iter().copied().filter(|c| c.0 != 1 && c.0 != 1 << k));
        let name = blocks.iter().map(|&b| format!("{{{}}}", players.members(b).join(","))).collect();
        structures.push((Some(n.clone()), Structure { name, blocks }));
    }
    let rows = structures
        .par_iter()
        .map(|(node, st)| {
            let (total_cost, status) = match structure_cost(&ps, hash, st, scheme, opts) {
                Ok(v) => (Some(v), "optimal".to_string()),
                Err(e) => (None, e.to_string()),
            };
            PlacementRow { structure: st.name.clone(), clone_node: node.clone(), total_cost, status }
        })
        .collect();
    Ok(PlacementReport { template: template.to_string(), rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechanismResult {
    pub mechanism: Mechanism,
    pub allocation: Option<Allocation>,
    /// Why no allocation was produced.
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorAllocation {
    pub factor: f64,
    pub game: GameTable,
    pub results: Vec<MechanismResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocateReport {
    pub scheme: PricingScheme,
    pub factors: Vec<FactorAllocation>,
}

impl AllocateReport {
    /// CSV: `factor, mechanism, so_id, cost`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["factor", "mechanism", "so_id", "cost"]).unwrap();
        for fa in &self.factors {
            for r in &fa.results {
                for (k, p) in fa.game.players.iter().enumerate() {
                    let cost = r.allocation.as_ref().map(|a| fmt_num(a.y[k])).unwrap_or_else(|| "NA".into());
                    w.write_record([fmt_num(fa.factor), r.mechanism.to_string(), p.clone(), cost]).unwrap();
                }
            }
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }

    /// Audit matrix: one row per (factor, mechanism), one column per axiom.
    pub fn audit_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["factor".to_string(), "mechanism".to_string()];
        header.extend(Axiom::ALL.iter().map(|a| a.as_str().to_string()));
        w.write_record(&header).unwrap();
        for fa in &self.factors {
            for r in &fa.results {
                let mut row = vec![fmt_num(fa.factor), r.mechanism.to_string()];
                for a in Axiom::ALL {
                    let cell = match r.allocation.as_ref().and_then(|al| al.audit.as_ref()) {
                        None => "na".to_string(),
                        Some(rep) => match rep.get(a) {
                            Verdict::Pass => "pass".into(),
                            Verdict::Fail(_) => "fail".into(),
                            Verdict::NotApplicable => "na".into(),
                        },
                    };
                    row.push(cell);
                }
                w.write_record(&row).unwrap();
            }
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }

    pub fn allocation(&self, factor: f64, m: Mechanism) -> Option<&Allocation> {
        self.factors
            .iter()
            .find(|f| f.factor == factor)?
            .results
            .iter()
            .find(|r| r.mechanism == m)?
            .allocation
            .as_ref()
    }
}

/// Runs one mechanism on a game; `L` clears the grand coalition of `s`.
pub fn allocate_one(
    s: &Scenario,
    g: &GameTable,
    m: Mechanism,
    opts: &GameOptions,
) -> Result<Allocation, AllocationError> {
    let a = match m {
        Mechanism::L => {
            if g.scheme != PricingScheme::PayAsBid {
                return Err(AllocationError::NotApplicable {
                    mechanism: m,
                    reason: "dual decomposition reproduces pay-as-bid costs only".into(),
                });
            }
            let players = Players::from_scenario(s);
            let model = build_coalition_market(s, players.grand(), &opts.market)
                .map_err(|e| AllocationError::Undefined(e.to_string()))?;
            let o = clear(&model).map_err(|e| AllocationError::Undefined(e.to_string()))?;
            lagrangian(&model, &o, InterfaceSplit::default())?
        }
        _ => from_table(g, m)?,
    };
    let rep = audit(g, &a);
    Ok(Allocation { audit: Some(rep), ..a })
}

pub fn run_allocate(
    s: &Scenario,
    factors: &[f64],
    scheme: PricingScheme,
    mechanisms: &[Mechanism],
    opts: &GameOptions,
) -> Result<AllocateReport, StudyError> {
    let mut out = Vec::new();
    for &f in factors {
        let sc = scaled(s, f)?;
        let g = build_game(&sc, scheme, opts)?;
        let results = mechanisms
            .par_iter()
            .map(|&m| match allocate_one(&sc, &g, m, opts) {
                Ok(a) => MechanismResult { mechanism: m, allocation: Some(a), note: None },
                Err(e) => MechanismResult { mechanism: m, allocation: None, note: Some(e.to_string()) },
            })
            .collect();
        out.push(FactorAllocation { factor: f, game: g, results });
    }
    Ok(AllocateReport { scheme, factors: out })
}

/// Writes `contents` to `dir/name`, creating `dir` as needed.
pub fn write_output(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, StudyError> {
    let path = dir.join(name);
    match crate::report::write_file(dir, name, contents) {
        Ok(()) => Ok(path),
        Err(source) => Err(StudyError::Io { path, source }),
    }
}
