//! Cost-allocation mechanisms over a [`GameTable`] and their axiom audit.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{game_tol, in_core, GameError, GameTable};
use crate::lp::{dual_terms, solve_lp, LpError, LpProblem, LpStatus};
use crate::market::{MarketModel, MarketOutcome};
use crate::report::fmt_num;

#[derive(Debug, Error)]
pub enum AllocationError {
    #[error("{mechanism} not applicable: {reason}")]
    NotApplicable { mechanism: Mechanism, reason: String },
    #[error("{0}")]
    Undefined(String),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error("allocation LP failed: {0}")]
    Lp(#[from] LpError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Mechanism {
    SV,
    B,
    BSharp,
    CGA,
    L,
    EPM,
    PCA,
}

impl Mechanism {
    pub const ALL: [Mechanism; 7] = [
        Mechanism::SV,
        Mechanism::B,
        Mechanism::BSharp,
        Mechanism::CGA,
        Mechanism::L,
        Mechanism::EPM,
        Mechanism::PCA,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Mechanism::SV => "sv",
            Mechanism::B => "b",
            Mechanism::BSharp => "bsharp",
            Mechanism::CGA => "cga",
            Mechanism::L => "l",
            Mechanism::EPM => "epm",
            Mechanism::PCA => "pca",
        }
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mechanism::SV => "SV",
            Mechanism::B => "B",
            Mechanism::BSharp => "B#",
            Mechanism::CGA => "CGA",
            Mechanism::L => "L",
            Mechanism::EPM => "EPM",
            Mechanism::PCA => "PCA",
        })
    }
}

impl std::str::FromStr for Mechanism {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim().to_ascii_lowercase();
        Mechanism::ALL
            .into_iter()
            .find(|m| m.tag() == t || m.to_string().to_ascii_lowercase() == t)
            .ok_or_else(|| format!("unknown mechanism {s}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Axiom {
    Efficiency,
    Dummy,
    Symmetry,
    Additivity,
    Stability,
    Anonymity,
}

impl Axiom {
    pub const ALL: [Axiom; 6] = [
        Axiom::Efficiency,
        Axiom::Dummy,
        Axiom::Symmetry,
        Axiom::Additivity,
        Axiom::Stability,
        Axiom::Anonymity,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Axiom::Efficiency => "efficiency",
            Axiom::Dummy => "dummy",
            Axiom::Symmetry => "symmetry",
            Axiom::Additivity => "additivity",
            Axiom::Stability => "stability",
            Axiom::Anonymity => "anonymity",
        }
    }

    /// Axioms a mechanism is documented to satisfy on this cost game.
    pub fn claimed(m: Mechanism, n_players: usize) -> Vec<Axiom> {
        use Axiom::*;
        match m {
            Mechanism::SV => Axiom::ALL.to_vec(),
            Mechanism::B => vec![Dummy, Symmetry, Additivity, Anonymity],
            Mechanism::BSharp => vec![Dummy, Symmetry, Additivity, Anonymity],
            Mechanism::CGA if n_players < 4 => vec![Efficiency, Dummy, Symmetry, Stability, Anonymity],
            Mechanism::CGA => vec![Efficiency, Dummy, Symmetry, Anonymity],
            Mechanism::L => vec![Efficiency, Dummy, Additivity, Stability],
            Mechanism::EPM => vec![Efficiency, Symmetry, Stability],
            Mechanism::PCA => vec![Efficiency, Symmetry, Additivity, Stability],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Verdict {
    Pass,
    Fail(String),
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxiomReport {
    pub verdicts: Vec<(Axiom, Verdict)>,
}

impl AxiomReport {
    pub fn get(&self, a: Axiom) -> &Verdict {
        &self.verdicts.iter().find(|(x, _)| *x == a).expect("all axioms audited").1
    }

    pub fn passed(&self) -> Vec<Axiom> {
        self.verdicts
            .iter()
            .filter(|(_, v)| *v == Verdict::Pass)
            .map(|(a, _)| *a)
            .collect()
    }

    pub fn passed_label(&self) -> String {
        self.passed().iter().map(|a| a.as_str()).collect::<Vec<_>>().join(";")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub mechanism: Mechanism,
    pub players: Vec<String>,
    /// € per system operator, in player order.
    pub y: Vec<f64>,
    pub warnings: Vec<String>,
    pub audit: Option<AxiomReport>,
}

impl Allocation {
    fn new(mechanism: Mechanism, g: &GameTable, y: Vec<f64>) -> Allocation {
        Allocation {
            mechanism,
            players: g.players.clone(),
            y,
            warnings: Vec::new(),
            audit: None,
        }
    }

    pub fn total(&self) -> f64 {
        self.y.iter().sum()
    }

    pub fn audited(mut self, g: &GameTable) -> Allocation {
        self.audit = Some(audit(g, &self));
        self
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

fn members(mask: u32, n: usize) -> impl Iterator<Item = usize> {
    (0..n).filter(move |i| mask >> i & 1 == 1)
}

/// Shapley value in subset form.
pub fn shapley(g: &GameTable) -> Allocation {
    let n = g.n();
    let weight: Vec<f64> = (0..n)
        .map(|k| factorial(k) * factorial(n - k - 1) / factorial(n))
        .collect();
    let y = (0..n)
        .map(|i| {
            let bit = 1u32 << i;
            (0..=g.grand())
                .filter(|c| c & bit == 0)
                .map(|c| weight[c.count_ones() as usize] * (g.v(c | bit) - g.v(c)))
                .sum()
        })
        .collect();
    Allocation::new(Mechanism::SV, g, y)
}

/// Raw Banzhaf value, not efficient in general.
pub fn banzhaf(g: &GameTable) -> Allocation {
    let n = g.n();
    let scale = 0.5f64.powi(n as i32 - 1);
    let y = (0..n)
        .map(|i| {
            let bit = 1u32 << i;
            scale
                * (0..=g.grand())
                    .filter(|c| c & bit == 0)
                    .map(|c| g.v(c | bit) - g.v(c))
                    .sum::<f64>()
        })
        .collect();
    Allocation::new(Mechanism::B, g, y)
}

/// Banzhaf shares scaled to the grand-coalition cost.
pub fn normalized_banzhaf(g: &GameTable) -> Result<Allocation, AllocationError> {
    let b = banzhaf(g);
    let total = b.total();
    if total.abs() < 1e-12 {
        return Err(AllocationError::Undefined(
            "Banzhaf values sum to zero, normalization undefined".into(),
        ));
    }
    let gv = g.grand_value();
    let y = b.y.iter().map(|bn| bn / total * gv).collect();
    Ok(Allocation::new(Mechanism::BSharp, g, y))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostGapData {
    /// `Δ(n) = v(N) − v(N∖{n})`.
    pub delta: Vec<f64>,
    /// `g(C)` indexed by mask.
    pub gap: Vec<f64>,
    /// `w_n = min_{C∋n} g(C)`.
    pub w: Vec<f64>,
}

pub fn cost_gap_data(g: &GameTable) -> CostGapData {
    let n = g.n();
    let full = g.grand();
    let delta: Vec<f64> = (0..n).map(|i| g.grand_value() - g.v(full & !(1 << i))).collect();
    let gap: Vec<f64> = (0..=full)
        .map(|c| {
            if c == 0 {
                0.0
            } else {
                g.v(c) - members(c, n).map(|i| delta[i]).sum::<f64>()
            }
        })
        .collect();
    let w = (0..n)
        .map(|i| {
            (1..=full)
                .filter(|c| c >> i & 1 == 1)
                .map(|c| gap[c as usize])
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    CostGapData { delta, gap, w }
}

/// Cost gap allocation (τ-value).
pub fn cost_gap(g: &GameTable) -> Result<Allocation, AllocationError> {
    let d = cost_gap_data(g);
    let na = |reason: String| AllocationError::NotApplicable { mechanism: Mechanism::CGA, reason };
    if let Some(c) = (1..=g.grand()).find(|&c| d.gap[c as usize] < -game_tol(g.v(c))) {
        return Err(na(format!("g({}) = {} < 0", g.label(c), d.gap[c as usize])));
    }
    let gn = d.gap[g.grand() as usize];
    if gn <= game_tol(g.grand_value()) {
        return Ok(Allocation::new(Mechanism::CGA, g, d.delta));
    }
    let sw: f64 = d.w.iter().sum();
    if sw < gn - game_tol(g.grand_value()) {
        return Err(na(format!("Σw = {sw} < g(N) = {gn}")));
    }
    let y = d.delta.iter().zip(&d.w).map(|(dn, wn)| dn + gn * wn / sw).collect();
    Ok(Allocation::new(Mechanism::CGA, g, y))
}

/// Partition of equivalent players: `v(C ∪ {i}) = v(C ∪ {j})` for all `C`
/// avoiding both.
pub fn equivalence_classes(g: &GameTable) -> Vec<Vec<usize>> {
    let n = g.n();
    let mut class: Vec<Option<usize>> = vec![None; n];
    let mut out: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        if class[i].is_some() {
            continue;
        }
        class[i] = Some(out.len());
        let mut cls = vec![i];
        for j in i + 1..n {
            if class[j].is_none() && equivalent(g, i, j) {
                class[j] = class[i];
                cls.push(j);
            }
        }
        out.push(cls);
    }
    out
}

pub fn equivalent(g: &GameTable, i: usize, j: usize) -> bool {
    let (bi, bj) = (1u32 << i, 1u32 << j);
    (0..=g.grand())
        .filter(|c| c & (bi | bj) == 0)
        .all(|c| (g.v(c | bi) - g.v(c | bj)).abs() <= game_tol(g.v(c | bi)))
}

pub fn is_dummy(g: &GameTable, i: usize) -> bool {
    let bit = 1u32 << i;
    (0..=g.grand())
        .filter(|c| c & bit == 0)
        .all(|c| (g.v(c | bit) - g.v(c)).abs() <= game_tol(g.v(c | bit)))
}

/// Equal profit method: minimizes the spread of relative savings over
/// the core. Players with zero stand-alone cost are pinned to 0.
pub fn equal_profit(g: &GameTable) -> Result<Allocation, AllocationError> {
    let n = g.n();
    let mut lp = LpProblem::new("epm");
    let mut warnings = Vec::new();
    let standalone: Vec<f64> = (0..n).map(|i| g.v(1 << i)).collect();
    let ys: Vec<usize> = (0..n)
        .map(|i| {
            let pinned = standalone[i].abs() <= 1e-12;
            if pinned {
                warnings.push(format!("{} has zero stand-alone cost, allocated 0", g.players[i]));
            }
            lp.add_var(format!("y[{i}]"), 0.0, 0.0, if pinned { 0.0 } else { f64::INFINITY })
        })
        .collect();
    let f = lp.add_var("f", 1.0, 0.0, f64::INFINITY);
    let active: Vec<usize> = (0..n).filter(|&i| standalone[i].abs() > 1e-12).collect();
    for &i in &active {
        for &j in &active {
            if i != j {
                lp.add_le(
                    format!("spread[{i},{j}]"),
                    vec![(ys[i], 1.0 / standalone[i]), (ys[j], -1.0 / standalone[j]), (f, -1.0)],
                    0.0,
                );
            }
        }
    }
    for c in 1..g.grand() {
        lp.add_le(format!("core[{c}]"), members(c, n).map(|i| (ys[i], 1.0)).collect(), g.v(c));
    }
    lp.add_eq("efficiency", ys.iter().map(|&v| (v, 1.0)).collect(), g.grand_value());
    let sol = solve_lp(&lp)?;
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => {
            return Err(AllocationError::Undefined(
                "equal profit LP infeasible: the core (with y ≥ 0) is empty".into(),
            ))
        }
        LpStatus::Unbounded => return Err(AllocationError::Undefined("equal profit LP unbounded".into())),
    }
    let mut y: Vec<f64> = ys.iter().map(|&v| sol.x[v]).collect();
    // the optimal face is invariant under swapping equivalent players
    for cls in equivalence_classes(g) {
        let mean = cls.iter().map(|&i| y[i]).sum::<f64>() / cls.len() as f64;
        for &i in &cls {
            y[i] = mean;
        }
    }
    let mut a = Allocation::new(Mechanism::EPM, g, y);
    a.warnings = warnings;
    Ok(a)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ProportionalMode {
    StandAlone,
    /// Activated MW per player.
    ActivatedVolume(Vec<f64>),
}

pub fn proportional(g: &GameTable, mode: &ProportionalMode) -> Result<Allocation, AllocationError> {
    let n = g.n();
    let weights: Vec<f64> = match mode {
        ProportionalMode::StandAlone => (0..n).map(|i| g.v(1 << i)).collect(),
        ProportionalMode::ActivatedVolume(v) => {
            if v.len() != n {
                return Err(GameError::Dimension { got: v.len(), expected: n }.into());
            }
            v.clone()
        }
    };
    let total: f64 = weights.iter().sum();
    if total.abs() < 1e-12 {
        return Err(AllocationError::Undefined("proportional weights sum to zero".into()));
    }
    let gv = g.grand_value();
    Ok(Allocation::new(Mechanism::PCA, g, weights.iter().map(|w| w / total * gv).collect()))
}

/// Total activated MW per player in a cleared market.
pub fn activated_volumes(players: &[String], o: &MarketOutcome) -> Vec<f64> {
    players
        .iter()
        .map(|p| o.activations.iter().filter(|a| &a.owner == p).map(|a| a.volume_mw).sum())
        .collect()
}

/// How the dual term of a shared interface transfer is divided.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum InterfaceSplit {
    /// Each side keeps its own dual term valued at the base transfer; the
    /// gain from moving away from the base is split 50/50.
    #[default]
    BaseShift,
    /// The whole bound term is split 50/50.
    Even,
}

/// Lagrangian allocation from the duals of the cleared grand coalition.
pub fn lagrangian(m: &MarketModel, o: &MarketOutcome, split: InterfaceSplit) -> Result<Allocation, AllocationError> {
    let na = |reason: &str| AllocationError::NotApplicable { mechanism: Mechanism::L, reason: reason.to_string() };
    if m.coalition != m.players.grand() {
        return Err(na("duals of the grand coalition are required"));
    }
    let sol = o.solution.as_ref().ok_or_else(|| na("outcome carries no duals"))?;
    if sol.status != LpStatus::Optimal {
        return Err(na("grand coalition market is not optimal"));
    }
    let lp = &m.lp;
    let terms = dual_terms(lp, sol);
    let gap = terms.total() - sol.objective;
    if gap.abs() > 1e-8 * (1.0 + sol.objective.abs()) {
        return Err(AllocationError::Undefined(format!("duality gap {gap:e} above tolerance")));
    }
    let players = &m.players.ids;
    let slot = |owner: &str| players.iter().position(|p| p == owner).expect("owner is a player");
    let mut y = vec![0.0; players.len()];
    for (r, owner) in m.ownership.eq.iter().enumerate() {
        y[slot(owner)] += terms.eq[r];
    }
    for (r, owner) in m.ownership.ineq.iter().enumerate() {
        y[slot(owner)] += terms.ineq[r];
    }
    let shared: Vec<usize> = m.ownership.shared.iter().map(|(v, _, _)| *v).collect();
    for (j, owner) in m.ownership.vars.iter().enumerate() {
        if !shared.contains(&j) {
            y[slot(owner)] += terms.bounds[j];
        }
    }
    for (v, a, b) in &m.ownership.shared {
        let iv = m.layout.interface.iter().find(|iv| iv.tp == *v).expect("shared var is an interface");
        let term = terms.bounds[*v];
        match split {
            InterfaceSplit::Even => {
                y[slot(a)] += 0.5 * term;
                y[slot(b)] += 0.5 * term;
            }
            InterfaceSplit::BaseShift => {
                // column share of each owner's rows
                let mut share = [0.0, 0.0];
                for (r, row) in lp.eq.iter().enumerate() {
                    if let Some(&(_, coef)) = row.coeffs.iter().find(|(k, _)| k == v) {
                        let k = if m.ownership.eq[r] == *a { 0 } else { 1 };
                        share[k] += sol.eq_duals[r] * coef;
                    }
                }
                for (r, row) in lp.ineq.iter().enumerate() {
                    if let Some(&(_, coef)) = row.coeffs.iter().find(|(k, _)| k == v) {
                        let k = if m.ownership.ineq[r] == *a { 0 } else { 1 };
                        share[k] += sol.ineq_duals[r] * coef;
                    }
                }
                let rest = term - (share[0] + share[1]) * iv.base;
                y[slot(a)] += share[0] * iv.base + 0.5 * rest;
                y[slot(b)] += share[1] * iv.base + 0.5 * rest;
            }
        }
    }
    Ok(Allocation {
        mechanism: Mechanism::L,
        players: players.clone(),
        y,
        warnings: Vec::new(),
        audit: None,
    })
}

/// Runs a mechanism that needs only the characteristic function. `L`
/// needs market duals and is reported as not applicable.
pub fn from_table(g: &GameTable, m: Mechanism) -> Result<Allocation, AllocationError> {
    Ok(match m {
        Mechanism::SV => shapley(g),
        Mechanism::B => banzhaf(g),
        Mechanism::BSharp => normalized_banzhaf(g)?,
        Mechanism::CGA => cost_gap(g)?,
        Mechanism::EPM => equal_profit(g)?,
        Mechanism::PCA => proportional(g, &ProportionalMode::StandAlone)?,
        Mechanism::L => {
            return Err(AllocationError::NotApplicable {
                mechanism: m,
                reason: "needs the duals of a cleared market".into(),
            })
        }
    })
}

/// Per-instance axiom audit. Additivity and anonymity concern pairs of
/// games and are checked by the property suite instead.
pub fn audit(g: &GameTable, a: &Allocation) -> AxiomReport {
    let gv = g.grand_value();
    let tol = game_tol(gv);
    let eff = {
        let gap = a.total() - gv;
        if gap.abs() <= tol {
            Verdict::Pass
        } else {
            Verdict::Fail(format!("Σy − v(N) = {gap}"))
        }
    };
    let dummy = {
        let bad: Vec<String> = (0..g.n())
            .filter(|&i| is_dummy(g, i) && a.y[i].abs() > tol)
            .map(|i| format!("{} is a dummy but pays {}", g.players[i], a.y[i]))
            .collect();
        if bad.is_empty() {
            Verdict::Pass
        } else {
            Verdict::Fail(bad.join("; "))
        }
    };
    let sym = {
        let mut bad = Vec::new();
        for cls in equivalence_classes(g) {
            for &j in &cls[1..] {
                let i = cls[0];
                if (a.y[i] - a.y[j]).abs() > tol {
                    bad.push(format!("{} and {} are equivalent but pay {} and {}", g.players[i], g.players[j], a.y[i], a.y[j]));
                }
            }
        }
        if bad.is_empty() {
            Verdict::Pass
        } else {
            Verdict::Fail(bad.join("; "))
        }
    };
    let stab = match in_core(g, &a.y) {
        Ok(c) if c.in_core => Verdict::Pass,
        Ok(c) => Verdict::Fail(match c.worst {
            Some((who, e)) => format!("coalition {who} exceeds its value by {e}"),
            None => format!("efficiency gap {}", c.efficiency_gap),
        }),
        Err(e) => Verdict::Fail(e.to_string()),
    };
    AxiomReport {
        verdicts: vec![
            (Axiom::Efficiency, eff),
            (Axiom::Dummy, dummy),
            (Axiom::Symmetry, sym),
            (Axiom::Additivity, Verdict::NotApplicable),
            (Axiom::Stability, stab),
            (Axiom::Anonymity, Verdict::NotApplicable),
        ],
    }
}

/// CSV with columns `mechanism, so_id, cost_eur, axioms_passed`.
pub fn allocations_csv(allocs: &[Allocation]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["mechanism", "so_id", "cost_eur", "axioms_passed"]).unwrap();
    for a in allocs {
        let passed = a.audit.as_ref().map(|r| r.passed_label()).unwrap_or_default();
        for (p, y) in a.players.iter().zip(&a.y) {
            w.write_record([a.mechanism.to_string(), p.clone(), fmt_num(*y), passed.clone()]).unwrap();
        }
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two(v1: f64, v2: f64, v12: f64) -> GameTable {
        GameTable::from_fn(2, |m| match m {
            1 => v1,
            2 => v2,
            _ => v12,
        })
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn two_player_reference_values() {
        let g = two(4.0, 6.0, 8.0);
        assert!(close(&shapley(&g).y, &[3.0, 5.0], 1e-12));
        assert!(close(&banzhaf(&g).y, &[3.0, 5.0], 1e-12));
        assert!(close(&normalized_banzhaf(&g).unwrap().y, &[3.0, 5.0], 1e-12));
        assert!(close(&cost_gap(&g).unwrap().y, &[3.0, 5.0], 1e-12));
        assert!(close(&equal_profit(&g).unwrap().y, &[3.2, 4.8], 1e-9));
        assert!(close(&proportional(&g, &ProportionalMode::StandAlone).unwrap().y, &[3.2, 4.8], 1e-12));
    }

    #[test]
    fn cost_gap_data_matches_hand_arithmetic() {
        let d = cost_gap_data(&two(4.0, 6.0, 8.0));
        assert_eq!(d.delta, vec![2.0, 4.0]);
        assert_eq!(d.gap, vec![0.0, 2.0, 2.0, 2.0]);
        assert_eq!(d.w, vec![2.0, 2.0]);
    }

    #[test]
    fn cost_gap_zero_grand_gap_returns_marginals() {
        // Δ = (2, 2, 2), g(N) = 0, g({i}) = 1; needs three players
        let g = GameTable::from_fn(3, |m| match m.count_ones() {
            1 => 3.0,
            2 => 4.0,
            _ => 6.0,
        });
        let d = cost_gap_data(&g);
        assert!(d.gap[7].abs() < 1e-12 && d.gap[1] > 0.0);
        assert_eq!(cost_gap(&g).unwrap().y, d.delta);
    }

    #[test]
    fn cost_gap_reports_negative_gap() {
        let g = two(1.0, 1.0, 5.0);
        assert!(matches!(cost_gap(&g), Err(AllocationError::NotApplicable { .. })));
    }

    #[test]
    fn zero_game_has_no_normalized_banzhaf() {
        let g = two(0.0, 0.0, 0.0);
        assert!(normalized_banzhaf(&g).is_err());
        assert!(proportional(&g, &ProportionalMode::StandAlone).is_err());
    }

    #[test]
    fn raw_banzhaf_efficiency_depends_on_table() {
        let g = two(4.0, 6.0, 9.0);
        let ok = banzhaf(&g).audited(&g);
        assert!(close(&ok.y, &[3.5, 5.5], 1e-12));
        assert_eq!(*ok.audit.unwrap().get(Axiom::Efficiency), Verdict::Pass);
        // two-player Banzhaf always coincides with Shapley; three players break it
        let g = GameTable::from_fn(3, |_| 1.0);
        let bad = banzhaf(&g).audited(&g);
        assert!((bad.total() - 0.75).abs() < 1e-12);
        assert!(matches!(bad.audit.unwrap().get(Axiom::Efficiency), Verdict::Fail(_)));
    }

    #[test]
    fn dummy_players_cost_nothing_alone() {
        // the empty coalition is among the C in the dummy condition
        let g = GameTable::from_fn(3, |m| match m & 0b011 {
            0 => 0.0,
            1 => 4.0,
            2 => 6.0,
            _ => 8.0,
        });
        assert!(is_dummy(&g, 2));
        let with_standalone = GameTable::from_fn(3, |m| match m & 0b011 {
            0 => 3.0,
            1 => 4.0,
            2 => 6.0,
            _ => 8.0,
        });
        assert!(!is_dummy(&with_standalone, 2));
        for a in [
            shapley(&g),
            cost_gap(&g).unwrap(),
            proportional(&g, &ProportionalMode::StandAlone).unwrap(),
        ] {
            let a = a.audited(&g);
            assert_eq!(*a.audit.as_ref().unwrap().get(Axiom::Dummy), Verdict::Pass, "{}", a.mechanism);
        }
    }

    #[test]
    fn epm_on_symmetric_and_additive_games() {
        let g = two(5.0, 5.0, 7.0);
        let e = equal_profit(&g).unwrap();
        assert!((e.y[0] - e.y[1]).abs() < 1e-9);
        let add = GameTable::from_fn(3, |m| members(m, 3).map(|i| [1.0, 2.0, 3.0][i]).sum());
        assert!(close(&equal_profit(&add).unwrap().y, &[1.0, 2.0, 3.0], 1e-9));
    }

    #[test]
    fn epm_pins_zero_standalone() {
        let g = GameTable::from_fn(3, |m| members(m, 3).map(|i| [0.0, 2.0, 3.0][i]).sum::<f64>() - if m & 0b110 == 0b110 { 1.0 } else { 0.0 });
        let e = equal_profit(&g).unwrap();
        assert_eq!(e.y[0], 0.0);
        assert_eq!(e.warnings.len(), 1);
    }

    #[test]
    fn epm_reports_empty_core() {
        assert!(equal_profit(&two(10.0, 10.0, 25.0)).is_err());
    }

    #[test]
    fn equal_volumes_split_evenly() {
        let g = two(4.0, 6.0, 8.0);
        let a = proportional(&g, &ProportionalMode::ActivatedVolume(vec![2.0, 2.0])).unwrap();
        assert_eq!(a.y, vec![4.0, 4.0]);
    }

    #[test]
    fn mechanism_tags_round_trip() {
        for m in Mechanism::ALL {
            assert_eq!(m.tag().parse::<Mechanism>().unwrap(), m);
        }
        assert_eq!("B#".parse::<Mechanism>().unwrap(), Mechanism::BSharp);
    }

    #[test]
    fn csv_has_contract_header() {
        let g = two(4.0, 6.0, 8.0);
        let csv = allocations_csv(&[shapley(&g).audited(&g)]);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "mechanism,so_id,cost_eur,axioms_passed");
        assert_eq!(lines.next().unwrap(), "SV,1,3,efficiency;dummy;symmetry;stability");
    }
}
