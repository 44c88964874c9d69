//! Characteristic cost game over all coalitions of system operators.
//!
//! Coalitions are bitmasks over the player list (TSO = bit 0, then DSOs in
//! id order); values are stored in a vector indexed by mask with `v(∅) = 0`.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lp::{solve_lp, LpError, LpProblem, LpStatus};
use crate::market::{
    build_coalition_market, clear, coalition_value, Coalition, MarketError, MarketOptions, Players,
    PricingScheme,
};
use crate::report::fmt_num;
use crate::scenario::Scenario;

/// Hard cap on the number of players for full enumeration.
pub const MAX_PLAYERS: usize = 16;

#[derive(Debug, Error)]
pub enum GameError {
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error("{0} players exceed the enumeration cap of {MAX_PLAYERS}")]
    TooManyPlayers(usize),
    #[error("table has {got} values, expected {expected}")]
    BadTable { got: usize, expected: usize },
    #[error("allocation has {got} entries for {expected} players")]
    Dimension { got: usize, expected: usize },
    #[error("allocation LP failed: {0}")]
    Lp(#[from] LpError),
}

/// Absolute plus relative tolerance for game inequalities.
pub fn game_tol(scale: f64) -> f64 {
    1e-8 + 1e-10 * scale.abs()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveMeta {
    pub status: String,
    pub iterations: usize,
    /// Wall-clock time, excluded from serialized reports.
    #[serde(skip)]
    pub runtime_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameTable {
    pub players: Vec<String>,
    pub scheme: PricingScheme,
    /// `values[mask]`, with `values[0] = 0`.
    pub values: Vec<f64>,
    pub meta: Vec<SolveMeta>,
}

impl GameTable {
    /// Table from explicit values indexed by mask (`values[0]` must be 0).
    pub fn from_values(players: Vec<String>, scheme: PricingScheme, values: Vec<f64>) -> Result<GameTable, GameError> {
        let expected = 1usize << players.len();
        if values.len() != expected {
            return Err(GameError::BadTable { got: values.len(), expected });
        }
        let meta = (0..expected)
            .map(|_| SolveMeta { status: "given".into(), iterations: 0, runtime_ms: 0.0 })
            .collect();
        Ok(GameTable { players, scheme, values, meta })
    }

    /// Table from a closure over masks; handy for synthetic games.
    pub fn from_fn(n: usize, f: impl Fn(u32) -> f64) -> GameTable {
        let players = (1..=n).map(|i| i.to_string()).collect();
        let values = (0..1u32 << n).map(|m| if m == 0 { 0.0 } else { f(m) }).collect();
        GameTable::from_values(players, PricingScheme::PayAsBid, values).expect("sized by construction")
    }

    pub fn n(&self) -> usize {
        self.players.len()
    }

    pub fn grand(&self) -> u32 {
        (1u32 << self.n()) - 1
    }

    pub fn v(&self, mask: u32) -> f64 {
        self.values[mask as usize]
    }

    pub fn grand_value(&self) -> f64 {
        self.v(self.grand())
    }

    pub fn label(&self, mask: u32) -> String {
        (0..self.n())
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| self.players[i].as_str())
            .collect::<Vec<_>>()
            .join("+")
    }

    /// Sub-game on the players of `mask`, renumbered in order.
    pub fn restrict(&self, mask: u32) -> GameTable {
        let idx: Vec<usize> = (0..self.n()).filter(|i| mask >> i & 1 == 1).collect();
        let k = idx.len();
        let values = (0..1u32 << k)
            .map(|sub| {
                let full = idx
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| sub >> j & 1 == 1)
                    .fold(0u32, |m, (_, &i)| m | 1 << i);
                self.v(full)
            })
            .collect();
        let meta = (0..1usize << k)
            .map(|_| SolveMeta { status: "restricted".into(), iterations: 0, runtime_ms: 0.0 })
            .collect();
        GameTable {
            players: idx.iter().map(|&i| self.players[i].clone()).collect(),
            scheme: self.scheme,
            values,
            meta,
        }
    }

    /// Pointwise sum of two games on the same players.
    pub fn add(&self, other: &GameTable) -> GameTable {
        let mut g = self.clone();
        for (a, b) in g.values.iter_mut().zip(&other.values) {
            *a += b;
        }
        g
    }

    /// CSV with columns `coalition_members, value_eur, status`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["coalition_members", "value_eur", "status"]).unwrap();
        for mask in 1..=self.grand() {
            w.write_record([self.label(mask), fmt_num(self.v(mask)), self.meta[mask as usize].status.clone()])
                .unwrap();
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GameOptions {
    pub market: MarketOptions,
}

type CacheKey = (u64, u32, PricingScheme, Option<u64>);

fn cache() -> &'static Mutex<HashMap<CacheKey, (f64, SolveMeta)>> {
    static CACHE: OnceLock<Mutex<HashMap<CacheKey, (f64, SolveMeta)>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Drops every memoized coalition value.
pub fn clear_cache() {
    cache().lock().unwrap().clear();
}

/// Clears the market of one coalition and settles it, bypassing the cache.
pub fn solve_coalition(
    s: &Scenario,
    c: Coalition,
    scheme: PricingScheme,
    opts: &GameOptions,
) -> Result<(f64, SolveMeta), GameError> {
    let t0 = Instant::now();
    let m = build_coalition_market(s, c, &opts.market)?;
    let o = clear(&m)?;
    let v = coalition_value(&m, &o, scheme)?;
    Ok((
        v,
        SolveMeta {
            status: o.status.to_string(),
            iterations: o.iterations,
            runtime_ms: t0.elapsed().as_secs_f64() * 1e3,
        },
    ))
}

/// Memoized coalition value keyed by (scenario hash, coalition, scheme).
pub fn coalition_value_cached(
    s: &Scenario,
    hash: u64,
    c: Coalition,
    scheme: PricingScheme,
    opts: &GameOptions,
) -> Result<(f64, SolveMeta), GameError> {
    let key = (hash, c.0, scheme, opts.market.slack_penalty.map(f64::to_bits));
    if let Some(hit) = cache().lock().unwrap().get(&key) {
        return Ok(hit.clone());
    }
    let r = solve_coalition(s, c, scheme, opts)?;
    cache().lock().unwrap().insert(key, r.clone());
    Ok(r)
}

/// Values of every non-empty coalition, solved in parallel.
pub fn build_game(s: &Scenario, scheme: PricingScheme, opts: &GameOptions) -> Result<GameTable, GameError> {
    let players = Players::from_scenario(s);
    let n = players.len();
    if n > MAX_PLAYERS {
        return Err(GameError::TooManyPlayers(n));
    }
    let hash = s.content_hash();
    let results: Vec<Result<(f64, SolveMeta), GameError>> = (1..1u32 << n)
        .into_par_iter()
        .map(|mask| coalition_value_cached(s, hash, Coalition(mask), scheme, opts))
        .collect();
    let mut values = vec![0.0];
    let mut meta = vec![SolveMeta { status: "empty".into(), iterations: 0, runtime_ms: 0.0 }];
    for r in results {
        let (v, m) = r?;
        values.push(v);
        meta.push(m);
    }
    Ok(GameTable { players: players.ids, scheme, values, meta })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyViolation {
    pub coalitions: Vec<String>,
    /// How far the inequality is violated, in €.
    pub excess: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub checked: usize,
    pub violations: Vec<PropertyViolation>,
    /// Smallest slack over all checked inequalities.
    pub min_slack: f64,
}

impl PropertyReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// `v(A ∪ B) + v(A ∩ B) ≤ v(A) + v(B)` for every pair of coalitions.
pub fn check_submodular(g: &GameTable) -> PropertyReport {
    let full = g.grand();
    let mut r = PropertyReport { min_slack: f64::INFINITY, ..Default::default() };
    for a in 0..=full {
        for b in (a + 1)..=full {
            if a & b == a || a & b == b {
                continue;
            }
            let lhs = g.v(a | b) + g.v(a & b);
            let rhs = g.v(a) + g.v(b);
            let slack = rhs - lhs;
            r.checked += 1;
            r.min_slack = r.min_slack.min(slack);
            let scale = g.v(a | b).abs().max(g.v(a).abs()).max(g.v(b).abs());
            if slack < -game_tol(scale) {
                r.violations.push(PropertyViolation {
                    coalitions: vec![g.label(a), g.label(b)],
                    excess: -slack,
                });
            }
        }
    }
    if r.checked == 0 {
        r.min_slack = 0.0;
    }
    r
}

/// Marginal costs shrink as coalitions grow: for `C ⊂ C′` and `n ∉ C′`,
/// `v(C′ ∪ {n}) − v(C′) ≤ v(C ∪ {n}) − v(C)`.
pub fn check_concavity(g: &GameTable) -> PropertyReport {
    let full = g.grand();
    let mut r = PropertyReport { min_slack: f64::INFINITY, ..Default::default() };
    for big in 0..=full {
        // proper subsets of `big`
        let mut small = big;
        loop {
            small = small.wrapping_sub(1) & big;
            if small == big {
                break;
            }
            for n in 0..g.n() {
                let bit = 1u32 << n;
                if big & bit != 0 {
                    continue;
                }
                let m_small = g.v(small | bit) - g.v(small);
                let m_big = g.v(big | bit) - g.v(big);
                let slack = m_small - m_big;
                r.checked += 1;
                r.min_slack = r.min_slack.min(slack);
                let scale = g.v(big | bit).abs().max(g.v(small | bit).abs());
                if slack < -game_tol(scale) {
                    r.violations.push(PropertyViolation {
                        coalitions: vec![g.label(small), g.label(big), g.players[n].clone()],
                        excess: -slack,
                    });
                }
            }
            if small == 0 {
                break;
            }
        }
    }
    if r.checked == 0 {
        r.min_slack = 0.0;
    }
    r
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoreCertificate {
    pub nonempty: bool,
    /// Optimum of `max Σy s.t. y(C) ≤ v(C)`.
    pub optimum: f64,
    pub grand_value: f64,
    pub witness: Option<Vec<f64>>,
}

/// Balancedness check through the allocation LP.
pub fn core_nonempty(g: &GameTable) -> Result<CoreCertificate, GameError> {
    let n = g.n();
    let mut lp = LpProblem::new("core");
    for p in &g.players {
        lp.add_var(format!("y[{p}]"), -1.0, f64::NEG_INFINITY, f64::INFINITY);
    }
    for mask in 1..=g.grand() {
        let coeffs = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| (i, 1.0)).collect();
        lp.add_le(format!("C{mask}"), coeffs, g.v(mask));
    }
    let sol = solve_lp(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(GameError::Lp(LpError::NotOptimal(sol.status)));
    }
    let optimum = -sol.objective;
    let grand_value = g.grand_value();
    let nonempty = optimum >= grand_value - game_tol(grand_value);
    Ok(CoreCertificate {
        nonempty,
        optimum,
        grand_value,
        witness: nonempty.then(|| sol.x.clone()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoreCheck {
    pub in_core: bool,
    /// `Σy − v(N)`.
    pub efficiency_gap: f64,
    /// Coalition with the largest `y(C) − v(C)`, when positive.
    pub worst: Option<(String, f64)>,
}

pub fn in_core(g: &GameTable, y: &[f64]) -> Result<CoreCheck, GameError> {
    if y.len() != g.n() {
        return Err(GameError::Dimension { got: y.len(), expected: g.n() });
    }
    let gv = g.grand_value();
    let total: f64 = y.iter().sum();
    let gap = total - gv;
    let mut worst: Option<(u32, f64)> = None;
    let mut ok = gap.abs() <= game_tol(gv);
    for mask in 1..=g.grand() {
        let yc: f64 = (0..g.n()).filter(|i| mask >> i & 1 == 1).map(|i| y[i]).sum();
        let excess = yc - g.v(mask);
        if excess > game_tol(g.v(mask)) {
            ok = false;
        }
        if excess > 0.0 && worst.map_or(true, |(_, e)| excess > e) {
            worst = Some((mask, excess));
        }
    }
    Ok(CoreCheck {
        in_core: ok,
        efficiency_gap: gap,
        worst: worst
            .filter(|&(m, e)| e > game_tol(g.v(m)))
            .map(|(m, e)| (g.label(m), e)),
    })
}

/// All partitions of the player set, each as a list of masks.
pub fn partitions(n: usize) -> Vec<Vec<u32>> {
    fn rec(rest: u32, acc: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if rest == 0 {
            out.push(acc.clone());
            return;
        }
        let low = rest & rest.wrapping_neg();
        let others = rest & !low;
        // every block containing the lowest remaining player
        let mut sub = others;
        loop {
            acc.push(low | sub);
            rec(others & !sub, acc, out);
            acc.pop();
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & others;
        }
    }
    let mut out = Vec::new();
    rec((1u32 << n) - 1, &mut Vec::new(), &mut out);
    out
}

/// Cheapest coalition structure and its total value.
pub fn best_partition(g: &GameTable) -> (Vec<u32>, f64) {
    partitions(g.n())
        .into_iter()
        .map(|p| {
            let v = p.iter().map(|&m| g.v(m)).sum::<f64>();
            (p, v)
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("at least one partition")
}
