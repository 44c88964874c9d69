//! Acceptance suite. Runs without the libtest harness so that every
//! criterion prints exactly one PASS/FAIL line.

mod common;

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use flexcoop::allocation::{from_table, is_dummy, lagrangian, Axiom, InterfaceSplit, Mechanism};
use flexcoop::game::{build_game, check_concavity, check_submodular, clear_cache, core_nonempty, in_core, GameOptions, GameTable};
use flexcoop::lp::{dual_objective, solve_lp, LpStatus};
use flexcoop::market::{
    build_coalition_market, build_disjoint_dso, build_disjoint_tso, clear, MarketModel, MarketOptions, Players,
    PricingScheme,
};
use flexcoop::scenario::Scenario;
use flexcoop::study::{run_placement, run_sweep_coalitions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

/// Claims that do not hold in general. They are still checked, and the
/// criterion reports FAIL when they break, but they do not abort the run.
const KNOWN_FALSE: [(Mechanism, Axiom); 2] = [(Mechanism::BSharp, Axiom::Additivity), (Mechanism::PCA, Axiom::Additivity)];

const SCENARIOS: u64 = 20;

struct Outcome {
    pass: bool,
    detail: String,
    /// Failure consists only of documented exceptions.
    documented: bool,
}

impl Outcome {
    fn check(pass: bool, detail: impl Into<String>) -> Outcome {
        Outcome { pass, detail: detail.into(), documented: false }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + a.abs().max(b.abs()))
}

fn lp_engine() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut gap, mut slack, mut oracle) = (0.0f64, 0.0f64, 0.0f64);
    let mut solve_secs = 0.0;
    let count = 60;
    let mut max_vars = 0;
    for k in 0..count {
        let n = 2 + k % 7;
        let p = random_lp(&mut rng, n, 1 + k % 5, (k % 3).min(n - 1));
        max_vars = max_vars.max(p.num_vars());
        let t = Instant::now();
        let s = match solve_lp(&p) {
            Ok(s) if s.status == LpStatus::Optimal => s,
            other => return Outcome::check(false, format!("lp {k}: {other:?}")),
        };
        let d = dual_objective(&p, &s).unwrap();
        solve_secs += t.elapsed().as_secs_f64();
        gap = gap.max(rel(s.objective, d));
        slack = slack.max(complementary_slackness(&p, &s));
        match vertex_enumeration(&p) {
            Some(v) => oracle = oracle.max(rel(s.objective, v)),
            None => return Outcome::check(false, format!("lp {k}: oracle found no vertex")),
        }
    }
    Outcome::check(
        gap <= 1e-8 && slack <= 1e-8 && oracle <= 1e-8 && solve_secs < 5.0 && max_vars <= 20,
        format!(
            "{count} LPs, ≤{max_vars} vars, duality gap {gap:.1e}, slackness {slack:.1e}, oracle {oracle:.1e}, solver {solve_secs:.3}s"
        ),
    )
}

fn market_fixtures() -> Outcome {
    let opts = MarketOptions::default();
    let objective = |name: &str| {
        let s = fixture(name);
        let m = build_coalition_market(&s, Players::from_scenario(&s).grand(), &opts).unwrap();
        clear(&m).unwrap().objective
    };
    // 15 MW over a 10 MW line: 5 MW up at €50, 5 MW down refunding €10
    let two_bus_want = 5.0 * 50.0 - 5.0 * 10.0;
    let two_bus = objective("two_bus.json");
    // 2 MW behind a 1.5 MW limit: 0.5 MW reduction at €50, 0.5 MW refund of €10
    let feeder_want = 0.5 * 50.0 - 0.5 * 10.0;
    let feeder = objective("feeder_overload.json");
    let mut mismatches = Vec::new();
    let mut scenarios: Vec<(String, Scenario)> = (0..5).map(|i| (format!("small {i}"), small(i))).collect();
    scenarios.push(("feeder_overload".into(), fixture("feeder_overload.json")));
    scenarios.push(("two_bus_idle".into(), fixture("two_bus_idle.json")));
    for (name, s) in &scenarios {
        let p = Players::from_scenario(s);
        let mut pairs: Vec<(MarketModel, MarketModel)> = vec![(
            build_disjoint_tso(s, &opts).unwrap(),
            build_coalition_market(s, p.singleton("TSO").unwrap(), &opts).unwrap(),
        )];
        for id in &p.ids[1..] {
            pairs.push((
                build_disjoint_dso(s, id, &opts).unwrap(),
                build_coalition_market(s, p.singleton(id).unwrap(), &opts).unwrap(),
            ));
        }
        for (d, c) in pairs {
            let same_x = clear(&d).unwrap().solution.map(|s| s.x) == clear(&c).unwrap().solution.map(|s| s.x);
            if d.lp != c.lp || !same_x {
                mismatches.push(format!("{name}/{}", d.lp.name));
            }
        }
    }
    Outcome::check(
        (two_bus - two_bus_want).abs() <= 1e-8 && (feeder - feeder_want).abs() <= 1e-8 && mismatches.is_empty(),
        format!(
            "two-bus {two_bus:.10}, feeder {feeder:.10}, singleton mismatches {:?} over {} scenarios",
            mismatches,
            scenarios.len()
        ),
    )
}

fn games() -> Vec<GameTable> {
    (0..SCENARIOS)
        .map(|seed| build_game(&small(seed), PricingScheme::PayAsBid, &GameOptions::default()).unwrap())
        .collect()
}

fn game_structure() -> Outcome {
    let mut bad = Vec::new();
    let mut slowest: f64 = 0.0;
    for seed in 0..SCENARIOS {
        clear_cache();
        let t = Instant::now();
        let g = build_game(&small(seed), PricingScheme::PayAsBid, &GameOptions::default()).unwrap();
        let sub = check_submodular(&g);
        let conc = check_concavity(&g);
        let cert = core_nonempty(&g).unwrap();
        slowest = slowest.max(t.elapsed().as_secs_f64());
        if g.n() != 4 || !sub.holds() || !conc.holds() || !cert.nonempty {
            bad.push(format!(
                "seed {seed}: n {} submodular {} concave {} core {}",
                g.n(),
                sub.violations.len(),
                conc.violations.len(),
                cert.nonempty
            ));
        }
    }
    Outcome::check(
        bad.is_empty() && slowest < 60.0,
        format!("{SCENARIOS} scenarios with 4 players, slowest {slowest:.3}s{}", list(&bad)),
    )
}

fn list(items: &[String]) -> String {
    if items.is_empty() {
        String::new()
    } else {
        format!("; {}", items.join("; "))
    }
}

fn reference_table() -> Outcome {
    let g = GameTable::from_fn(2, |m| [0.0, 4.0, 6.0, 8.0][m as usize]);
    let want = [
        (Mechanism::SV, [3.0, 5.0]),
        (Mechanism::B, [3.0, 5.0]),
        (Mechanism::BSharp, [3.0, 5.0]),
        (Mechanism::CGA, [3.0, 5.0]),
        (Mechanism::EPM, [3.2, 4.8]),
        (Mechanism::PCA, [3.2, 4.8]),
    ];
    let mut got = Vec::new();
    let mut ok = true;
    for (m, y) in want {
        let a = from_table(&g, m).unwrap().y;
        ok &= a.iter().zip(&y).all(|(a, b)| (a - b).abs() <= 1e-9);
        got.push(format!("{m} ({:.4}, {:.4})", a[0], a[1]));
    }
    Outcome::check(ok, got.join(", "))
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst: f64 = 0.0;
    for k in 0..100 {
        let g = random_table(&mut rng, 1 + k % 5);
        let sv = from_table(&g, Mechanism::SV).unwrap().y;
        let b = from_table(&g, Mechanism::B).unwrap().y;
        for (x, y) in sv.iter().zip(shapley_by_permutations(&g)).chain(b.iter().zip(banzhaf_by_subsets(&g))) {
            worst = worst.max((x - y).abs());
        }
    }
    Outcome::check(worst <= 1e-10, format!("100 tables with 1 to 5 players, worst deviation {worst:.1e}"))
}

fn grand_model(s: &Scenario) -> MarketModel {
    build_coalition_market(s, Players::from_scenario(s).grand(), &MarketOptions::default()).unwrap()
}

fn l_of(m: &MarketModel) -> Vec<f64> {
    lagrangian(m, &clear(m).unwrap(), InterfaceSplit::BaseShift).unwrap().y
}

fn stability(games: &[GameTable]) -> Outcome {
    let mut bad = Vec::new();
    let mut sub_games = 0;
    for (seed, g) in games.iter().enumerate() {
        for m in [Mechanism::SV, Mechanism::BSharp, Mechanism::EPM, Mechanism::PCA] {
            let y = from_table(g, m).unwrap().y;
            if !in_core(g, &y).unwrap().in_core {
                bad.push(format!("seed {seed} {m}"));
            }
        }
        let y = l_of(&grand_model(&small(seed as u64)));
        if !in_core(g, &y).unwrap().in_core {
            bad.push(format!("seed {seed} L"));
        }
        for mask in 1..g.grand() {
            if mask.count_ones() >= 4 {
                continue;
            }
            let sub = g.restrict(mask);
            sub_games += 1;
            let y = from_table(&sub, Mechanism::CGA).unwrap().y;
            if !in_core(&sub, &y).unwrap().in_core {
                bad.push(format!("seed {seed} CGA on {}", g.label(mask)));
            }
        }
    }
    Outcome::check(
        bad.is_empty(),
        format!("{} games, SV/B#/EPM/PCA/L in core, CGA on {sub_games} sub-games{}", games.len(), list(&bad)),
    )
}

/// `scale·sqrt(Σw) + Σb` over members.
fn concave(w: Vec<f64>, b: Vec<f64>, scale: f64) -> GameTable {
    let n = w.len();
    GameTable::from_fn(n, move |c| {
        let (sw, sb) = (0..n).filter(|i| c >> i & 1 == 1).fold((0.0, 0.0), |(x, y), i| (x + w[i], y + b[i]));
        scale * sw.sqrt() + sb
    })
}

fn random_parts(rng: &mut ChaCha8Rng, n: usize) -> (Vec<f64>, Vec<f64>, f64) {
    let w = (0..n).map(|_| rng.gen_range(0.5..5.0)).collect();
    let b = (0..n).map(|_| rng.gen_range(0.0..3.0)).collect();
    (w, b, rng.gen_range(1.0..20.0))
}

/// Checks one claimed axiom on constructed tables; `None` when it holds.
fn table_axiom(m: Mechanism, a: Axiom, n: usize, rng: &mut ChaCha8Rng) -> Option<String> {
    let y = |g: &GameTable| from_table(g, m).unwrap().y;
    for _ in 0..25 {
        match a {
            Axiom::Efficiency => {
                let g = random_submodular(rng, n);
                let gap = y(&g).iter().sum::<f64>() - g.grand_value();
                if gap.abs() > 1e-8 * (1.0 + g.grand_value().abs()) {
                    return Some(format!("Σy − v(N) = {gap:.3e}"));
                }
            }
            Axiom::Dummy => {
                let (mut w, mut b, k) = random_parts(rng, n);
                let d = rng.gen_range(0..n);
                w[d] = 0.0;
                b[d] = 0.0;
                let g = concave(w, b, k);
                assert!(is_dummy(&g, d));
                let yd = y(&g)[d];
                if yd.abs() > 1e-8 {
                    return Some(format!("dummy pays {yd:.3e}"));
                }
            }
            Axiom::Symmetry => {
                let (mut w, mut b, k) = random_parts(rng, n);
                w[1] = w[0];
                b[1] = b[0];
                let v = y(&concave(w, b, k));
                if (v[0] - v[1]).abs() > 1e-8 * (1.0 + v[0].abs()) {
                    return Some(format!("equivalent pair pays {:.6} and {:.6}", v[0], v[1]));
                }
            }
            Axiom::Additivity => {
                let (g, h) = (random_submodular(rng, n), random_submodular(rng, n));
                let sum: Vec<f64> = y(&g).iter().zip(y(&h)).map(|(a, b)| a + b).collect();
                let gh = y(&g.add(&h));
                if !close(&gh, &sum, 1e-8) {
                    let d = gh.iter().zip(&sum).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                    return Some(format!("φ(G+H) differs from φ(G)+φ(H) by {d:.3e}"));
                }
            }
            Axiom::Anonymity => {
                let g = random_submodular(rng, n);
                let perm = shuffled(rng, n);
                let (a, b) = (y(&g), y(&permute_table(&g, &perm)));
                let moved: Vec<f64> = perm.iter().map(|&i| a[i]).collect();
                if !close(&b, &moved, 1e-8) {
                    return Some("relabelling changes the allocation".into());
                }
            }
            Axiom::Stability => unreachable!("covered by the stability criterion"),
        }
    }
    None
}

fn lagrangian_axiom(a: Axiom) -> Option<String> {
    let mut scenarios = vec![fixture("two_bus_dso.json"), fixture("two_bus_idle.json")];
    scenarios.extend((0..4).map(small));
    match a {
        Axiom::Efficiency => scenarios.iter().find_map(|s| {
            let g = build_game(s, PricingScheme::PayAsBid, &GameOptions::default()).unwrap();
            let gap = l_of(&grand_model(s)).iter().sum::<f64>() - g.grand_value();
            (gap.abs() > 1e-8 * (1.0 + g.grand_value().abs())).then(|| format!("Σy − v(N) = {gap:.3e}"))
        }),
        Axiom::Dummy => {
            let s = fixture("two_bus_idle.json");
            let g = build_game(&s, PricingScheme::PayAsBid, &GameOptions::default()).unwrap();
            let y = l_of(&grand_model(&s));
            (0..g.n()).find(|&i| is_dummy(&g, i) && y[i].abs() > 1e-8).map(|i| format!("dummy pays {:.3e}", y[i]))
        }
        Axiom::Additivity => {
            let mut b = fixture("two_bus_dso.json");
            b.transmission.lines[0].fmax = 7.0;
            for bid in b.bids.dsos.values_mut().flatten() {
                bid.price = 42.0;
            }
            let pairs = [(fixture("two_bus_dso.json"), b), (small(0), small(1)), (small(2), small(3))];
            pairs.iter().find_map(|(a, b)| {
                let (ma, mb) = (grand_model(a), grand_model(b));
                let ys = l_of(&ma.stack(&mb).unwrap());
                let sum: Vec<f64> = l_of(&ma).iter().zip(l_of(&mb)).map(|(x, y)| x + y).collect();
                (!close(&ys, &sum, 1e-8)).then(|| "stacked market allocation is not the sum".to_string())
            })
        }
        _ => unreachable!("not claimed for L"),
    }
}

fn axiom_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut failures = Vec::new();
    let mut checked = 0;
    let mechs = [
        Mechanism::SV,
        Mechanism::B,
        Mechanism::BSharp,
        Mechanism::CGA,
        Mechanism::L,
        Mechanism::EPM,
        Mechanism::PCA,
    ];
    for m in mechs {
        for n in [3, 4] {
            for a in Axiom::claimed(m, n) {
                if a == Axiom::Stability || (m == Mechanism::L && n == 4) {
                    continue;
                }
                checked += 1;
                let res = if m == Mechanism::L { lagrangian_axiom(a) } else { table_axiom(m, a, n, &mut rng) };
                if let Some(why) = res {
                    failures.push((m, a, n, why));
                }
            }
        }
    }
    let documented = failures.iter().all(|(m, a, _, _)| KNOWN_FALSE.contains(&(*m, *a)));
    let text: Vec<String> = failures.iter().map(|(m, a, n, why)| format!("{m} {} (n={n}): {why}", a.as_str())).collect();
    Outcome {
        pass: failures.is_empty(),
        detail: format!("{checked} claims checked{}", list(&text)),
        documented: !failures.is_empty() && documented,
    }
}

fn trend() -> Outcome {
    let factors = [1.0, 0.5, 0.2];
    let r = run_sweep_coalitions(&fixture("ieee14_3dso.json"), &factors, PricingScheme::PayAsBid, &GameOptions::default())
        .unwrap();
    let mut bad = Vec::new();
    for f in factors {
        let chain: Vec<f64> = ["C1", "C2", "C5", "C8"].iter().map(|c| r.cost(c, f).unwrap()).collect();
        if chain.windows(2).any(|w| w[1] > w[0] + 1e-8 * (1.0 + w[0].abs())) {
            bad.push(format!("chain at {f}: {chain:?}"));
        }
    }
    for st in ["C1", "C2", "C3", "C4", "C5", "C6", "C7", "C8"] {
        let c: Vec<f64> = factors.iter().map(|&f| r.cost(st, f).unwrap()).collect();
        if c.windows(2).any(|w| w[0] > w[1] + 1e-8 * (1.0 + w[1].abs())) {
            bad.push(format!("{st} across factors: {c:?}"));
        }
    }
    let savings: Vec<f64> = factors.iter().map(|&f| 100.0 * r.savings(f).unwrap_or(0.0)).collect();
    Outcome::check(
        bad.is_empty() && savings.iter().all(|&s| s > 0.0),
        format!(
            "grand coalition saves {:.2}%, {:.2}%, {:.2}% at factors 1.0, 0.5, 0.2{}",
            savings[0],
            savings[1],
            savings[2],
            list(&bad)
        ),
    )
}

fn placement() -> Outcome {
    let nodes = vec!["2".to_string(), "3".to_string()];
    let r = run_placement(&fixture("placement_3bus.json"), "dn", &nodes, PricingScheme::PayAsBid, &GameOptions::default())
        .unwrap();
    let (a, b) = (r.cost_at("2").unwrap(), r.cost_at("3").unwrap());
    let diff = (a - b).abs() / a.abs().max(b.abs());
    Outcome::check(diff > 0.01, format!("clone at 2 costs {a:.2}, at 3 costs {b:.2}, difference {:.2}%", 100.0 * diff))
}

fn flexcoop(dir: &Path, args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_flexcoop"))
        .arg("--out")
        .arg(dir)
        .args(args)
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn determinism() -> Outcome {
    let root = tempfile::tempdir().unwrap();
    let gen = root.path().join("gen");
    if !flexcoop(&gen, &["generate", "--small", "--seed", "5"]) {
        return Outcome::check(false, "generate failed");
    }
    let scenario = gen.join("scenario.json");
    let s = scenario.to_str().unwrap();
    let runs: Vec<_> = ["a", "b"].iter().map(|r| root.path().join(r)).collect();
    for dir in &runs {
        let ok = flexcoop(dir, &["--scenario", s, "--seed", "5", "game"])
            && flexcoop(dir, &["--scenario", s, "--seed", "5", "allocate", "--factors", "1.0,0.5"]);
        if !ok {
            return Outcome::check(false, "game or allocate failed");
        }
    }
    let mut names: Vec<String> = std::fs::read_dir(&runs[0])
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    let differ: Vec<String> = names
        .iter()
        .filter(|n| std::fs::read(runs[0].join(n)).ok() != std::fs::read(runs[1].join(n)).ok())
        .cloned()
        .collect();
    Outcome::check(
        differ.is_empty() && names.len() >= 5,
        format!("{} report files compared ({}){}", names.len(), names.join(", "), list(&differ)),
    )
}

fn main() {
    let games = games();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("LP engine soundness", Box::new(lp_engine)),
        ("market micro-fixtures", Box::new(market_fixtures)),
        ("game structure", Box::new(game_structure)),
        ("allocation exactness", Box::new(reference_table)),
        ("oracle equivalence", Box::new(oracle_equivalence)),
        ("stability of mechanisms", Box::new(move || stability(&games))),
        ("axiom suite", Box::new(axiom_suite)),
        ("trend reproduction", Box::new(trend)),
        ("placement study", Box::new(placement)),
        ("determinism", Box::new(determinism)),
    ];
    let mut unexpected = 0;
    let mut passed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let o = run();
        let secs = t.elapsed().as_secs_f64();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        let note = if o.documented { " [documented exception]" } else { "" };
        println!("criterion {:>2} {name}: {verdict}{note} ({}) [{secs:.2}s]", k + 1, o.detail);
        if o.pass {
            passed += 1;
        } else if !o.documented {
            unexpected += 1;
        }
    }
    println!("acceptance: {passed}/{} criteria pass, {unexpected} unexpected failures", criteria.len());
    if unexpected > 0 {
        std::process::exit(1);
    }
}
