#![allow(dead_code)]

use flexcoop::game::GameTable;
use flexcoop::lp::{LpProblem, LpSolution};
use flexcoop::scenario::{generate_scenario, load_scenario, GeneratorConfig, GeneratorKind, Scenario};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

pub fn fixture(name: &str) -> Scenario {
    let path = format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    load_scenario(&std::fs::read_to_string(&path).unwrap()).unwrap()
}

pub fn small(seed: u64) -> Scenario {
    generate_scenario(&GeneratorConfig { kind: GeneratorKind::Small, seed })
}

/// Random LP with a finite box and a known interior-ish point, so it is
/// always feasible and bounded. Coefficients sit on a 0.5 grid, which
/// produces ties and degenerate vertices now and then.
pub fn random_lp(rng: &mut impl Rng, n: usize, m_ineq: usize, m_eq: usize) -> LpProblem {
    let mut p = LpProblem::new("random");
    let x0: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
    for (j, &x) in x0.iter().enumerate() {
        let c = (rng.gen_range(-6..=6) as f64) * 0.5;
        p.add_var(format!("x{j}"), c, x - rng.gen_range(0.5..2.0), x + rng.gen_range(0.5..2.0));
    }
    let row = |rng: &mut dyn rand::RngCore| -> Vec<(usize, f64)> {
        (0..n)
            .filter_map(|j| {
                let a = (rng.gen_range(-6..=6) as f64) * 0.5;
                (a != 0.0).then_some((j, a))
            })
            .collect()
    };
    for i in 0..m_ineq {
        let coeffs = row(rng);
        let act: f64 = coeffs.iter().map(|&(j, a)| a * x0[j]).sum();
        let slack = if rng.gen_bool(0.2) { 0.0 } else { rng.gen_range(0.0..1.5) };
        p.add_le(format!("r{i}"), coeffs, act + slack);
    }
    for k in 0..m_eq {
        let mut coeffs = row(rng);
        if coeffs.is_empty() {
            coeffs.push((k % n, 1.0));
        }
        let act: f64 = coeffs.iter().map(|&(j, a)| a * x0[j]).sum();
        p.add_eq(format!("e{k}"), coeffs, act);
    }
    p
}

fn dense(c: &[(usize, f64)], n: usize) -> Vec<f64> {
    let mut r = vec![0.0; n];
    for &(j, a) in c {
        r[j] += a;
    }
    r
}

/// Minimum over all basic feasible solutions: every choice of `n`
/// linearly independent active constraints (equalities always active)
/// is solved and kept if feasible. Requires finite bounds.
pub fn vertex_enumeration(p: &LpProblem) -> Option<f64> {
    let n = p.num_vars();
    let mut cands: Vec<(Vec<f64>, f64)> = Vec::new();
    for r in &p.ineq {
        cands.push((dense(&r.coeffs, n), r.rhs));
    }
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        cands.push((e.clone(), p.lower[j]));
        cands.push((e, p.upper[j]));
    }
    let eqs: Vec<(Vec<f64>, f64)> = p.eq.iter().map(|r| (dense(&r.coeffs, n), r.rhs)).collect();
    if eqs.len() > n {
        return None;
    }
    let k = n - eqs.len();
    let mut best: Option<f64> = None;
    let mut pick = Vec::with_capacity(k);
    combos(cands.len(), k, 0, &mut pick, &mut |idx| {
        let rows: Vec<&(Vec<f64>, f64)> = eqs.iter().chain(idx.iter().map(|&i| &cands[i])).collect();
        let a = DMatrix::from_fn(n, n, |i, j| rows[i].0[j]);
        let b = DVector::from_iterator(n, rows.iter().map(|r| r.1));
        let lu = a.lu();
        if lu.determinant().abs() < 1e-9 {
            return;
        }
        let Some(x) = lu.solve(&b) else { return };
        let x: Vec<f64> = x.iter().copied().collect();
        if p.max_violation(&x) <= 1e-7 {
            let obj = p.objective(&x);
            best = Some(best.map_or(obj, |b: f64| b.min(obj)));
        }
    });
    best
}

fn combos(m: usize, k: usize, start: usize, pick: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
    if pick.len() == k {
        f(pick);
        return;
    }
    for i in start..m {
        if m - i < k - pick.len() {
            break;
        }
        pick.push(i);
        combos(m, k, i + 1, pick, f);
        pick.pop();
    }
}

/// Largest |multiplier × slack| over rows and bounds.
pub fn complementary_slackness(p: &LpProblem, s: &LpSolution) -> f64 {
    let mut worst: f64 = 0.0;
    for (r, l) in p.ineq.iter().zip(&s.ineq_duals) {
        worst = worst.max((l * (r.rhs - r.activity(&s.x))).abs());
    }
    for j in 0..p.num_vars() {
        let r = s.reduced_costs[j];
        let gap = if r > 0.0 { s.x[j] - p.lower[j] } else { p.upper[j] - s.x[j] };
        if gap.is_finite() {
            worst = worst.max((r * gap).abs());
        }
    }
    worst
}

/// Shapley value as the average marginal cost over all orderings.
pub fn shapley_by_permutations(g: &GameTable) -> Vec<f64> {
    let n = g.n();
    let mut order: Vec<usize> = (0..n).collect();
    let mut acc = vec![0.0; n];
    let mut count = 0usize;
    permute(&mut order, 0, &mut |perm| {
        let mut c = 0u32;
        for &i in perm {
            acc[i] += g.v(c | 1 << i) - g.v(c);
            c |= 1 << i;
        }
        count += 1;
    });
    acc.iter().map(|a| a / count as f64).collect()
}

fn permute(v: &mut Vec<usize>, k: usize, f: &mut dyn FnMut(&[usize])) {
    if k == v.len() {
        f(v);
        return;
    }
    for i in k..v.len() {
        v.swap(k, i);
        permute(v, k + 1, f);
        v.swap(k, i);
    }
}

/// Raw Banzhaf value from an explicit list of member sets.
pub fn banzhaf_by_subsets(g: &GameTable) -> Vec<f64> {
    let n = g.n();
    (0..n)
        .map(|i| {
            let others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            let mut total = 0.0;
            for pick in 0..1usize << others.len() {
                let set: Vec<usize> = others.iter().enumerate().filter(|(b, _)| pick >> b & 1 == 1).map(|(_, &j)| j).collect();
                let without: u32 = set.iter().map(|&j| 1u32 << j).sum();
                total += g.v(without | 1 << i) - g.v(without);
            }
            total / (1usize << others.len()) as f64
        })
        .collect()
}

pub fn random_table(rng: &mut impl Rng, n: usize) -> GameTable {
    let vals: Vec<f64> = (0..1u32 << n).map(|c| if c == 0 { 0.0 } else { rng.gen_range(-50.0..150.0) }).collect();
    GameTable::from_fn(n, |c| vals[c as usize])
}

/// Concave function of an additive weight plus a modular part: a
/// submodular cost game with non-negative stand-alone costs.
pub fn random_submodular(rng: &mut impl Rng, n: usize) -> GameTable {
    let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..5.0)).collect();
    let b: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..3.0)).collect();
    let scale = rng.gen_range(1.0..20.0);
    GameTable::from_fn(n, move |c| {
        let (sw, sb) = (0..n).filter(|i| c >> i & 1 == 1).fold((0.0, 0.0), |(x, y), i| (x + w[i], y + b[i]));
        scale * sw.sqrt() + sb
    })
}

/// Relabelled game: new player `k` is old player `perm[k]`.
pub fn permute_table(g: &GameTable, perm: &[usize]) -> GameTable {
    let n = g.n();
    let values = (0..1u32 << n)
        .map(|c| {
            let old = (0..n).filter(|k| c >> k & 1 == 1).fold(0u32, |m, k| m | 1 << perm[k]);
            g.v(old)
        })
        .collect();
    let players = perm.iter().map(|&i| g.players[i].clone()).collect();
    GameTable::from_values(players, g.scheme, values).unwrap()
}

pub fn shuffled(rng: &mut impl Rng, n: usize) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

pub fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * (1.0 + x.abs().max(y.abs())))
}
