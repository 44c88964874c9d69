mod common;

use approx::assert_abs_diff_eq;
use flexcoop::lp::{dual_objective, solve_lp, LpProblem, LpStatus};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{complementary_slackness, random_lp, vertex_enumeration};

#[test]
fn lower_bound_is_active() {
    let mut p = LpProblem::new("t");
    let x = p.add_var("x", 1.0, f64::NEG_INFINITY, f64::INFINITY);
    p.add_ge("x>=3", vec![(x, 1.0)], 3.0);
    let s = solve_lp(&p).unwrap();
    assert_abs_diff_eq!(s.x[0], 3.0, epsilon = 1e-12);
    assert_abs_diff_eq!(s.objective, 3.0, epsilon = 1e-12);
    // the ≥ row is stored negated, its multiplier is the unit marginal cost
    assert_abs_diff_eq!(s.ineq_duals[0], 1.0, epsilon = 1e-12);
}

#[test]
fn upper_row_is_active() {
    let mut p = LpProblem::new("t");
    let x = p.add_var("x", -1.0, 0.0, f64::INFINITY);
    p.add_le("x<=5", vec![(x, 1.0)], 5.0);
    let s = solve_lp(&p).unwrap();
    assert_abs_diff_eq!(s.x[0], 5.0, epsilon = 1e-12);
    assert_abs_diff_eq!(s.ineq_duals[0], 1.0, epsilon = 1e-12);
}

#[test]
fn three_by_three_matches_vertex_enumeration() {
    let mut p = LpProblem::new("t");
    let x: Vec<usize> = (0..3).map(|j| p.add_var(format!("x{j}"), [-2.0, -3.0, -1.0][j], 0.0, 10.0)).collect();
    p.add_le("a", vec![(x[0], 1.0), (x[1], 1.0), (x[2], 1.0)], 8.0);
    p.add_le("b", vec![(x[0], 2.0), (x[1], 1.0)], 10.0);
    p.add_le("c", vec![(x[1], 1.0), (x[2], 3.0)], 9.0);
    let s = solve_lp(&p).unwrap();
    let oracle = vertex_enumeration(&p).unwrap();
    assert_abs_diff_eq!(s.objective, oracle, epsilon = 1e-9);
}

#[test]
fn hand_solved_duals() {
    // min x + 2y  s.t. x + y ≥ 4, x − y ≤ 2, x,y ≥ 0
    // optimum at x = 3, y = 1, objective 5; the dual of
    // max 4a − 2b s.t. a − b ≤ 1, a + b ≤ 2 gives a = 1.5, b = 0.5.
    let mut p = LpProblem::new("t");
    let x = p.add_var("x", 1.0, 0.0, f64::INFINITY);
    let y = p.add_var("y", 2.0, 0.0, f64::INFINITY);
    p.add_ge("sum", vec![(x, 1.0), (y, 1.0)], 4.0);
    p.add_le("diff", vec![(x, 1.0), (y, -1.0)], 2.0);
    let s = solve_lp(&p).unwrap();
    assert_abs_diff_eq!(s.objective, 5.0, epsilon = 1e-10);
    assert_abs_diff_eq!(s.ineq_duals[0], 1.5, epsilon = 1e-10);
    assert_abs_diff_eq!(s.ineq_duals[1], 0.5, epsilon = 1e-10);
    assert_abs_diff_eq!(dual_objective(&p, &s).unwrap(), 4.0 * 1.5 - 2.0 * 0.5, epsilon = 1e-10);
}

#[test]
fn infeasible_is_reported() {
    let mut p = LpProblem::new("t");
    let x = p.add_var("x", 1.0, 0.0, 1.0);
    p.add_ge("x>=2", vec![(x, 1.0)], 2.0);
    let s = solve_lp(&p).unwrap();
    assert_eq!(s.status, LpStatus::Infeasible);
    assert!(dual_objective(&p, &s).is_err());
}

#[test]
fn solver_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10 {
        let p = random_lp(&mut rng, 8, 6, 2);
        assert_eq!(solve_lp(&p).unwrap(), solve_lp(&p).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn strong_duality_and_slackness(seed in any::<u64>(), n in 2usize..=20, m in 0usize..=12, e in 0usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_lp(&mut rng, n, m, e.min(n));
        let s = solve_lp(&p).unwrap();
        prop_assert_eq!(s.status, LpStatus::Optimal);
        let g = dual_objective(&p, &s).unwrap();
        prop_assert!((s.objective - g).abs() <= 1e-8 * (1.0 + s.objective.abs()));
        prop_assert!(complementary_slackness(&p, &s) <= 1e-8);
        prop_assert!(s.ineq_duals.iter().all(|&l| l >= -1e-9));
        prop_assert!(p.max_violation(&s.x) <= 1e-8);
    }

    #[test]
    fn optimum_matches_vertex_oracle(seed in any::<u64>(), n in 2usize..=5, m in 1usize..=5, e in 0usize..=2) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_lp(&mut rng, n, m, e.min(n - 1));
        let s = solve_lp(&p).unwrap();
        let oracle = vertex_enumeration(&p).unwrap();
        prop_assert!((s.objective - oracle).abs() <= 1e-8 * (1.0 + oracle.abs()));
    }

    #[test]
    fn cost_scaling_is_covariant(seed in any::<u64>(), k in 0.1f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_lp(&mut rng, 6, 5, 1);
        let a = solve_lp(&p).unwrap();
        let b = solve_lp(&p.scaled_cost(k)).unwrap();
        prop_assert!((b.objective - k * a.objective).abs() <= 1e-8 * (1.0 + b.objective.abs()));
    }
}
