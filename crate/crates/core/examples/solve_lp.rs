//! Solves a small production-planning LP and prints the primal, the
//! multipliers and the LP-format dump.

use flexcoop::lp::{dual_objective, solve_lp, write_lp_format, LpProblem};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // max 3a + 5b  s.t. a ≤ 4, 2b ≤ 12, 3a + 2b ≤ 18
    let mut p = LpProblem::new("wyndor");
    let a = p.add_var("a", -3.0, 0.0, f64::INFINITY);
    let b = p.add_var("b", -5.0, 0.0, f64::INFINITY);
    p.add_le("plant1", vec![(a, 1.0)], 4.0);
    p.add_le("plant2", vec![(b, 2.0)], 12.0);
    p.add_le("plant3", vec![(a, 3.0), (b, 2.0)], 18.0);

    let s = solve_lp(&p)?;
    println!("status {}  objective {:.4}", s.status, s.objective);
    println!("x = {:?}", s.x);
    for (row, l) in p.ineq.iter().zip(&s.ineq_duals) {
        println!("  {:<8} multiplier {l:.4}", row.label);
    }
    println!("dual objective {:.4}", dual_objective(&p, &s)?);
    print!("\n{}", write_lp_format(&p));
    Ok(())
}
