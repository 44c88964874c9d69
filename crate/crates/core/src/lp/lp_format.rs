//! CPLEX LP text output, handy for cross-checking with external solvers.

use std::fmt::Write;

use super::LpProblem;

fn ident(label: &str) -> String {
    let mut s: String = label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "_.".contains(c) { c } else { '_' })
        .collect();
    if s.chars().next().is_none_or(|c| c.is_ascii_digit() || c == '.') {
        s.insert(0, '_');
    }
    s
}

fn num(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}

fn linear(out: &mut String, names: &[String], coeffs: impl Iterator<Item = (usize, f64)>) {
    let mut first = true;
    let mut wrote = 0;
    for (j, a) in coeffs {
        if a == 0.0 {
            continue;
        }
        let sign = if a < 0.0 { "-" } else { "+" };
        if first && a >= 0.0 {
            let _ = write!(out, " {} {}", num(a), names[j]);
        } else {
            let _ = write!(out, " {} {} {}", sign, num(a.abs()), names[j]);
        }
        first = false;
        wrote += 1;
        if wrote % 8 == 0 {
            out.push_str("\n  ");
        }
    }
    if first {
        out.push_str(" 0");
    }
}

pub fn write_lp_format(p: &LpProblem) -> String {
    let names: Vec<String> = p.var_labels.iter().map(|l| ident(l)).collect();
    let mut out = String::new();
    let _ = writeln!(out, "\\ Problem: {}", p.name);
    out.push_str("Minimize\n obj:");
    linear(&mut out, &names, p.cost.iter().copied().enumerate());
    out.push_str("\nSubject To\n");
    for c in &p.ineq {
        let _ = write!(out, " {}:", ident(&c.label));
        linear(&mut out, &names, c.coeffs.iter().copied());
        let _ = writeln!(out, " <= {}", num(c.rhs));
    }
    for c in &p.eq {
        let _ = write!(out, " {}:", ident(&c.label));
        linear(&mut out, &names, c.coeffs.iter().copied());
        let _ = writeln!(out, " = {}", num(c.rhs));
    }
    out.push_str("Bounds\n");
    for (j, name) in names.iter().enumerate() {
        let (l, u) = (p.lower[j], p.upper[j]);
        if l == f64::NEG_INFINITY && u == f64::INFINITY {
            let _ = writeln!(out, " {name} free");
        } else if l == u {
            let _ = writeln!(out, " {name} = {}", num(l));
        } else {
            let _ = writeln!(out, " {} <= {name} <= {}", num(l), num(u));
        }
    }
    out.push_str("End\n");
    out
}
