//! Linear programs in the canonical form
//!
//! ```text
//!     min  cᵀx
//!     s.t. A x ≤ d        (λ ≥ 0)
//!          E x = b        (μ free)
//!          l ≤ x ≤ u
//! ```
//!
//! and a bounded-variable revised simplex solver that returns the primal
//! optimum together with the Lagrange multipliers of every row and bound.
//!
//! Dual convention: the Lagrangian is
//! `L = cᵀx + λᵀ(Ax − d) + μᵀ(Ex − b) − rᵀx` where `r = c + Aᵀλ + Eᵀμ` is the
//! vector of reduced costs (bound multipliers). At an optimum `r_j ≥ 0` when
//! `x_j` sits at its lower bound and `r_j ≤ 0` at its upper bound. The shadow
//! price of a right-hand side (∂ objective / ∂ rhs) is therefore `−λ_i` or
//! `−μ_k`.

mod lp_format;
mod simplex;

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use lp_format::write_lp_format;
pub use simplex::{solve_lp, solve_lp_with, SolverOptions};

/// Tolerance used for the reported optimality conditions.
pub const REPORT_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum LpError {
    #[error("invalid problem: {0}")]
    Invalid(String),
    #[error("simplex stopped after {iterations} iterations without converging")]
    IterationLimit {
        iterations: usize,
        best: Box<LpSolution>,
    },
    #[error("singular basis encountered during refactorization")]
    SingularBasis,
    #[error("dual objective requires an optimal solution, got {0:?}")]
    NotOptimal(LpStatus),
}

/// One sparse row `Σ coeffs·x (≤|=) rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub label: String,
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * x[j]).sum()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LpProblem {
    pub name: String,
    pub cost: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub var_labels: Vec<String>,
    /// Rows of `A x ≤ d`.
    pub ineq: Vec<Constraint>,
    /// Rows of `E x = b`.
    pub eq: Vec<Constraint>,
    #[serde(skip)]
    var_index: HashMap<String, usize>,
    #[serde(skip)]
    ineq_index: HashMap<String, usize>,
    #[serde(skip)]
    eq_index: HashMap<String, usize>,
}

impl LpProblem {
    pub fn new(name: impl Into<String>) -> Self {
        LpProblem {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn num_vars(&self) -> usize {
        self.cost.len()
    }

    /// Adds a variable and returns its column index. Labels must be unique.
    pub fn add_var(&mut self, label: impl Into<String>, cost: f64, lower: f64, upper: f64) -> usize {
        let label = label.into();
        let idx = self.cost.len();
        self.cost.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.var_index.insert(label.clone(), idx);
        self.var_labels.push(label);
        idx
    }

    /// Adds `Σ coeffs·x ≤ rhs` and returns the inequality row index.
    pub fn add_le(&mut self, label: impl Into<String>, coeffs: Vec<(usize, f64)>, rhs: f64) -> usize {
        let label = label.into();
        let idx = self.ineq.len();
        self.ineq_index.insert(label.clone(), idx);
        self.ineq.push(Constraint { label, coeffs, rhs });
        idx
    }

    /// Adds `Σ coeffs·x ≥ rhs`, stored as the negated `≤` row.
    pub fn add_ge(&mut self, label: impl Into<String>, coeffs: Vec<(usize, f64)>, rhs: f64) -> usize {
        let neg = coeffs.into_iter().map(|(j, a)| (j, -a)).collect();
        self.add_le(label, neg, -rhs)
    }

    pub fn add_eq(&mut self, label: impl Into<String>, coeffs: Vec<(usize, f64)>, rhs: f64) -> usize {
        let label = label.into();
        let idx = self.eq.len();
        self.eq_index.insert(label.clone(), idx);
        self.eq.push(Constraint { label, coeffs, rhs });
        idx
    }

    pub fn var(&self, label: &str) -> Option<usize> {
        self.var_index.get(label).copied()
    }

    pub fn ineq_row(&self, label: &str) -> Option<usize> {
        self.ineq_index.get(label).copied()
    }

    pub fn eq_row(&self, label: &str) -> Option<usize> {
        self.eq_index.get(label).copied()
    }

    /// Rebuilds the label lookup tables (needed after deserialization).
    pub fn reindex(&mut self) {
        self.var_index = self
            .var_labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), i))
            .collect();
        self.ineq_index = self
            .ineq
            .iter()
            .enumerate()
            .map(|(i, c)| (c.label.clone(), i))
            .collect();
        self.eq_index = self
            .eq
            .iter()
            .enumerate()
            .map(|(i, c)| (c.label.clone(), i))
            .collect();
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.cost.len();
        if self.lower.len() != n || self.upper.len() != n || self.var_labels.len() != n {
            return Err(LpError::Invalid("vector dimensions disagree".into()));
        }
        for j in 0..n {
            if !self.cost[j].is_finite() {
                return Err(LpError::Invalid(format!("non-finite cost on {}", self.var_labels[j])));
            }
            if self.lower[j].is_nan() || self.upper[j].is_nan() || self.lower[j] > self.upper[j] {
                return Err(LpError::Invalid(format!(
                    "bad bounds [{}, {}] on {}",
                    self.lower[j], self.upper[j], self.var_labels[j]
                )));
            }
            if self.lower[j] == f64::INFINITY || self.upper[j] == f64::NEG_INFINITY {
                return Err(LpError::Invalid(format!("empty bound range on {}", self.var_labels[j])));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for l in &self.var_labels {
            if !seen.insert(l.as_str()) {
                return Err(LpError::Invalid(format!("duplicate variable label {l}")));
            }
        }
        seen.clear();
        for c in self.ineq.iter().chain(self.eq.iter()) {
            if !seen.insert(c.label.as_str()) {
                return Err(LpError::Invalid(format!("duplicate constraint label {}", c.label)));
            }
            if !c.rhs.is_finite() {
                return Err(LpError::Invalid(format!("non-finite rhs on {}", c.label)));
            }
            for &(j, a) in &c.coeffs {
                if j >= n || !a.is_finite() {
                    return Err(LpError::Invalid(format!("bad coefficient in {}", c.label)));
                }
            }
        }
        Ok(())
    }

    /// Multiplies the objective by `k`, leaving the feasible set untouched.
    pub fn scaled_cost(&self, k: f64) -> LpProblem {
        let mut p = self.clone();
        p.cost.iter_mut().for_each(|c| *c *= k);
        p
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.cost.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest violation of any row or bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for c in &self.ineq {
            worst = worst.max(c.activity(x) - c.rhs);
        }
        for c in &self.eq {
            worst = worst.max((c.activity(x) - c.rhs).abs());
        }
        for j in 0..x.len() {
            worst = worst.max(self.lower[j] - x[j]).max(x[j] - self.upper[j]);
        }
        worst
    }

    /// `c + Aᵀλ + Eᵀμ`.
    pub fn reduced_costs(&self, ineq_duals: &[f64], eq_duals: &[f64]) -> Vec<f64> {
        let mut r = self.cost.clone();
        for (c, &l) in self.ineq.iter().zip(ineq_duals) {
            if l != 0.0 {
                for &(j, a) in &c.coeffs {
                    r[j] += l * a;
                }
            }
        }
        for (c, &m) in self.eq.iter().zip(eq_duals) {
            if m != 0.0 {
                for &(j, a) in &c.coeffs {
                    r[j] += m * a;
                }
            }
        }
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

impl fmt::Display for LpStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            LpStatus::Optimal => "optimal",
            LpStatus::Infeasible => "infeasible",
            LpStatus::Unbounded => "unbounded",
        };
        f.write_str(s)
    }
}

/// Multipliers `(λ ≥ 0, μ)` proving infeasibility:
/// `min_{l≤x≤u} λᵀ(Ax − d) + μᵀ(Ex − b) > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FarkasCertificate {
    pub ineq: Vec<f64>,
    pub eq: Vec<f64>,
}

impl FarkasCertificate {
    /// Returns the certified margin; a strictly positive value proves the
    /// problem infeasible. `None` if the multipliers are not a valid ray
    /// (negative λ, or an unbounded direction in the bound box).
    pub fn margin(&self, p: &LpProblem) -> Option<f64> {
        if self.ineq.iter().any(|&l| l < -1e-9) {
            return None;
        }
        let r = p.reduced_costs(&self.ineq, &self.eq);
        // the objective is not part of the certificate
        let r: Vec<f64> = r.iter().zip(&p.cost).map(|(a, c)| a - c).collect();
        let scale = self
            .ineq
            .iter()
            .chain(self.eq.iter())
            .fold(1.0f64, |m, v| m.max(v.abs()));
        let mut lo = 0.0;
        for j in 0..r.len() {
            let rj = r[j];
            if rj.abs() <= 1e-9 * scale {
                continue;
            }
            let bound = if rj > 0.0 { p.lower[j] } else { p.upper[j] };
            if !bound.is_finite() {
                return None;
            }
            lo += rj * bound;
        }
        let rhs: f64 = p.ineq.iter().zip(&self.ineq).map(|(c, l)| c.rhs * l).sum::<f64>()
            + p.eq.iter().zip(&self.eq).map(|(c, m)| c.rhs * m).sum::<f64>();
        Some(lo - rhs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    /// λ for the `≤` rows, Lagrangian sign (non-negative at optimum).
    pub ineq_duals: Vec<f64>,
    /// μ for the equality rows.
    pub eq_duals: Vec<f64>,
    /// Bound multipliers `r = c + Aᵀλ + Eᵀμ`.
    pub reduced_costs: Vec<f64>,
    pub iterations: usize,
    pub farkas: Option<FarkasCertificate>,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    pub fn value(&self, p: &LpProblem, label: &str) -> Option<f64> {
        p.var(label).map(|j| self.x[j])
    }
}

/// Evaluates the Lagrangian dual function at the returned multipliers:
/// `g(λ, μ) = −λᵀd − μᵀb + Σ_j min_{l_j ≤ x_j ≤ u_j} r_j x_j`.
pub fn dual_objective(p: &LpProblem, s: &LpSolution) -> Result<f64, LpError> {
    if s.status != LpStatus::Optimal {
        return Err(LpError::NotOptimal(s.status));
    }
    Ok(dual_terms(p, s).total())
}

/// The dual objective split into its row and bound contributions.
#[derive(Debug, Clone)]
pub struct DualTerms {
    /// `−λ_i d_i` per inequality row.
    pub ineq: Vec<f64>,
    /// `−μ_k b_k` per equality row.
    pub eq: Vec<f64>,
    /// `r_j · (active bound)` per variable.
    pub bounds: Vec<f64>,
}

impl DualTerms {
    pub fn total(&self) -> f64 {
        self.ineq.iter().sum::<f64>() + self.eq.iter().sum::<f64>() + self.bounds.iter().sum::<f64>()
    }
}

pub fn dual_terms(p: &LpProblem, s: &LpSolution) -> DualTerms {
    let ineq = p
        .ineq
        .iter()
        .zip(&s.ineq_duals)
        .map(|(c, l)| -l * c.rhs)
        .collect();
    let eq = p.eq.iter().zip(&s.eq_duals).map(|(c, m)| -m * c.rhs).collect();
    let bounds = s
        .reduced_costs
        .iter()
        .enumerate()
        .map(|(j, &r)| bound_term(r, p.lower[j], p.upper[j], s.x[j]))
        .collect();
    DualTerms { ineq, eq, bounds }
}

fn bound_term(r: f64, lo: f64, up: f64, x: f64) -> f64 {
    if r > 0.0 {
        if lo.is_finite() {
            r * lo
        } else {
            r * x
        }
    } else if r < 0.0 {
        if up.is_finite() {
            r * up
        } else {
            r * x
        }
    } else {
        0.0
    }
}
