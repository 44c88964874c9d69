//! Bounded-variable revised simplex with a dense explicit basis inverse.
//!
//! Every row gets a logical column: a slack in `[0, ∞)` for `≤` rows and an
//! artificial fixed at `[0, 0]` for equalities, so the starting basis is the
//! identity. Phase 1 minimises the sum of basic infeasibilities (costs are
//! recomputed every iteration), phase 2 the true objective. Inequality rows
//! can be generated lazily: the relaxation is solved first and violated rows
//! are appended with their slack basic, keeping the current basis.

use nalgebra::DMatrix;

use super::{FarkasCertificate, LpError, LpProblem, LpSolution, LpStatus};

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub max_iterations: Option<usize>,
    /// `None` picks lazy row generation for problems with many `≤` rows.
    pub row_generation: Option<bool>,
    /// Non-improving iterations before switching to Bland's rule.
    pub stall_limit: usize,
    pub feas_tol: f64,
    pub opt_tol: f64,
    pub pivot_tol: f64,
    /// Iterations between residual checks of the basis inverse.
    pub check_every: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iterations: None,
            row_generation: None,
            stall_limit: 50,
            feas_tol: 1e-9,
            opt_tol: 1e-9,
            pivot_tol: 1e-9,
            check_every: 100,
        }
    }
}

const LAZY_THRESHOLD: usize = 64;

pub fn solve_lp(p: &LpProblem) -> Result<LpSolution, LpError> {
    solve_lp_with(p, &SolverOptions::default())
}

pub fn solve_lp_with(p: &LpProblem, opts: &SolverOptions) -> Result<LpSolution, LpError> {
    p.validate()?;
    let lazy = opts
        .row_generation
        .unwrap_or(p.ineq.len() > LAZY_THRESHOLD);
    let mut w = Work::new(p, opts);
    let mut srcs: Vec<RowSrc> = (0..p.eq.len()).map(RowSrc::Eq).collect();
    if !lazy {
        srcs.extend((0..p.ineq.len()).map(RowSrc::Ineq));
    }
    w.add_rows(&srcs);

    let max_iter = opts
        .max_iterations
        .unwrap_or(100_000 + 50 * (p.num_vars() + p.eq.len() + p.ineq.len()));

    loop {
        let outcome = w.run(max_iter)?;
        match outcome {
            Outcome::Optimal => {
                let violated = w.violated_inactive();
                if violated.is_empty() {
                    return Ok(w.optimal_solution());
                }
                log::trace!("adding {} violated rows", violated.len());
                w.add_rows(&violated);
            }
            Outcome::Unbounded => {
                let rest = w.inactive();
                if rest.is_empty() {
                    return Ok(w.plain_solution(LpStatus::Unbounded, None));
                }
                w.add_rows(&rest);
            }
            Outcome::Infeasible(cert) => {
                return Ok(w.plain_solution(LpStatus::Infeasible, Some(cert)));
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum RowSrc {
    Eq(usize),
    Ineq(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum State {
    Basic,
    Lower,
    Upper,
    Free,
}

enum Outcome {
    Optimal,
    Unbounded,
    Infeasible(FarkasCertificate),
}

struct Leave {
    /// Basis position, `None` for a bound flip of the entering column.
    pos: Option<usize>,
    to_upper: bool,
    step: f64,
}

const NONE: usize = usize::MAX;

struct Work<'a> {
    p: &'a LpProblem,
    opts: &'a SolverOptions,
    n: usize,
    m: usize,
    rows: Vec<RowSrc>,
    rhs: Vec<f64>,
    active_ineq: Vec<bool>,
    /// Structural columns restricted to the working rows.
    cols: Vec<Vec<(usize, f64)>>,
    lo: Vec<f64>,
    up: Vec<f64>,
    cost: Vec<f64>,
    x: Vec<f64>,
    state: Vec<State>,
    basis: Vec<usize>,
    pos: Vec<usize>,
    binv: Vec<f64>,
    iterations: usize,
    since_check: usize,
}

impl<'a> Work<'a> {
    fn new(p: &'a LpProblem, opts: &'a SolverOptions) -> Self {
        let n = p.num_vars();
        let mut x = Vec::with_capacity(n);
        let mut state = Vec::with_capacity(n);
        for j in 0..n {
            let (l, u) = (p.lower[j], p.upper[j]);
            if l.is_finite() {
                x.push(l);
                state.push(State::Lower);
            } else if u.is_finite() {
                x.push(u);
                state.push(State::Upper);
            } else {
                x.push(0.0);
                state.push(State::Free);
            }
        }
        Work {
            p,
            opts,
            n,
            m: 0,
            rows: Vec::new(),
            rhs: Vec::new(),
            active_ineq: vec![false; p.ineq.len()],
            cols: vec![Vec::new(); n],
            lo: p.lower.clone(),
            up: p.upper.clone(),
            cost: p.cost.clone(),
            x,
            state,
            basis: Vec::new(),
            pos: vec![NONE; n],
            binv: Vec::new(),
            iterations: 0,
            since_check: 0,
        }
    }

    fn row_coeffs(&self, src: RowSrc) -> &'a [(usize, f64)] {
        match src {
            RowSrc::Eq(k) => &self.p.eq[k].coeffs,
            RowSrc::Ineq(i) => &self.p.ineq[i].coeffs,
        }
    }

    /// Appends rows with their logical column basic.
    fn add_rows(&mut self, srcs: &[RowSrc]) {
        if srcs.is_empty() {
            return;
        }
        let m0 = self.m;
        let m1 = m0 + srcs.len();
        let mut binv = vec![0.0; m1 * m1];
        for i in 0..m0 {
            binv[i * m1..i * m1 + m0].copy_from_slice(&self.binv[i * m0..(i + 1) * m0]);
        }
        for (k, &src) in srcs.iter().enumerate() {
            let r = m0 + k;
            let coeffs = self.row_coeffs(src);
            let (rhs, lo, up) = match src {
                RowSrc::Eq(e) => (self.p.eq[e].rhs, 0.0, 0.0),
                RowSrc::Ineq(i) => {
                    self.active_ineq[i] = true;
                    (self.p.ineq[i].rhs, 0.0, f64::INFINITY)
                }
            };
            let mut act = 0.0;
            for &(j, a) in coeffs {
                self.cols[j].push((r, a));
                act += a * self.x[j];
                let q = self.pos[j];
                if q != NONE {
                    for c in 0..m0 {
                        binv[r * m1 + c] -= a * self.binv[q * m0 + c];
                    }
                }
            }
            binv[r * m1 + r] = 1.0;
            self.rows.push(src);
            self.rhs.push(rhs);
            self.lo.push(lo);
            self.up.push(up);
            self.cost.push(0.0);
            self.x.push(rhs - act);
            self.state.push(State::Basic);
            self.pos.push(r);
            self.basis.push(self.n + r);
        }
        self.m = m1;
        self.binv = binv;
    }

    fn inactive(&self) -> Vec<RowSrc> {
        (0..self.p.ineq.len())
            .filter(|&i| !self.active_ineq[i])
            .map(RowSrc::Ineq)
            .collect()
    }

    fn violated_inactive(&self) -> Vec<RowSrc> {
        let xs = &self.x[..self.n];
        (0..self.p.ineq.len())
            .filter(|&i| !self.active_ineq[i])
            .filter(|&i| {
                let c = &self.p.ineq[i];
                c.activity(xs) - c.rhs > self.opts.feas_tol * (1.0 + c.rhs.abs())
            })
            .map(RowSrc::Ineq)
            .collect()
    }

    fn col_dot(&self, j: usize, y: &[f64]) -> f64 {
        if j < self.n {
            self.cols[j].iter().map(|&(r, a)| a * y[r]).sum()
        } else {
            y[j - self.n]
        }
    }

    /// `α = B⁻¹ a_j`.
    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut alpha = vec![0.0; m];
        if j < self.n {
            for &(r, a) in &self.cols[j] {
                for (i, al) in alpha.iter_mut().enumerate() {
                    *al += a * self.binv[i * m + r];
                }
            }
        } else {
            let r = j - self.n;
            for (i, al) in alpha.iter_mut().enumerate() {
                *al = self.binv[i * m + r];
            }
        }
        alpha
    }

    /// `yᵀ = c_Bᵀ B⁻¹` for the given basic costs.
    fn btran(&self, cb: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for (q, &c) in cb.iter().enumerate() {
            if c != 0.0 {
                let row = &self.binv[q * m..(q + 1) * m];
                for (yi, b) in y.iter_mut().zip(row) {
                    *yi += c * b;
                }
            }
        }
        y
    }

    fn tol_for(&self, j: usize, bound: f64) -> f64 {
        let _ = j;
        self.opts.feas_tol * (1.0 + bound.abs())
    }

    /// Phase-1 basic costs and total infeasibility.
    fn phase1_costs(&self) -> (Vec<f64>, f64) {
        let mut cb = vec![0.0; self.m];
        let mut total = 0.0;
        for (q, &b) in self.basis.iter().enumerate() {
            let v = self.x[b];
            if v < self.lo[b] - self.tol_for(b, self.lo[b]) {
                cb[q] = -1.0;
                total += self.lo[b] - v;
            } else if v > self.up[b] + self.tol_for(b, self.up[b]) {
                cb[q] = 1.0;
                total += v - self.up[b];
            }
        }
        (cb, total)
    }

    fn phase2_costs(&self) -> Vec<f64> {
        self.basis.iter().map(|&b| self.cost[b]).collect()
    }

    /// Picks an entering column and its direction (+1 increase, −1 decrease).
    fn price(&self, y: &[f64], phase1: bool, bland: bool) -> Option<(usize, f64)> {
        let tol = self.opts.opt_tol;
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = 0.0;
        for j in 0..self.n + self.m {
            let st = self.state[j];
            if st == State::Basic || self.lo[j] == self.up[j] {
                continue;
            }
            let c = if phase1 { 0.0 } else { self.cost[j] };
            let d = c - self.col_dot(j, y);
            let dir = match st {
                State::Lower if d < -tol => 1.0,
                State::Upper if d > tol => -1.0,
                State::Free if d.abs() > tol => -d.signum(),
                _ => continue,
            };
            if bland {
                return Some((j, dir));
            }
            if d.abs() > best_score {
                best_score = d.abs();
                best = Some((j, dir));
            }
        }
        best
    }

    /// Ratio test. `phase1` lets infeasible basics move until they reach
    /// the violated bound.
    fn ratio(&self, q: usize, dir: f64, alpha: &[f64], bland: bool) -> Option<Leave> {
        let ptol = self.opts.pivot_tol;
        // candidate: (pos, exact step, relaxed step, to_upper)
        let mut cands: Vec<(usize, f64, f64, bool)> = Vec::new();
        for (i, &a) in alpha.iter().enumerate() {
            if a.abs() <= ptol {
                continue;
            }
            let b = self.basis[i];
            let v = self.x[b];
            let (l, u) = (self.lo[b], self.up[b]);
            let rate = -dir * a;
            let tl = self.tol_for(b, l);
            let tu = self.tol_for(b, u);
            let target = if rate < 0.0 {
                if v > u + tu {
                    Some((u, true))
                } else if v < l - tl {
                    None
                } else if l.is_finite() {
                    Some((l, false))
                } else {
                    None
                }
            } else if v < l - tl {
                Some((l, false))
            } else if v > u + tu {
                None
            } else if u.is_finite() {
                Some((u, true))
            } else {
                None
            };
            if let Some((bound, to_upper)) = target {
                let exact = ((bound - v) / rate).max(0.0);
                let tol = if to_upper { tu } else { tl };
                let relaxed = ((bound - v) / rate).max(0.0) + tol / rate.abs();
                cands.push((i, exact, relaxed, to_upper));
            }
        }
        let flip = if self.lo[q].is_finite() && self.up[q].is_finite() {
            Some(self.up[q] - self.lo[q])
        } else {
            None
        };

        if cands.is_empty() {
            return flip.map(|s| Leave {
                pos: None,
                to_upper: dir > 0.0,
                step: s,
            });
        }

        let chosen = if bland {
            let tmin = cands.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
            let lim = tmin + 1e-12 * (1.0 + tmin);
            cands
                .iter()
                .filter(|c| c.1 <= lim)
                .min_by_key(|c| self.basis[c.0])
                .copied()
                .unwrap()
        } else {
            let th = cands.iter().map(|c| c.2).fold(f64::INFINITY, f64::min);
            let mut best = cands[0];
            let mut best_a = -1.0;
            for c in &cands {
                if c.1 <= th && alpha[c.0].abs() > best_a {
                    best_a = alpha[c.0].abs();
                    best = *c;
                }
            }
            best
        };
        if let Some(s) = flip {
            if s <= chosen.1 {
                return Some(Leave {
                    pos: None,
                    to_upper: dir > 0.0,
                    step: s,
                });
            }
        }
        Some(Leave {
            pos: Some(chosen.0),
            to_upper: chosen.3,
            step: chosen.1,
        })
    }

    fn pivot(&mut self, q: usize, dir: f64, alpha: &[f64], leave: &Leave) {
        let t = leave.step;
        self.x[q] += dir * t;
        for (i, &a) in alpha.iter().enumerate() {
            if a != 0.0 {
                let b = self.basis[i];
                self.x[b] -= dir * t * a;
            }
        }
        match leave.pos {
            None => {
                if leave.to_upper {
                    self.x[q] = self.up[q];
                    self.state[q] = State::Upper;
                } else {
                    self.x[q] = self.lo[q];
                    self.state[q] = State::Lower;
                }
            }
            Some(r) => {
                let b = self.basis[r];
                if leave.to_upper {
                    self.x[b] = self.up[b];
                    self.state[b] = State::Upper;
                } else {
                    self.x[b] = self.lo[b];
                    self.state[b] = State::Lower;
                }
                self.pos[b] = NONE;
                self.basis[r] = q;
                self.pos[q] = r;
                self.state[q] = State::Basic;
                self.update_inverse(r, alpha);
            }
        }
    }

    fn update_inverse(&mut self, r: usize, alpha: &[f64]) {
        let m = self.m;
        let ar = alpha[r];
        let mut prow: Vec<f64> = self.binv[r * m..(r + 1) * m].to_vec();
        for v in prow.iter_mut() {
            *v /= ar;
        }
        for (i, &a) in alpha.iter().enumerate() {
            if i == r || a == 0.0 {
                continue;
            }
            let row = &mut self.binv[i * m..(i + 1) * m];
            for (v, pr) in row.iter_mut().zip(&prow) {
                *v -= a * pr;
            }
        }
        self.binv[r * m..(r + 1) * m].copy_from_slice(&prow);
    }

    /// `rhs − A x` over all working columns.
    fn residual(&self) -> Vec<f64> {
        let mut res = self.rhs.clone();
        for j in 0..self.n {
            let v = self.x[j];
            if v != 0.0 {
                for &(r, a) in &self.cols[j] {
                    res[r] -= a * v;
                }
            }
        }
        for r in 0..self.m {
            res[r] -= self.x[self.n + r];
        }
        res
    }

    fn residual_norm(&self) -> f64 {
        let scale = self.rhs.iter().fold(1.0f64, |a, b| a.max(b.abs()));
        self.residual().iter().fold(0.0f64, |a, b| a.max(b.abs())) / scale
    }

    /// Rebuilds `B⁻¹` from scratch and recomputes the basic values.
    fn refactor(&mut self) -> Result<(), LpError> {
        let m = self.m;
        let n = self.n;
        // rows whose logical is nonbasic must be covered by basic structurals
        let mut row_slot = vec![NONE; m];
        let mut rs = Vec::new();
        for r in 0..m {
            if self.state[n + r] != State::Basic {
                row_slot[r] = rs.len();
                rs.push(r);
            }
        }
        let structs: Vec<usize> = self.basis.iter().copied().filter(|&b| b < n).collect();
        let k = structs.len();
        if k != rs.len() {
            return Err(LpError::SingularBasis);
        }
        let mut y = DMatrix::<f64>::zeros(k, k);
        for (t, &j) in structs.iter().enumerate() {
            for &(r, a) in &self.cols[j] {
                if row_slot[r] != NONE {
                    y[(row_slot[r], t)] += a;
                }
            }
        }
        let yinv = if k > 0 {
            y.try_inverse().ok_or(LpError::SingularBasis)?
        } else {
            y
        };
        let mut binv = vec![0.0; m * m];
        for (t, &j) in structs.iter().enumerate() {
            let q = self.pos[j];
            for (s, &r) in rs.iter().enumerate() {
                binv[q * m + r] = yinv[(t, s)];
            }
        }
        for r in 0..m {
            if self.state[n + r] == State::Basic {
                let q = self.pos[n + r];
                binv[q * m + r] = 1.0;
            }
        }
        for (t, &j) in structs.iter().enumerate() {
            for &(r, a) in &self.cols[j] {
                if row_slot[r] == NONE {
                    let q = self.pos[n + r];
                    for (s, &rr) in rs.iter().enumerate() {
                        binv[q * m + rr] -= a * yinv[(t, s)];
                    }
                }
            }
        }
        self.binv = binv;

        // x_B = B⁻¹ (rhs − N x_N)
        let mut w = self.rhs.clone();
        for j in 0..n {
            if self.state[j] != State::Basic && self.x[j] != 0.0 {
                for &(r, a) in &self.cols[j] {
                    w[r] -= a * self.x[j];
                }
            }
        }
        for r in 0..m {
            if self.state[n + r] != State::Basic {
                w[r] -= self.x[n + r];
            }
        }
        for q in 0..m {
            let row = &self.binv[q * m..(q + 1) * m];
            let v: f64 = row.iter().zip(&w).map(|(a, b)| a * b).sum();
            self.x[self.basis[q]] = v;
        }
        self.since_check = 0;
        Ok(())
    }

    fn objective(&self) -> f64 {
        (0..self.n).map(|j| self.cost[j] * self.x[j]).sum()
    }

    fn run(&mut self, max_iter: usize) -> Result<Outcome, LpError> {
        let mut bland = false;
        let mut best_obj = f64::INFINITY;
        let mut best_phase1 = true;
        let mut stall = 0usize;
        let mut polished = false;
        loop {
            if self.iterations >= max_iter {
                return Err(LpError::IterationLimit {
                    iterations: self.iterations,
                    best: Box::new(self.plain_solution(LpStatus::Infeasible, None)),
                });
            }
            if self.since_check >= self.opts.check_every {
                self.since_check = 0;
                if self.residual_norm() > 1e-11 {
                    self.refactor()?;
                }
            }
            let (cb1, infeas) = self.phase1_costs();
            let phase1 = infeas > 0.0;
            let y = if phase1 {
                self.btran(&cb1)
            } else {
                self.btran(&self.phase2_costs())
            };

            let obj = if phase1 { infeas } else { self.objective() };
            if phase1 != best_phase1 {
                best_phase1 = phase1;
                best_obj = f64::INFINITY;
                stall = 0;
                bland = false;
            }
            if obj < best_obj - 1e-12 * (1.0 + obj.abs()) {
                best_obj = obj;
                stall = 0;
                bland = false;
            } else {
                stall += 1;
                if stall > self.opts.stall_limit {
                    bland = true;
                }
            }

            let Some((q, dir)) = self.price(&y, phase1, bland) else {
                if !polished {
                    // polish with a fresh factorization before declaring
                    self.refactor()?;
                    polished = true;
                    continue;
                }
                if phase1 {
                    return Ok(Outcome::Infeasible(self.certificate(&y)));
                }
                return Ok(Outcome::Optimal);
            };
            polished = false;
            let alpha = self.ftran(q);
            let Some(leave) = self.ratio(q, dir, &alpha, bland) else {
                if phase1 {
                    // cannot happen with exact arithmetic; refresh and retry
                    self.refactor()?;
                    self.iterations += 1;
                    continue;
                }
                return Ok(Outcome::Unbounded);
            };
            self.pivot(q, dir, &alpha, &leave);
            self.iterations += 1;
            self.since_check += 1;
        }
    }

    fn certificate(&self, y: &[f64]) -> FarkasCertificate {
        let mut ineq = vec![0.0; self.p.ineq.len()];
        let mut eq = vec![0.0; self.p.eq.len()];
        for (r, src) in self.rows.iter().enumerate() {
            match *src {
                RowSrc::Eq(k) => eq[k] = -y[r],
                RowSrc::Ineq(i) => ineq[i] = (-y[r]).max(0.0),
            }
        }
        FarkasCertificate { ineq, eq }
    }

    fn optimal_solution(&self) -> LpSolution {
        let y = self.btran(&self.phase2_costs());
        let mut ineq = vec![0.0; self.p.ineq.len()];
        let mut eq = vec![0.0; self.p.eq.len()];
        for (r, src) in self.rows.iter().enumerate() {
            match *src {
                RowSrc::Eq(k) => eq[k] = clean(-y[r]),
                RowSrc::Ineq(i) => {
                    let l = clean(-y[r]);
                    ineq[i] = if l < 0.0 && l > -1e-9 { 0.0 } else { l };
                }
            }
        }
        let x: Vec<f64> = self.x[..self.n].iter().map(|&v| clean(v)).collect();
        let reduced_costs = self
            .p
            .reduced_costs(&ineq, &eq)
            .into_iter()
            .map(clean)
            .collect();
        LpSolution {
            status: LpStatus::Optimal,
            objective: self.p.objective(&x),
            x,
            ineq_duals: ineq,
            eq_duals: eq,
            reduced_costs,
            iterations: self.iterations,
            farkas: None,
        }
    }

    fn plain_solution(&self, status: LpStatus, farkas: Option<FarkasCertificate>) -> LpSolution {
        let x = self.x[..self.n].to_vec();
        LpSolution {
            status,
            objective: match status {
                LpStatus::Unbounded => f64::NEG_INFINITY,
                LpStatus::Infeasible => f64::INFINITY,
                LpStatus::Optimal => self.p.objective(&x),
            },
            x,
            ineq_duals: vec![0.0; self.p.ineq.len()],
            eq_duals: vec![0.0; self.p.eq.len()],
            reduced_costs: vec![0.0; self.n],
            iterations: self.iterations,
            farkas,
        }
    }
}

/// Flushes rounding noise to exact zero.
fn clean(v: f64) -> f64 {
    if v.abs() < 1e-13 {
        0.0
    } else {
        v
    }
}
