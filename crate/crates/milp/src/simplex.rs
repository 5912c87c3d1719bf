//! Bounded-variable primal simplex on a dense tableau.
//!
//! Rows are brought to `a x + s = b` with one slack per inequality (bounded
//! to `[0, inf)` for `<=`, `(-inf, 0]` for `>=`). Rows whose residual at the
//! starting point is not representable by their slack get an artificial
//! variable, minimized away in phase 1. Nonbasic variables sit at one of
//! their bounds (or at zero when free), so binary relaxations never add rows.

use crate::error::MilpError;
use crate::model::{Model, Relation};

/// Entries below this magnitude are flushed to zero after each pivot.
const DROP_TOL: f64 = 1e-12;
const PIVOT_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug)]
pub struct LpOutcome {
    pub status: LpStatus,
    /// Values for every model variable (empty unless optimal).
    pub values: Vec<f64>,
    /// `c^T x + constant` recomputed from `values`.
    pub objective: f64,
    pub iterations: usize,
}

impl LpOutcome {
    fn without_point(status: LpStatus, iterations: usize) -> Self {
        Self {
            status,
            values: Vec::new(),
            objective: f64::NAN,
            iterations,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum State {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable resting at zero.
    Free,
}

struct Tableau {
    m: usize,
    ncols: usize,
    /// Row-major `m x ncols` matrix `B^-1 A`.
    t: Vec<f64>,
    basis: Vec<usize>,
    state: Vec<State>,
    x: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    d: Vec<f64>,
    /// Columns excluded from pricing and updates (retired artificials).
    dead: Vec<bool>,
    iterations: usize,
    max_iterations: usize,
    degenerate_run: usize,
    bland_after: usize,
}

enum StepResult {
    Optimal,
    Unbounded,
    Continue,
}

impl Tableau {
    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * self.ncols + j]
    }

    fn price(&self, bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = 0.0;
        for j in 0..self.ncols {
            if self.dead[j] {
                continue;
            }
            let dj = self.d[j];
            let dir = match self.state[j] {
                State::Basic => continue,
                State::AtLower if dj < -DUAL_TOL && self.hi[j] > self.lo[j] => 1.0,
                State::AtUpper if dj > DUAL_TOL && self.hi[j] > self.lo[j] => -1.0,
                State::Free if dj.abs() > DUAL_TOL => -dj.signum(),
                _ => continue,
            };
            if bland {
                return Some((j, dir));
            }
            if dj.abs() > best_score {
                best_score = dj.abs();
                best = Some((j, dir));
            }
        }
        best
    }

    fn step(&mut self) -> Result<StepResult, MilpError> {
        self.iterations += 1;
        if self.iterations > self.max_iterations {
            return Err(MilpError::CyclingGuard(self.iterations));
        }
        let bland = self.degenerate_run > self.bland_after;
        let Some((j, dir)) = self.price(bland) else {
            return Ok(StepResult::Optimal);
        };

        // Ratio test.
        let mut theta = if self.lo[j].is_finite() && self.hi[j].is_finite() {
            self.hi[j] - self.lo[j]
        } else {
            f64::INFINITY
        };
        let mut leave: Option<usize> = None;
        let mut leave_mag = 0.0;
        for i in 0..self.m {
            let g = dir * self.at(i, j);
            if g.abs() <= PIVOT_TOL {
                continue;
            }
            let b = self.basis[i];
            let limit = if g > 0.0 {
                if self.lo[b] == f64::NEG_INFINITY {
                    continue;
                }
                ((self.x[b] - self.lo[b]) / g).max(0.0)
            } else {
                if self.hi[b] == f64::INFINITY {
                    continue;
                }
                ((self.hi[b] - self.x[b]) / -g).max(0.0)
            };
            let better = match leave {
                None => limit < theta,
                Some(cur) => {
                    if limit < theta - 1e-12 {
                        true
                    } else if limit <= theta + 1e-12 {
                        if bland {
                            b < self.basis[cur]
                        } else {
                            g.abs() > leave_mag
                        }
                    } else {
                        false
                    }
                }
            };
            if better {
                theta = limit;
                leave = Some(i);
                leave_mag = g.abs();
            }
        }
        if theta == f64::INFINITY {
            return Ok(StepResult::Unbounded);
        }
        if theta <= 1e-12 {
            self.degenerate_run += 1;
        } else {
            self.degenerate_run = 0;
        }

        // Move the entering variable and the basics along the edge.
        if theta > 0.0 {
            self.x[j] += dir * theta;
            for i in 0..self.m {
                let a = self.at(i, j);
                if a != 0.0 {
                    let b = self.basis[i];
                    self.x[b] -= theta * dir * a;
                }
            }
        }

        match leave {
            None => {
                // Bound flip.
                self.state[j] = if dir > 0.0 { State::AtUpper } else { State::AtLower };
                self.x[j] = if dir > 0.0 { self.hi[j] } else { self.lo[j] };
            }
            Some(r) => {
                let l = self.basis[r];
                let g = dir * self.at(r, j);
                if g > 0.0 {
                    self.x[l] = self.lo[l];
                    self.state[l] = State::AtLower;
                } else {
                    self.x[l] = self.hi[l];
                    self.state[l] = State::AtUpper;
                }
                self.pivot(r, j);
            }
        }
        Ok(StepResult::Continue)
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let n = self.ncols;
        let piv = self.t[r * n + j];
        let inv = 1.0 / piv;
        let mut nz: Vec<usize> = Vec::new();
        {
            let row = &mut self.t[r * n..(r + 1) * n];
            for (c, v) in row.iter_mut().enumerate() {
                if *v != 0.0 {
                    if self.dead[c] {
                        *v = 0.0;
                        continue;
                    }
                    *v *= inv;
                    if v.abs() < DROP_TOL {
                        *v = 0.0;
                    } else {
                        nz.push(c);
                    }
                }
            }
            row[j] = 1.0;
        }
        let pivot_row: Vec<(usize, f64)> = nz.iter().map(|&c| (c, self.t[r * n + c])).collect();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.t[i * n + j];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.t[i * n..(i + 1) * n];
            for &(c, v) in &pivot_row {
                let nv = row[c] - f * v;
                row[c] = if nv.abs() < DROP_TOL { 0.0 } else { nv };
            }
            row[j] = 0.0;
        }
        let f = self.d[j];
        if f != 0.0 {
            for &(c, v) in &pivot_row {
                self.d[c] -= f * v;
            }
            self.d[j] = 0.0;
        }
        let old = self.basis[r];
        if self.state[old] == State::Basic {
            self.state[old] = State::AtLower;
        }
        self.basis[r] = j;
        self.state[j] = State::Basic;
    }

    fn run(&mut self) -> Result<StepResult, MilpError> {
        self.degenerate_run = 0;
        loop {
            match self.step()? {
                StepResult::Continue => {}
                other => return Ok(other),
            }
        }
    }

    fn reset_costs(&mut self, cost: &[f64]) {
        self.d.copy_from_slice(cost);
        for i in 0..self.m {
            let cb = cost[self.basis[i]];
            if cb == 0.0 {
                continue;
            }
            let row = &self.t[i * self.ncols..(i + 1) * self.ncols];
            for (c, v) in row.iter().enumerate() {
                if *v != 0.0 {
                    self.d[c] -= cb * v;
                }
            }
        }
        for i in 0..self.m {
            self.d[self.basis[i]] = 0.0;
        }
    }
}

struct Row {
    coefs: Vec<(usize, f64)>,
    rel: Relation,
    rhs: f64,
}

/// Solves the LP relaxation of `model` with variable bounds replaced by
/// `lo`/`hi` (binaries are treated as continuous).
pub fn solve_bounded(
    model: &Model,
    lo: &[f64],
    hi: &[f64],
    feas_tol: f64,
    max_iterations: Option<usize>,
) -> Result<LpOutcome, MilpError> {
    let nv = model.num_vars();
    debug_assert_eq!(lo.len(), nv);
    for j in 0..nv {
        if lo[j] > hi[j] + feas_tol {
            return Ok(LpOutcome::without_point(LpStatus::Infeasible, 0));
        }
    }

    // Fixed variables are substituted out.
    let mut col_of = vec![usize::MAX; nv];
    let mut cols: Vec<usize> = Vec::new();
    for j in 0..nv {
        if hi[j] - lo[j] > 0.0 {
            col_of[j] = cols.len();
            cols.push(j);
        }
    }
    let fixed_value = |j: usize| lo[j];

    let mut rows: Vec<Row> = Vec::with_capacity(model.constraints().len());
    for c in model.constraints() {
        let mut rhs = c.rhs;
        let mut coefs = Vec::with_capacity(c.expr.len());
        let (mut min_act, mut max_act) = (0.0_f64, 0.0_f64);
        for (v, a) in c.expr.terms() {
            let j = v.index();
            if col_of[j] == usize::MAX {
                rhs -= a * fixed_value(j);
            } else {
                coefs.push((col_of[j], a));
                let (l, h) = (lo[j], hi[j]);
                if a > 0.0 {
                    min_act += a * l;
                    max_act += a * h;
                } else {
                    min_act += a * h;
                    max_act += a * l;
                }
            }
        }
        let viol_lo = min_act - rhs;
        let viol_hi = rhs - max_act;
        match c.rel {
            Relation::Le => {
                if viol_lo > feas_tol {
                    return Ok(LpOutcome::without_point(LpStatus::Infeasible, 0));
                }
                if max_act <= rhs {
                    continue;
                }
            }
            Relation::Ge => {
                if viol_hi > feas_tol {
                    return Ok(LpOutcome::without_point(LpStatus::Infeasible, 0));
                }
                if min_act >= rhs {
                    continue;
                }
            }
            Relation::Eq => {
                if viol_lo > feas_tol || viol_hi > feas_tol {
                    return Ok(LpOutcome::without_point(LpStatus::Infeasible, 0));
                }
                if coefs.is_empty() {
                    continue;
                }
            }
        }
        rows.push(Row {
            coefs,
            rel: c.rel,
            rhs,
        });
    }

    let n = cols.len();
    let m = rows.len();
    let n_slack = rows.iter().filter(|r| r.rel != Relation::Eq).count();

    // Starting point for structurals.
    let mut x0 = Vec::with_capacity(n);
    let mut st0 = Vec::with_capacity(n);
    for &j in &cols {
        let (l, h) = (lo[j], hi[j]);
        if l.is_finite() {
            x0.push(l);
            st0.push(State::AtLower);
        } else if h.is_finite() {
            x0.push(h);
            st0.push(State::AtUpper);
        } else {
            x0.push(0.0);
            st0.push(State::Free);
        }
    }

    // Decide which rows need an artificial.
    let mut residual = Vec::with_capacity(m);
    let mut needs_art = Vec::with_capacity(m);
    for r in &rows {
        let act: f64 = r.coefs.iter().map(|&(c, a)| a * x0[c]).sum();
        let res = r.rhs - act;
        residual.push(res);
        needs_art.push(match r.rel {
            Relation::Le => res < 0.0,
            Relation::Ge => res > 0.0,
            Relation::Eq => true,
        });
    }
    let n_art = needs_art.iter().filter(|&&b| b).count();
    let ncols = n + n_slack + n_art;

    let mut tab = Tableau {
        m,
        ncols,
        t: vec![0.0; m * ncols],
        basis: vec![0; m],
        state: Vec::with_capacity(ncols),
        x: Vec::with_capacity(ncols),
        lo: Vec::with_capacity(ncols),
        hi: Vec::with_capacity(ncols),
        d: vec![0.0; ncols],
        dead: vec![false; ncols],
        iterations: 0,
        max_iterations: max_iterations.unwrap_or(50 * (m + ncols) + 10_000),
        degenerate_run: 0,
        bland_after: 3 * (m + ncols),
    };
    for (k, &j) in cols.iter().enumerate() {
        tab.lo.push(lo[j]);
        tab.hi.push(hi[j]);
        tab.x.push(x0[k]);
        tab.state.push(st0[k]);
    }
    // Slack and artificial column bookkeeping.
    let mut slack_col = vec![usize::MAX; m];
    let mut next = n;
    for (i, r) in rows.iter().enumerate() {
        match r.rel {
            Relation::Le => {
                tab.lo.push(0.0);
                tab.hi.push(f64::INFINITY);
            }
            Relation::Ge => {
                tab.lo.push(f64::NEG_INFINITY);
                tab.hi.push(0.0);
            }
            Relation::Eq => continue,
        }
        tab.x.push(0.0);
        tab.state.push(State::AtLower);
        slack_col[i] = next;
        next += 1;
    }
    for (i, r) in rows.iter().enumerate() {
        if let Relation::Ge = r.rel {
            if slack_col[i] != usize::MAX {
                tab.state[slack_col[i]] = State::AtUpper;
            }
        }
    }
    let mut art_cost = vec![0.0; ncols];
    for (i, r) in rows.iter().enumerate() {
        let res = residual[i];
        let (basic_col, sign) = if needs_art[i] {
            let col = next;
            next += 1;
            tab.lo.push(0.0);
            tab.hi.push(f64::INFINITY);
            tab.x.push(res.abs());
            tab.state.push(State::Basic);
            art_cost[col] = 1.0;
            let sign = if res < 0.0 { -1.0 } else { 1.0 };
            tab.t[i * ncols + col] = sign;
            (col, sign)
        } else {
            let col = slack_col[i];
            tab.x[col] = res;
            tab.state[col] = State::Basic;
            (col, 1.0)
        };
        for &(c, a) in &r.coefs {
            tab.t[i * ncols + c] = a * sign;
        }
        if slack_col[i] != usize::MAX {
            tab.t[i * ncols + slack_col[i]] = sign;
        }
        tab.t[i * ncols + basic_col] = 1.0;
        tab.basis[i] = basic_col;
    }

    // Phase 1.
    if n_art > 0 {
        tab.reset_costs(&art_cost);
        match tab.run()? {
            StepResult::Optimal => {}
            StepResult::Unbounded | StepResult::Continue => {
                unreachable!("phase 1 objective is bounded below by zero")
            }
        }
        let infeas: f64 = (n + n_slack..ncols).map(|c| tab.x[c].max(0.0)).sum();
        if infeas > feas_tol {
            return Ok(LpOutcome::without_point(LpStatus::Infeasible, tab.iterations));
        }
        // Drive remaining artificials out of the basis where possible.
        for i in 0..m {
            let b = tab.basis[i];
            if b < n + n_slack {
                continue;
            }
            let mut best = None;
            let mut mag = 1e-7;
            for c in 0..n + n_slack {
                if tab.state[c] == State::Basic {
                    continue;
                }
                let v = tab.at(i, c).abs();
                if v > mag {
                    mag = v;
                    best = Some(c);
                }
            }
            if let Some(c) = best {
                tab.pivot(i, c);
                tab.x[b] = 0.0;
            }
        }
        for c in n + n_slack..ncols {
            tab.lo[c] = 0.0;
            tab.hi[c] = 0.0;
            if tab.state[c] != State::Basic {
                tab.dead[c] = true;
                tab.x[c] = 0.0;
                tab.state[c] = State::AtLower;
            }
        }
    }

    // Phase 2.
    let mut cost = vec![0.0; ncols];
    let obj = model.objective();
    for (v, c) in obj.terms() {
        let j = v.index();
        if col_of[j] != usize::MAX {
            cost[col_of[j]] = c;
        }
    }
    tab.reset_costs(&cost);
    let status = match tab.run()? {
        StepResult::Optimal => LpStatus::Optimal,
        StepResult::Unbounded => LpStatus::Unbounded,
        StepResult::Continue => unreachable!(),
    };
    if status == LpStatus::Unbounded {
        return Ok(LpOutcome::without_point(status, tab.iterations));
    }

    let mut values = vec![0.0; nv];
    for j in 0..nv {
        values[j] = if col_of[j] == usize::MAX {
            fixed_value(j)
        } else {
            let v = tab.x[col_of[j]];
            v.max(lo[j]).min(hi[j])
        };
    }
    let objective = obj.eval(&values);
    Ok(LpOutcome {
        status,
        values,
        objective,
        iterations: tab.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Model;

    fn bounds(m: &Model) -> (Vec<f64>, Vec<f64>) {
        (
            m.vars().iter().map(|v| v.lo).collect(),
            m.vars().iter().map(|v| v.hi).collect(),
        )
    }

    #[test]
    fn free_variable_with_equality() {
        let mut m = Model::new();
        let x = m.continuous(f64::NEG_INFINITY, f64::INFINITY, "x");
        let y = m.continuous(0.0, 4.0, "y");
        m.add_constraint(x + y, Relation::Eq, -2.0, "e").unwrap();
        m.set_objective(y * -1.0).unwrap();
        let (lo, hi) = bounds(&m);
        let out = solve_bounded(&m, &lo, &hi, 1e-6, None).unwrap();
        assert_eq!(out.status, LpStatus::Optimal);
        assert!((out.values[y.index()] - 4.0).abs() < 1e-9);
        assert!((out.values[x.index()] + 6.0).abs() < 1e-9);
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let mut m = Model::new();
        let x = m.continuous(0.0, f64::INFINITY, "x");
        m.add_constraint(x, Relation::Ge, 2.0, "a").unwrap();
        m.add_constraint(x, Relation::Le, 1.0, "b").unwrap();
        let (lo, hi) = bounds(&m);
        let out = solve_bounded(&m, &lo, &hi, 1e-6, None).unwrap();
        assert_eq!(out.status, LpStatus::Infeasible);

        let mut m = Model::new();
        let x = m.continuous(0.0, f64::INFINITY, "x");
        let y = m.continuous(0.0, f64::INFINITY, "y");
        m.add_constraint(x - y, Relation::Le, 1.0, "a").unwrap();
        m.set_objective(x * -1.0).unwrap();
        let (lo, hi) = bounds(&m);
        let out = solve_bounded(&m, &lo, &hi, 1e-6, None).unwrap();
        assert_eq!(out.status, LpStatus::Unbounded);
    }

    #[test]
    fn fixed_columns_are_substituted() {
        let mut m = Model::new();
        let x = m.continuous(2.0, 2.0, "x");
        let y = m.continuous(0.0, 10.0, "y");
        m.add_constraint(x + y, Relation::Ge, 5.0, "a").unwrap();
        m.set_objective(y).unwrap();
        let (lo, hi) = bounds(&m);
        let out = solve_bounded(&m, &lo, &hi, 1e-6, None).unwrap();
        assert!((out.objective - 3.0).abs() < 1e-9);
    }
}
