//! Independent oracles for the solver tests: brute-force vertex enumeration
//! for LPs and exhaustive binary enumeration for MILPs.
#![allow(dead_code)]

use dap_milp::{solve_lp, LinExpr, Model, Relation, SolverOptions, Status, VarId, VarKind};
use rand::Rng;

/// Dense description of a random instance, kept alongside the model so the
/// oracles never look at solver internals.
pub struct Instance {
    pub model: Model,
    pub vars: Vec<VarId>,
}

/// Random model with `n_cont` bounded continuous variables, `n_bin` binaries
/// and `n_rows` mixed-relation constraints. Right-hand sides are set around a
/// random reference point so most instances are feasible.
pub fn random_instance<R: Rng>(rng: &mut R, n_cont: usize, n_bin: usize, n_rows: usize) -> Instance {
    let mut model = Model::new();
    let mut vars = Vec::new();
    let mut point = Vec::new();
    for i in 0..n_cont {
        let hi = rng.gen_range(1.0..10.0_f64).round();
        vars.push(model.continuous(0.0, hi, format!("x{i}")));
        point.push(rng.gen_range(0.0..hi));
    }
    for i in 0..n_bin {
        vars.push(model.binary(format!("b{i}")));
        point.push(if rng.gen_bool(0.5) { 1.0 } else { 0.0 });
    }
    for r in 0..n_rows {
        let mut expr = LinExpr::new();
        let mut act = 0.0;
        for (k, &v) in vars.iter().enumerate() {
            if rng.gen_bool(0.6) {
                let a = rng.gen_range(-5i32..=5) as f64;
                expr.add_term(v, a);
                act += a * point[k];
            }
        }
        let rel = match rng.gen_range(0..6) {
            0 => Relation::Eq,
            1 | 2 => Relation::Ge,
            _ => Relation::Le,
        };
        let slack = rng.gen_range(0.0..3.0_f64).round();
        let rhs = match rel {
            Relation::Le => ((act + slack) * 4.0).round() / 4.0,
            Relation::Ge => ((act - slack) * 4.0).round() / 4.0,
            // Exact activity keeps equality rows satisfiable at the reference point.
            Relation::Eq => act,
        };
        model.add_constraint(expr, rel, rhs, format!("r{r}")).unwrap();
    }
    let mut obj = LinExpr::new();
    for &v in &vars {
        obj.add_term(v, rng.gen_range(-10i32..=10) as f64);
    }
    model.set_objective(obj).unwrap();
    Instance { model, vars }
}

fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                if f != 0.0 {
                    for c in col..n {
                        a[r][c] -= f * a[col][c];
                    }
                    b[r] -= f * b[col];
                }
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

/// Minimum of the LP relaxation by enumerating every basic point: each
/// choice of `n` tight hyperplanes among rows and variable bounds. Requires
/// finite bounds on all variables. Returns `None` when infeasible.
pub fn vertex_enumeration(model: &Model) -> Option<f64> {
    let n = model.num_vars();
    let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
    for c in model.constraints() {
        let mut row = vec![0.0; n];
        for (v, a) in c.expr.terms() {
            row[v.index()] = a;
        }
        planes.push((row, c.rhs));
    }
    for (j, v) in model.vars().iter().enumerate() {
        assert!(v.lo.is_finite() && v.hi.is_finite());
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        planes.push((e.clone(), v.lo));
        planes.push((e, v.hi));
    }
    let mut best: Option<f64> = None;
    let mut idx: Vec<usize> = (0..n).collect();
    let p = planes.len();
    loop {
        let a: Vec<Vec<f64>> = idx.iter().map(|&i| planes[i].0.clone()).collect();
        let b: Vec<f64> = idx.iter().map(|&i| planes[i].1).collect();
        if let Some(x) = solve_square(a, b) {
            let (viol, _) = model.max_violation(&x);
            if viol <= 1e-7 {
                let z = model.objective().eval(&x);
                best = Some(best.map_or(z, |cur: f64| cur.min(z)));
            }
        }
        // Next combination.
        let mut k = n;
        loop {
            if k == 0 {
                return best;
            }
            k -= 1;
            if idx[k] < p - (n - k) {
                idx[k] += 1;
                for t in k + 1..n {
                    idx[t] = idx[t - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Minimum over all 2^n binary assignments, each completed by an LP solve
/// over the continuous variables. `None` when every assignment is infeasible.
pub fn exhaustive_binaries(model: &Model) -> Option<f64> {
    let bins: Vec<VarId> = model
        .var_ids()
        .filter(|&v| model.var(v).kind == VarKind::Binary)
        .collect();
    assert!(bins.len() <= 20);
    let opts = SolverOptions::default();
    let mut best: Option<f64> = None;
    for mask in 0u32..(1u32 << bins.len()) {
        let mut fixed = model.clone();
        for (k, &b) in bins.iter().enumerate() {
            let v = ((mask >> k) & 1) as f64;
            fixed.set_bounds(b, v, v).unwrap();
        }
        let sol = solve_lp(&fixed, &opts).unwrap();
        if sol.status == Status::Optimal {
            best = Some(best.map_or(sol.objective, |cur: f64| cur.min(sol.objective)));
        }
    }
    best
}
