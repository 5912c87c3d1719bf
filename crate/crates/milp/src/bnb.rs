//! Best-bound branch-and-bound over binary variables.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::MilpError;
use crate::model::{Model, VarKind};
use crate::simplex::{solve_bounded, LpStatus};
use crate::{Solution, SolverOptions, Status};

struct Node {
    bound: f64,
    depth: usize,
    seq: usize,
    fixings: Vec<(usize, f64)>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // BinaryHeap is a max-heap: the "greatest" node is the one with the
    // lowest bound, then the deepest, then the most recently created.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then(self.depth.cmp(&other.depth))
            .then(self.seq.cmp(&other.seq))
    }
}

pub(crate) fn branch_and_bound(
    model: &Model,
    node_limit: usize,
    opts: &SolverOptions,
) -> Result<Solution, MilpError> {
    let binaries: Vec<usize> = model
        .vars()
        .iter()
        .enumerate()
        .filter(|(_, v)| v.kind == VarKind::Binary)
        .map(|(i, _)| i)
        .collect();
    if binaries.len() > opts.max_binaries {
        return Err(MilpError::TooManyBinaries {
            found: binaries.len(),
            limit: opts.max_binaries,
        });
    }
    let base_lo: Vec<f64> = model.vars().iter().map(|v| v.lo).collect();
    let base_hi: Vec<f64> = model.vars().iter().map(|v| v.hi).collect();

    let mut incumbent: Option<(Vec<f64>, f64)> = None;
    let mut trace: Vec<f64> = Vec::new();
    let mut heap = BinaryHeap::new();
    let mut seq = 0usize;
    heap.push(Node {
        bound: f64::NEG_INFINITY,
        depth: 0,
        seq,
        fixings: Vec::new(),
    });
    let mut nodes = 0usize;
    let mut lp_iterations = 0usize;
    let mut root_unbounded = false;

    let cutoff = |inc: &Option<(Vec<f64>, f64)>| {
        inc.as_ref()
            .map(|(_, z)| *z - opts.opt_tol.max(opts.rel_gap * z.abs().max(1.0)))
    };

    while let Some(node) = heap.pop() {
        if let Some(c) = cutoff(&incumbent) {
            if node.bound >= c {
                continue;
            }
        }
        if nodes >= node_limit {
            heap.push(node);
            break;
        }
        nodes += 1;

        let mut lo = base_lo.clone();
        let mut hi = base_hi.clone();
        for &(j, v) in &node.fixings {
            lo[j] = v;
            hi[j] = v;
        }
        let lp = solve_bounded(model, &lo, &hi, opts.feas_tol, opts.max_lp_iterations)?;
        lp_iterations += lp.iterations;
        match lp.status {
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded => {
                if node.depth == 0 {
                    root_unbounded = true;
                    break;
                }
                continue;
            }
            LpStatus::Optimal => {}
        }
        if let Some(c) = cutoff(&incumbent) {
            if lp.objective >= c {
                continue;
            }
        }

        // Most fractional binary, ties to the lowest index.
        let mut branch: Option<(usize, f64)> = None;
        let mut best_frac = opts.int_tol;
        for &j in &binaries {
            let x = lp.values[j];
            let frac = (x - x.floor()).min(x.ceil() - x);
            if frac > best_frac + 1e-12 {
                best_frac = frac;
                branch = Some((j, x));
            }
        }

        match branch {
            None => {
                let mut values = lp.values;
                for &j in &binaries {
                    values[j] = values[j].round();
                }
                let z = model.objective().eval(&values);
                accept(&mut incumbent, &mut trace, values, z);
            }
            Some((j, x)) => {
                if let Some((values, z)) = round_heuristic(model, &binaries, &lp.values, opts) {
                    accept(&mut incumbent, &mut trace, values, z);
                }
                if opts.diving && (node.depth == 0 || nodes % DIVE_EVERY == 0) {
                    let limit = cutoff(&incumbent).unwrap_or(f64::INFINITY);
                    let (found, iters) = dive(model, &binaries, &lo, &hi, &lp.values, limit, opts)?;
                    lp_iterations += iters;
                    if let Some((values, z)) = found {
                        accept(&mut incumbent, &mut trace, values, z);
                    }
                }
                // Prefer exploring the side the relaxation leans towards.
                let first = if x >= 0.5 { 1.0 } else { 0.0 };
                for v in [1.0 - first, first] {
                    seq += 1;
                    let mut fixings = node.fixings.clone();
                    fixings.push((j, v));
                    heap.push(Node {
                        bound: lp.objective,
                        depth: node.depth + 1,
                        seq,
                        fixings,
                    });
                }
            }
        }
    }

    if root_unbounded {
        return Ok(Solution {
            status: Status::Unbounded,
            values: Vec::new(),
            objective: f64::NEG_INFINITY,
            nodes,
            lp_iterations,
            incumbent_trace: trace,
            best_bound: f64::NEG_INFINITY,
        });
    }
    let open_bound = heap
        .iter()
        .map(|n| n.bound)
        .fold(f64::INFINITY, f64::min);
    let limit_hit = !heap.is_empty()
        && cutoff(&incumbent).map_or(true, |c| open_bound < c);
    let status = match (&incumbent, limit_hit) {
        (_, true) => Status::NodeLimit,
        (Some(_), false) => Status::Optimal,
        (None, false) => Status::Infeasible,
    };
    let (values, objective) = incumbent.unwrap_or((Vec::new(), f64::INFINITY));
    let best_bound = if limit_hit { open_bound.min(objective) } else { objective };
    Ok(Solution {
        status,
        values,
        objective,
        nodes,
        lp_iterations,
        incumbent_trace: trace,
        best_bound,
    })
}

const DIVE_EVERY: usize = 10;

fn fractionality(x: f64) -> f64 {
    (x - x.floor()).min(x.ceil() - x)
}

/// Fix-and-resolve dive, abandoned once the relaxation reaches `cutoff`.
/// Each round raises the fractional binaries the relaxation already leans
/// towards (value >= 1/2) to one, or the single largest one when none does,
/// and re-solves. On an infeasible LP the batch
/// is shrunk to its first member, then that member is pushed to zero; after
/// that the dive gives up.
fn dive(
    model: &Model,
    binaries: &[usize],
    lo: &[f64],
    hi: &[f64],
    start: &[f64],
    cutoff: f64,
    opts: &SolverOptions,
) -> Result<(Option<(Vec<f64>, f64)>, usize), MilpError> {
    let mut lo = lo.to_vec();
    let mut hi = hi.to_vec();
    let mut point = start.to_vec();
    let mut iterations = 0;
    for _ in 0..2 * binaries.len() + 2 {
        let mut frac: Vec<(f64, usize)> = binaries
            .iter()
            .filter(|&&j| lo[j] != hi[j] && fractionality(point[j]) > opts.int_tol)
            .map(|&j| (point[j], j))
            .collect();
        if frac.is_empty() {
            let mut values = point;
            for &j in binaries {
                values[j] = values[j].round();
            }
            if model.max_violation(&values).0 > opts.feas_tol {
                return Ok((None, iterations));
            }
            let z = model.objective().eval(&values);
            return Ok((Some((values, z)), iterations));
        }
        frac.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let leaning = frac.iter().take_while(|f| f.0 >= 0.5).count().max(1);
        let first = frac[0].1;
        let attempts: [Vec<(usize, f64)>; 3] = [
            frac[..leaning].iter().map(|&(_, j)| (j, 1.0)).collect(),
            vec![(first, 1.0)],
            vec![(first, 0.0)],
        ];
        let mut next = None;
        for (n, fix) in attempts.into_iter().enumerate() {
            if n == 1 && leaning == 1 {
                continue;
            }
            let (mut l, mut h) = (lo.clone(), hi.clone());
            for &(j, v) in &fix {
                l[j] = v;
                h[j] = v;
            }
            let lp = solve_bounded(model, &l, &h, opts.feas_tol, opts.max_lp_iterations)?;
            iterations += lp.iterations;
            if lp.status == LpStatus::Optimal && lp.objective < cutoff {
                next = Some((l, h, lp.values));
                break;
            }
        }
        match next {
            Some((l, h, values)) => {
                lo = l;
                hi = h;
                point = values;
            }
            None => return Ok((None, iterations)),
        }
    }
    Ok((None, iterations))
}

fn accept(
    incumbent: &mut Option<(Vec<f64>, f64)>,
    trace: &mut Vec<f64>,
    values: Vec<f64>,
    z: f64,
) {
    if incumbent.as_ref().map_or(true, |(_, best)| z < *best) {
        trace.push(z);
        *incumbent = Some((values, z));
    }
}

/// Tries to round every fractional binary while keeping the continuous part
/// of the relaxation point fixed. Repeated passes let one rounding unlock
/// another (e.g. zeroing one side of `a + b <= 1` before raising the other).
fn round_heuristic(
    model: &Model,
    binaries: &[usize],
    point: &[f64],
    opts: &SolverOptions,
) -> Option<(Vec<f64>, f64)> {
    let mut values = point.to_vec();
    let mut is_pending = vec![false; model.num_vars()];
    let mut pending = Vec::new();
    for &j in binaries {
        if (values[j] - values[j].round()).abs() > opts.int_tol {
            is_pending[j] = true;
            pending.push(j);
        } else {
            values[j] = values[j].round();
        }
    }
    // Row activities, maintained incrementally.
    let rows = model.constraints();
    let mut activity: Vec<f64> = rows.iter().map(|c| c.expr.eval(&values)).collect();
    let mut col_rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); model.num_vars()];
    for (i, c) in rows.iter().enumerate() {
        for (v, a) in c.expr.terms() {
            if is_pending[v.index()] {
                col_rows[v.index()].push((i, a));
            }
        }
    }
    let tol = opts.feas_tol;
    let fits = |activity: &[f64], j: usize, delta: f64| {
        col_rows[j].iter().all(|&(i, a)| {
            let c = &rows[i];
            let new = activity[i] + a * delta;
            match c.rel {
                crate::Relation::Le => new <= c.rhs + tol,
                crate::Relation::Ge => new >= c.rhs - tol,
                crate::Relation::Eq => (new - c.rhs).abs() <= tol,
            }
        })
    };
    loop {
        let before = pending.len();
        pending.retain(|&j| {
            let x = values[j];
            let obj = model.objective().coef(crate::VarId(j));
            let mut order = [x.floor(), x.ceil()];
            if obj < 0.0 {
                order.swap(0, 1);
            }
            for target in order {
                let delta = target - x;
                if fits(&activity, j, delta) {
                    for &(i, a) in &col_rows[j] {
                        activity[i] += a * delta;
                    }
                    values[j] = target;
                    return false;
                }
            }
            true
        });
        if pending.is_empty() {
            break;
        }
        if pending.len() == before {
            return None;
        }
    }
    let (viol, _) = model.max_violation(&values);
    if viol > opts.feas_tol {
        return None;
    }
    let z = model.objective().eval(&values);
    Some((values, z))
}
