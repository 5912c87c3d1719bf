//! LP-format export and plain-text solution import.
//!
//! Variables are always written as `v0..vN` and constraints as `c0..cM`, so
//! the file for a given model is byte-for-byte reproducible. Solutions come
//! back as whitespace-separated `name value` lines; `#` starts a comment.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::MilpError;
use crate::model::{LinExpr, Model, VarKind};
use crate::{Solution, Status, FEAS_TOL, INT_TOL};

fn write_expr(out: &mut String, expr: &LinExpr) {
    if expr.is_empty() {
        // LP readers reject empty rows; a zero term on v0 is inert.
        out.push_str(" 0 v0");
        return;
    }
    for (i, (v, c)) in expr.terms().enumerate() {
        if c < 0.0 {
            let _ = write!(out, " - {} {}", -c, v);
        } else if i == 0 {
            let _ = write!(out, " {} {}", c, v);
        } else {
            let _ = write!(out, " + {} {}", c, v);
        }
    }
}

/// Renders `model` in LP format.
pub fn write_lp(model: &Model) -> String {
    let mut out = String::new();
    out.push_str("\\ generated by dap-milp\n");
    let k = model.objective().constant_part();
    if k != 0.0 {
        let _ = writeln!(out, "\\ objective constant omitted: {k}");
    }
    out.push_str("Minimize\n obj:");
    write_expr(&mut out, model.objective());
    out.push_str("\nSubject To\n");
    for (i, c) in model.constraints().iter().enumerate() {
        let _ = write!(out, " c{i}:");
        write_expr(&mut out, &c.expr);
        let _ = writeln!(out, " {} {}", c.rel.symbol(), c.rhs);
    }
    out.push_str("Bounds\n");
    for (i, v) in model.vars().iter().enumerate() {
        if v.kind == VarKind::Binary && v.lo == 0.0 && v.hi == 1.0 {
            continue;
        }
        let lo_inf = v.lo == f64::NEG_INFINITY;
        let hi_inf = v.hi == f64::INFINITY;
        let _ = match (lo_inf, hi_inf) {
            (true, true) => writeln!(out, " v{i} free"),
            (true, false) => writeln!(out, " -inf <= v{i} <= {}", v.hi),
            (false, true) => writeln!(out, " v{i} >= {}", v.lo),
            (false, false) if v.lo == v.hi => writeln!(out, " v{i} = {}", v.lo),
            (false, false) => writeln!(out, " {} <= v{i} <= {}", v.lo, v.hi),
        };
    }
    let binaries: Vec<usize> = model
        .vars()
        .iter()
        .enumerate()
        .filter(|(_, v)| v.kind == VarKind::Binary)
        .map(|(i, _)| i)
        .collect();
    out.push_str("Binaries\n");
    for chunk in binaries.chunks(10) {
        let names: Vec<String> = chunk.iter().map(|i| format!("v{i}")).collect();
        let _ = writeln!(out, " {}", names.join(" "));
    }
    out.push_str("End\n");
    out
}

pub fn write_lp_file(model: &Model, path: impl AsRef<Path>) -> Result<(), MilpError> {
    let path = path.as_ref();
    fs::write(path, write_lp(model)).map_err(|source| MilpError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads `name value` pairs for every variable of `model` and re-checks the
/// point against the model before returning it as an optimal solution.
pub fn read_solution_file(path: impl AsRef<Path>, model: &Model) -> Result<Solution, MilpError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| MilpError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let parse_err = |line: usize, msg: String| MilpError::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let n = model.num_vars();
    let mut values: Vec<Option<f64>> = vec![None; n];
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (Some(name), Some(val), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(parse_err(lineno + 1, format!("expected 'name value', got '{line}'")));
        };
        let idx = name
            .strip_prefix('v')
            .and_then(|s| s.parse::<usize>().ok())
            .filter(|&i| i < n && name == format!("v{i}"))
            .ok_or_else(|| parse_err(lineno + 1, format!("unknown variable '{name}'")))?;
        let value: f64 = val
            .parse()
            .map_err(|_| parse_err(lineno + 1, format!("bad number '{val}'")))?;
        if !value.is_finite() {
            return Err(parse_err(lineno + 1, format!("non-finite value for '{name}'")));
        }
        if values[idx].is_some() {
            return Err(parse_err(lineno + 1, format!("duplicate value for '{name}'")));
        }
        values[idx] = Some(value);
    }
    let missing: Vec<String> = values
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_none())
        .map(|(i, _)| format!("v{i}"))
        .collect();
    if !missing.is_empty() {
        let shown = if missing.len() > 8 {
            format!("{} ... ({} total)", missing[..8].join(", "), missing.len())
        } else {
            missing.join(", ")
        };
        return Err(MilpError::MissingValues(shown));
    }
    let mut values: Vec<f64> = values.into_iter().map(|v| v.unwrap_or(0.0)).collect();
    for (i, var) in model.vars().iter().enumerate() {
        let x = values[i];
        let out_of_bounds = x < var.lo - FEAS_TOL || x > var.hi + FEAS_TOL;
        let fractional = var.kind == VarKind::Binary && (x - x.round()).abs() > INT_TOL;
        if out_of_bounds || fractional {
            return Err(MilpError::BoundImport {
                label: format!("v{i} ({})", var.label),
                value: x,
            });
        }
        if var.kind == VarKind::Binary {
            values[i] = x.round();
        }
    }
    for (i, c) in model.constraints().iter().enumerate() {
        let amount = c.violation(&values);
        if amount > FEAS_TOL {
            return Err(MilpError::InfeasibleImport {
                index: i,
                label: c.label.clone(),
                amount,
            });
        }
    }
    let objective = model.objective().eval(&values);
    Ok(Solution {
        status: Status::Optimal,
        values,
        objective,
        nodes: 0,
        lp_iterations: 0,
        incumbent_trace: vec![objective],
        best_bound: objective,
    })
}
