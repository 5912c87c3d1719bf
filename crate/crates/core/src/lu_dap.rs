//! LU day-ahead planning: model assembly, solve, plan extraction.

use std::path::{Path, PathBuf};
use std::process::Command;

use dap_milp::{
    read_solution_file, solve_lp, solve_milp, write_lp_file, LinExpr, Model, Relation,
    SolverOptions, Status, VarId, VarKind,
};
use serde::Serialize;

use crate::devices::{
    emit_abp, emit_bess, emit_fixed, emit_pev, emit_tcl, quantile_gauss, AbpParams, AbpVars,
    BessParams, BessVars, DeviceEmission, FixedEmission, FixedProfiles, PevParams, PevVars,
    ReserveSplit, TclParams, TclVars,
};
use crate::error::DapError;
use crate::types::{PriceSet, Profile, TimeGrid, Unit};

#[derive(Clone, Debug)]
pub struct LuConfig {
    pub name: String,
    pub abps: Vec<AbpParams>,
    pub pevs: Vec<PevParams>,
    pub besses: Vec<BessParams>,
    pub tcls: Vec<TclParams>,
    pub fixed: FixedProfiles,
    /// Export limit, non-positive; zero disables export.
    pub p_min: f64,
    /// Import limit, non-negative.
    pub p_max: f64,
    pub prices: PriceSet,
    /// Chance-constraint reliability, in (0, 0.5).
    pub r: f64,
    /// Force positive and negative reserves to mirror each other.
    pub equal_reserve: bool,
}

impl LuConfig {
    pub fn validate(&self, grid: &TimeGrid) -> Result<(), DapError> {
        if !(self.p_min <= 0.0 && 0.0 <= self.p_max) {
            return Err(DapError::params(&self.name, "need p_min <= 0 <= p_max"));
        }
        self.prices.validate(grid)?;
        quantile_gauss(self.r)?;
        Ok(())
    }

    pub fn export_enabled(&self) -> bool {
        self.p_min < 0.0
    }
}

/// Assembled LU model with handles to everything needed for extraction.
#[derive(Clone, Debug)]
pub struct LuModel {
    pub model: Model,
    pub abps: Vec<AbpVars>,
    pub pevs: Vec<PevVars>,
    pub besses: Vec<BessVars>,
    pub tcls: Vec<TclVars>,
    pub fixed: FixedEmission,
    pub p_imp: Vec<VarId>,
    pub p_exp: Vec<VarId>,
    pub x_imp: Vec<VarId>,
    /// Base LU power per step.
    pub power: Vec<LinExpr>,
    pub flx_up: Vec<LinExpr>,
    pub flx_dn: Vec<LinExpr>,
    pub unc_up: Vec<LinExpr>,
    pub unc_dn: Vec<LinExpr>,
    /// `sigma_unc * q(r)` per step [kW].
    pub unc_requirement: Vec<f64>,
    /// Elastic slacks on the coverage rows (diagnostic builds only).
    pub elastic: Option<(Vec<VarId>, Vec<VarId>)>,
}

struct Totals {
    power: Vec<LinExpr>,
    flx_up: Vec<LinExpr>,
    flx_dn: Vec<LinExpr>,
    unc_up: Vec<LinExpr>,
    unc_dn: Vec<LinExpr>,
}

impl Totals {
    fn add<V>(&mut self, e: &DeviceEmission<V>) {
        for k in 0..self.power.len() {
            self.power[k] += &e.power[k];
            self.flx_up[k] += &e.flx_up[k];
            self.flx_dn[k] += &e.flx_dn[k];
            self.unc_up[k] += &e.unc_up[k];
            self.unc_dn[k] += &e.unc_dn[k];
        }
    }
}

pub fn build_lu_dap(cfg: &LuConfig, grid: &TimeGrid) -> Result<LuModel, DapError> {
    build(cfg, grid, false)
}

fn build(cfg: &LuConfig, grid: &TimeGrid, elastic: bool) -> Result<LuModel, DapError> {
    cfg.validate(grid)?;
    let steps = grid.steps();
    let dt = grid.dt();
    let mut model = Model::new();
    let empty = vec![LinExpr::new(); steps];
    let mut tot = Totals {
        power: empty.clone(),
        flx_up: empty.clone(),
        flx_dn: empty.clone(),
        unc_up: empty.clone(),
        unc_dn: empty,
    };
    let mut abps = Vec::new();
    for p in &cfg.abps {
        let e = emit_abp(&mut model, p, grid)?;
        tot.add(&e);
        abps.push(e.vars);
    }
    let mut pevs = Vec::new();
    for p in &cfg.pevs {
        let e = emit_pev(&mut model, p, grid)?;
        tot.add(&e);
        pevs.push(e.vars);
    }
    let mut besses = Vec::new();
    for p in &cfg.besses {
        let e = emit_bess(&mut model, p, grid)?;
        tot.add(&e);
        besses.push(e.vars);
    }
    let mut tcls = Vec::new();
    for p in &cfg.tcls {
        let e = emit_tcl(&mut model, p, grid, cfg.r)?;
        tot.add(&e);
        tcls.push(e.vars);
    }
    let fixed = emit_fixed(&cfg.fixed, grid)?;
    for k in 0..steps {
        tot.power[k].add_constant(fixed.power[k]);
    }

    let q = quantile_gauss(cfg.r)?;
    let unc_requirement: Vec<f64> = fixed.sigma_unc().iter().map(|s| s * q).collect();
    let name = &cfg.name;
    let export = cfg.export_enabled();
    let mut p_imp = Vec::new();
    let mut p_exp = Vec::new();
    let mut x_imp = Vec::new();
    let mut slacks_up = Vec::new();
    let mut slacks_dn = Vec::new();
    for k in 0..steps {
        let pi = model.continuous(0.0, cfg.p_max, format!("{name}.p_imp[{k}]"));
        let pe = model.continuous(cfg.p_min, 0.0, format!("{name}.p_exp[{k}]"));
        let xi = if export {
            model.binary(format!("{name}.x_imp[{k}]"))
        } else {
            // Export disabled: the partition is trivial.
            model.add_var(VarKind::Binary, 1.0, 1.0, format!("{name}.x_imp[{k}]"))?
        };
        model.add_constraint(
            tot.power[k].clone() - pi - pe,
            Relation::Eq,
            0.0,
            format!("{name}.balance[{k}]"),
        )?;
        model.add_constraint(pi - xi * cfg.p_max, Relation::Le, 0.0, format!("{name}.imp[{k}]"))?;
        if export {
            model.add_constraint(
                pe + xi * cfg.p_min,
                Relation::Ge,
                cfg.p_min,
                format!("{name}.exp[{k}]"),
            )?;
        }

        let mut cover_up = tot.unc_up[k].clone();
        let mut cover_dn = tot.unc_dn[k].clone();
        if elastic {
            let su = model.continuous(0.0, f64::INFINITY, format!("{name}.short_up[{k}]"));
            let sd = model.continuous(0.0, f64::INFINITY, format!("{name}.short_dn[{k}]"));
            cover_up += LinExpr::from(su);
            cover_dn -= LinExpr::from(sd);
            slacks_up.push(su);
            slacks_dn.push(sd);
        }
        let req = unc_requirement[k];
        model.add_constraint(cover_up, Relation::Ge, req, format!("{name}.unc_up[{k}]"))?;
        model.add_constraint(cover_dn, Relation::Le, -req, format!("{name}.unc_dn[{k}]"))?;

        let high = tot.power[k].clone() + tot.flx_up[k].clone() + tot.unc_up[k].clone();
        model.add_constraint(high, Relation::Le, cfg.p_max, format!("{name}.cap_max[{k}]"))?;
        let low = tot.power[k].clone() + tot.flx_dn[k].clone() + tot.unc_dn[k].clone();
        model.add_constraint(low, Relation::Ge, cfg.p_min, format!("{name}.cap_min[{k}]"))?;
        if cfg.equal_reserve {
            model.add_constraint(
                tot.flx_up[k].clone() + tot.flx_dn[k].clone(),
                Relation::Eq,
                0.0,
                format!("{name}.equal_reserve[{k}]"),
            )?;
        }
        p_imp.push(pi);
        p_exp.push(pe);
        x_imp.push(xi);
    }

    let objective = if elastic {
        LinExpr::sum(slacks_up.iter().chain(&slacks_dn).map(|&v| v.into()))
    } else {
        let mut obj = LinExpr::new();
        for k in 0..steps {
            obj += p_imp[k] * (cfg.prices.c_imp.get(k) * dt);
            // Export energy is non-positive; pricing it this way makes it
            // income.
            obj += p_exp[k] * (cfg.prices.c_exp.get(k) * dt);
            let reserve = tot.flx_up[k].clone() - tot.flx_dn[k].clone();
            obj -= reserve.scaled(cfg.prices.c_flx.get(k) * dt);
        }
        obj
    };
    model.set_objective(objective)?;

    Ok(LuModel {
        model,
        abps,
        pevs,
        besses,
        tcls,
        fixed,
        p_imp,
        p_exp,
        x_imp,
        power: tot.power,
        flx_up: tot.flx_up,
        flx_dn: tot.flx_dn,
        unc_up: tot.unc_up,
        unc_dn: tot.unc_dn,
        unc_requirement,
        elastic: elastic.then_some((slacks_up, slacks_dn)),
    })
}

pub const DEFAULT_NODE_LIMIT: usize = 30;
pub const DEFAULT_REL_GAP: f64 = 1e-4;

/// Which MILP engine solves LU models.
#[derive(Clone, Debug)]
pub enum SolverChoice {
    /// Branch-and-bound with a node budget. When the budget runs out the
    /// best incumbent is used; `rel_gap` stops the search early once the
    /// incumbent is provably that close to optimal.
    Builtin {
        node_limit: usize,
        max_binaries: usize,
        rel_gap: f64,
    },
    /// Writes `<dir>/<lu>.lp` and reads `<dir>/<lu>.sol`. When `command` is
    /// given it is run through the shell first, with `{lp}` and `{sol}`
    /// replaced by the two paths.
    LpFile { dir: PathBuf, command: Option<String> },
}

impl Default for SolverChoice {
    fn default() -> Self {
        SolverChoice::Builtin {
            node_limit: DEFAULT_NODE_LIMIT,
            max_binaries: 2_000,
            rel_gap: DEFAULT_REL_GAP,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReserveSplitValues {
    pub up_flx: Vec<f64>,
    pub up_unc: Vec<f64>,
    pub dn_flx: Vec<f64>,
    pub dn_unc: Vec<f64>,
}

impl ReserveSplitValues {
    fn read(s: &ReserveSplit, x: &[f64]) -> Self {
        Self {
            up_flx: values(&s.up_flx, x),
            up_unc: values(&s.up_unc, x),
            dn_flx: values(&s.dn_flx, x),
            dn_unc: values(&s.dn_unc, x),
        }
    }

    pub fn up(&self, k: usize) -> f64 {
        self.up_flx[k] + self.up_unc[k]
    }

    pub fn dn(&self, k: usize) -> f64 {
        self.dn_flx[k] + self.dn_unc[k]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AbpSchedule {
    /// Power per phase and step [kW].
    pub phase_power: Vec<Vec<f64>>,
    pub phase_on: Vec<Vec<bool>>,
}

impl AbpSchedule {
    pub fn power(&self, k: usize) -> f64 {
        self.phase_power.iter().map(|ph| ph[k]).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PevSchedule {
    pub power: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BessSchedule {
    pub p_ch: Vec<f64>,
    pub p_dsc: Vec<f64>,
    pub up_ch: Vec<f64>,
    pub up_dsc: Vec<f64>,
    pub dn_ch: Vec<f64>,
    pub dn_dsc: Vec<f64>,
    pub split: ReserveSplitValues,
    pub soc: Vec<f64>,
    pub soc_up: Vec<f64>,
    pub soc_dn: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TclSchedule {
    pub p: Vec<f64>,
    pub up: Vec<f64>,
    pub dn: Vec<f64>,
    pub split: ReserveSplitValues,
    pub theta: Vec<f64>,
    pub theta_over: Vec<f64>,
    pub theta_under: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SolveStats {
    pub variables: usize,
    pub binaries: usize,
    pub constraints: usize,
    pub nodes: usize,
    pub lp_iterations: usize,
    /// False when the node budget ran out before optimality was proven.
    pub proven: bool,
    /// Lowest open relaxation bound on the objective.
    pub best_bound: f64,
}

/// Optimized plan of one LU. Energies are per step [kWh]; powers [kW].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LuPlan {
    pub name: String,
    pub grid: TimeGrid,
    pub e_hat: Profile,
    pub e_imp: Profile,
    pub e_exp: Profile,
    pub de_up: Profile,
    pub de_dn: Profile,
    /// Base LU power.
    pub power: Vec<f64>,
    pub fixed_power: Vec<f64>,
    pub sigma_unc: Vec<f64>,
    pub unc_up: Vec<f64>,
    pub unc_dn: Vec<f64>,
    pub abps: Vec<AbpSchedule>,
    pub pevs: Vec<PevSchedule>,
    pub besses: Vec<BessSchedule>,
    pub tcls: Vec<TclSchedule>,
    pub objective: f64,
    pub stats: SolveStats,
}

impl LuPlan {
    pub fn total_reserve(&self) -> f64 {
        self.de_up.sum() - self.de_dn.sum()
    }
}

fn values(vars: &[VarId], x: &[f64]) -> Vec<f64> {
    vars.iter().map(|v| x[v.index()]).collect()
}

fn evals(exprs: &[LinExpr], x: &[f64]) -> Vec<f64> {
    exprs.iter().map(|e| e.eval(x)).collect()
}

/// Builds the plan from a solution vector of `lu.model`.
pub fn extract_plan(cfg: &LuConfig, grid: &TimeGrid, lu: &LuModel, x: &[f64], stats: SolveStats) -> LuPlan {
    let dt = grid.dt();
    let kwh = |v: Vec<f64>| Profile::new(v.into_iter().map(|p| p * dt).collect(), Unit::Kwh);
    let imp = values(&lu.p_imp, x);
    let exp = values(&lu.p_exp, x);
    let e_hat = kwh(imp.iter().zip(&exp).map(|(a, b)| a + b).collect());
    LuPlan {
        name: cfg.name.clone(),
        grid: *grid,
        e_hat,
        e_imp: kwh(imp),
        e_exp: kwh(exp),
        de_up: kwh(evals(&lu.flx_up, x)),
        de_dn: kwh(evals(&lu.flx_dn, x)),
        power: evals(&lu.power, x),
        fixed_power: lu.fixed.power.clone(),
        sigma_unc: lu.fixed.sigma_unc(),
        unc_up: evals(&lu.unc_up, x),
        unc_dn: evals(&lu.unc_dn, x),
        abps: lu
            .abps
            .iter()
            .map(|a| AbpSchedule {
                phase_power: a.p.iter().map(|ph| values(ph, x)).collect(),
                phase_on: a
                    .x
                    .iter()
                    .map(|ph| ph.iter().map(|v| x[v.index()] > 0.5).collect())
                    .collect(),
            })
            .collect(),
        pevs: lu
            .pevs
            .iter()
            .map(|p| PevSchedule {
                power: values(&p.p, x),
            })
            .collect(),
        besses: lu
            .besses
            .iter()
            .map(|b| BessSchedule {
                p_ch: values(&b.p_ch, x),
                p_dsc: values(&b.p_dsc, x),
                up_ch: values(&b.up_ch, x),
                up_dsc: values(&b.up_dsc, x),
                dn_ch: values(&b.dn_ch, x),
                dn_dsc: values(&b.dn_dsc, x),
                split: ReserveSplitValues::read(&b.split, x),
                soc: evals(&b.soc, x),
                soc_up: evals(&b.soc_up, x),
                soc_dn: evals(&b.soc_dn, x),
            })
            .collect(),
        tcls: lu
            .tcls
            .iter()
            .map(|t| TclSchedule {
                p: values(&t.p, x),
                up: values(&t.up, x),
                dn: values(&t.dn, x),
                split: ReserveSplitValues::read(&t.split, x),
                theta: evals(&t.theta, x),
                theta_over: evals(&t.theta_over, x),
                theta_under: evals(&t.theta_under, x),
            })
            .collect(),
        objective: lu.model.objective().eval(x),
        stats,
    }
}

pub fn solve_lu_dap(cfg: &LuConfig, grid: &TimeGrid, solver: &SolverChoice) -> Result<LuPlan, DapError> {
    let lu = build_lu_dap(cfg, grid)?;
    let mut stats = SolveStats {
        variables: lu.model.num_vars(),
        binaries: lu.model.num_binaries(),
        constraints: lu.model.constraints().len(),
        ..SolveStats::default()
    };
    let values = match solver {
        SolverChoice::Builtin {
            node_limit,
            max_binaries,
            rel_gap,
        } => {
            let opts = SolverOptions {
                max_binaries: *max_binaries,
                rel_gap: *rel_gap,
                ..SolverOptions::default()
            };
            let sol = solve_milp(&lu.model, *node_limit, &opts)?;
            stats.nodes = sol.nodes;
            stats.lp_iterations = sol.lp_iterations;
            stats.proven = sol.status == Status::Optimal;
            stats.best_bound = sol.best_bound;
            log::debug!(
                "{}: {:?} after {} nodes, objective {}",
                cfg.name,
                sol.status,
                sol.nodes,
                sol.objective
            );
            match sol.status {
                Status::Optimal => sol.values,
                Status::Infeasible => {
                    return Err(DapError::Infeasible {
                        diagnostic: diagnose(cfg, grid)?,
                    })
                }
                Status::Unbounded => return Err(DapError::Unbounded),
                Status::NodeLimit if !sol.values.is_empty() => {
                    log::info!(
                        "{}: node limit reached, using incumbent {} (bound {})",
                        cfg.name,
                        sol.objective,
                        sol.best_bound
                    );
                    sol.values
                }
                Status::NodeLimit => return Err(DapError::NodeLimit { nodes: sol.nodes }),
            }
        }
        SolverChoice::LpFile { dir, command } => {
            let values = solve_external(cfg, &lu.model, dir, command.as_deref())?;
            // The bridge only accepts solutions the external solver reports
            // as optimal.
            stats.proven = true;
            stats.best_bound = lu.model.objective().eval(&values);
            values
        }
    };
    Ok(extract_plan(cfg, grid, &lu, &values, stats))
}

fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn solve_external(cfg: &LuConfig, model: &Model, dir: &Path, command: Option<&str>) -> Result<Vec<f64>, DapError> {
    std::fs::create_dir_all(dir).map_err(|source| DapError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let stem = file_stem(&cfg.name);
    let lp = dir.join(format!("{stem}.lp"));
    let sol = dir.join(format!("{stem}.sol"));
    write_lp_file(model, &lp)?;
    if let Some(template) = command {
        let _ = std::fs::remove_file(&sol);
        let cmd = template
            .replace("{lp}", &lp.display().to_string())
            .replace("{sol}", &sol.display().to_string());
        let status = Command::new("sh")
            .arg("-c")
            .arg(&cmd)
            .status()
            .map_err(|e| DapError::External(format!("cannot run '{cmd}': {e}")))?;
        if !status.success() {
            return Err(DapError::External(format!("'{cmd}' exited with {status}")));
        }
    }
    if !sol.exists() {
        return Err(DapError::External(format!(
            "no solution file {} (model written to {})",
            sol.display(),
            lp.display()
        )));
    }
    Ok(read_solution_file(&sol, model)?.values)
}

/// Explains an infeasible LU by solving the LP relaxation with elastic
/// slacks on the uncertainty-coverage rows.
pub fn diagnose(cfg: &LuConfig, grid: &TimeGrid) -> Result<String, DapError> {
    let lu = build(cfg, grid, true)?;
    let sol = solve_lp(&lu.model, &SolverOptions::default())?;
    if sol.status != Status::Optimal {
        return Ok(format!(
            "infeasible even without uncertainty coverage (relaxation {:?})",
            sol.status
        ));
    }
    let (up, dn) = lu.elastic.as_ref().expect("elastic build");
    let mut lines = Vec::new();
    for k in 0..grid.steps() {
        let (su, sd) = (sol.value(up[k]), sol.value(dn[k]));
        if su > 1e-7 || sd > 1e-7 {
            lines.push(format!(
                "step {k}: coverage needs {:.4} kW, short by {:.4} kW up / {:.4} kW down",
                lu.unc_requirement[k], su, sd
            ));
        }
    }
    if lines.is_empty() {
        Ok("uncertainty coverage is satisfiable in the relaxation; binary device logic is infeasible".into())
    } else {
        Ok(lines.join("; "))
    }
}
