//! Orchestration: plan every LU, aggregate, dispatch, simulate, export.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::aggregator::{aggregate, dispatch, request_from_fractions, AggregatePlan, DispatchSignal};
use crate::audit::{audit_plan, AuditReport};
use crate::error::DapError;
use crate::intraday::{realize, run_fleet, FleetReport};
use crate::lu_dap::{solve_lu_dap, LuConfig, LuPlan, SolverChoice};
use crate::scenario::{generate_fleet, ScenarioSpec};
use crate::types::{Profile, TimeGrid, Unit};

/// Audit tolerance for plans coming out of the solver.
pub const AUDIT_TOL: f64 = 1e-5;

/// How far the pipeline runs.
#[derive(Clone, Debug, PartialEq)]
pub enum Stage {
    Plan,
    /// Dispatch an explicit request [kWh], or the scenario's DR fractions.
    Dispatch(Option<Profile>),
    Simulate { runs: usize },
}

#[derive(Clone, Debug)]
pub struct PipelineOutput {
    pub grid: TimeGrid,
    pub fleet: Vec<LuConfig>,
    pub plans: Vec<LuPlan>,
    pub audits: Vec<AuditReport>,
    pub agg: AggregatePlan,
    pub signal: Option<DispatchSignal>,
    pub sim: Option<FleetReport>,
}

impl PipelineOutput {
    /// Plan-audit failures plus simulated hard violations.
    pub fn hard_violations(&self) -> usize {
        let audit = self.audits.iter().filter(|a| !a.is_clean(AUDIT_TOL)).count();
        audit + self.sim.as_ref().map_or(0, |s| s.violations.hard())
    }
}

/// Solves every LU concurrently; results keep fleet order.
pub fn plan_fleet(fleet: &[LuConfig], grid: &TimeGrid, solver: &SolverChoice) -> Result<Vec<LuPlan>, DapError> {
    fleet
        .par_iter()
        .enumerate()
        .map(|(index, cfg)| {
            solve_lu_dap(cfg, grid, solver).map_err(|e| DapError::Lu {
                index,
                source: Box::new(e),
            })
        })
        .collect()
}

/// Seed of Monte Carlo run `i`.
pub fn run_seed(base: u64, i: usize) -> u64 {
    base.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i as u64 + 1)
}

pub fn run_pipeline(spec: &ScenarioSpec, stage: &Stage, solver: &SolverChoice) -> Result<PipelineOutput, DapError> {
    let grid = spec.grid()?;
    let fleet = generate_fleet(spec)?;
    let plans = plan_fleet(&fleet, &grid, solver)?;
    let audits: Vec<AuditReport> = fleet
        .iter()
        .zip(&plans)
        .map(|(c, p)| audit_plan(p, c, &grid))
        .collect();
    for (c, a) in fleet.iter().zip(&audits) {
        for (family, v) in a.failures(AUDIT_TOL) {
            log::warn!("{}: plan audit {family} violated by {v:.3e}", c.name);
        }
    }
    let prices = spec.prices.price_set(&grid);
    let agg = aggregate(&plans, &prices)?;
    let mut out = PipelineOutput {
        grid,
        fleet,
        plans,
        audits,
        agg,
        signal: None,
        sim: None,
    };
    let request = match stage {
        Stage::Plan => return Ok(out),
        Stage::Dispatch(Some(r)) => r.clone(),
        Stage::Dispatch(None) | Stage::Simulate { .. } => {
            request_from_fractions(&out.agg, &spec.dr_fractions())
        }
    };
    let signal = dispatch(&out.agg, &out.plans, &request)?;
    if let Stage::Simulate { runs } = stage {
        let reals: Vec<_> = (0..*runs)
            .map(|i| realize(&out.fleet, &grid, run_seed(spec.seed, i)))
            .collect();
        out.sim = Some(run_fleet(&out.fleet, &out.plans, &signal, &reals, &grid)?);
    }
    out.signal = Some(signal);
    Ok(out)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DapError + '_ {
    move |source| DapError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> DapError + '_ {
    move |e| DapError::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e.to_string()),
    }
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), DapError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(header).map_err(csv_err(path))?;
    for r in rows {
        w.write_record(&r).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Writes the CSV artifacts and the summary; returns the written paths.
pub fn write_outputs(out: &PipelineOutput, dir: &Path) -> Result<Vec<PathBuf>, DapError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let steps = out.grid.steps();
    let mut written = Vec::new();
    for p in &out.plans {
        let path = dir.join(format!("plan_{}.csv", p.name));
        write_csv(
            &path,
            &["step", "E_hat_kWh", "dE_up_kWh", "dE_dn_kWh", "E_imp_kWh", "E_exp_kWh"],
            (0..steps).map(|k| {
                vec![
                    k.to_string(),
                    p.e_hat.get(k).to_string(),
                    p.de_up.get(k).to_string(),
                    p.de_dn.get(k).to_string(),
                    p.e_imp.get(k).to_string(),
                    p.e_exp.get(k).to_string(),
                ]
            }),
        )?;
        written.push(path);
    }
    let path = dir.join("agg.csv");
    let a = &out.agg;
    write_csv(
        &path,
        &["step", "E_agt", "dE_up_agt", "dE_dn_agt"],
        (0..steps).map(|k| {
            vec![
                k.to_string(),
                a.e_agt.get(k).to_string(),
                a.de_up_agt.get(k).to_string(),
                a.de_dn_agt.get(k).to_string(),
            ]
        }),
    )?;
    written.push(path);

    if let Some(sig) = &out.signal {
        let path = dir.join("dispatch.csv");
        let mut header = vec!["step".to_string(), "dE_agt_ref".to_string()];
        header.extend(out.plans.iter().map(|p| p.name.clone()));
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        write_csv(
            &path,
            &header,
            (0..steps).map(|k| {
                let mut r = vec![k.to_string(), sig.request.get(k).to_string()];
                r.extend(sig.shares.iter().map(|s| s.get(k).to_string()));
                r
            }),
        )?;
        written.push(path);
    }

    if let Some(sim) = &out.sim {
        let path = dir.join("sim.csv");
        let mut rows = Vec::new();
        for run in &sim.runs {
            for k in 0..steps {
                for (day, p) in run.lus.iter().zip(&out.plans) {
                    rows.push(vec![
                        run.seed.to_string(),
                        k.to_string(),
                        p.name.clone(),
                        day.realized_kwh[k].to_string(),
                        day.imbalance_kwh[k].to_string(),
                        day.comfort_violation[k].to_string(),
                        day.soc_violation[k].to_string(),
                    ]);
                }
            }
        }
        write_csv(
            &path,
            &["seed", "step", "lu", "realized_kWh", "imbalance_kWh", "comfort_violation", "soc_violation"],
            rows,
        )?;
        written.push(path);
    }

    let path = dir.join("summary.txt");
    fs::write(&path, summary(out)).map_err(io_err(&path))?;
    written.push(path);
    Ok(written)
}

pub fn summary(out: &PipelineOutput) -> String {
    let mut s = String::new();
    let a = &out.agg;
    let _ = writeln!(s, "houses             {}", out.plans.len());
    let _ = writeln!(s, "steps              {} x {} h", out.grid.steps(), out.grid.dt());
    let _ = writeln!(s, "energy_kWh         {}", a.e_agt.sum());
    let _ = writeln!(s, "reserve_up_kWh     {}", a.de_up_agt.sum());
    let _ = writeln!(s, "reserve_dn_kWh     {}", a.de_dn_agt.sum());
    let _ = writeln!(s, "agg_income_EUR     {}", a.income);
    let proven = out.plans.iter().filter(|p| p.stats.proven).count();
    let _ = writeln!(s, "proven_optimal     {proven}/{}", out.plans.len());
    for (p, au) in out.plans.iter().zip(&out.audits) {
        let _ = writeln!(
            s,
            "lu {} objective {} bound {} nodes {} audit_max {:e}",
            p.name,
            p.objective,
            p.stats.best_bound,
            p.stats.nodes,
            au.max_violation()
        );
    }
    if let Some(sim) = &out.sim {
        let v = &sim.violations;
        let _ = writeln!(s, "runs               {}", sim.runs.len());
        let _ = writeln!(s, "max_delivery_gap   {}", sim.max_delivery_gap);
        for (name, t) in [
            ("soc", v.soc),
            ("cycles", v.cycles),
            ("device_power", v.device_power),
            ("lu_cap", v.lu_cap),
            ("comfort", v.comfort),
            ("imbalance", v.imbalance),
        ] {
            let _ = writeln!(s, "viol_{name:<14} count {} max {}", t.count, t.max);
        }
    }
    let _ = writeln!(s, "hard_violations    {}", out.hard_violations());
    s
}

/// Reads a DR request file with columns `step,dE_ref_kWh`.
pub fn read_request(path: &Path, grid: &TimeGrid) -> Result<Profile, DapError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let bad = |msg: String| DapError::Scenario {
        path: path.to_path_buf(),
        msg,
    };
    let mut values = vec![f64::NAN; grid.steps()];
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        if rec.len() < 2 {
            return Err(bad(format!("row {}: expected step,dE_ref_kWh", line + 2)));
        }
        let k: usize = rec[0].trim().parse().map_err(|e| bad(format!("row {}: step: {e}", line + 2)))?;
        let v: f64 = rec[1].trim().parse().map_err(|e| bad(format!("row {}: value: {e}", line + 2)))?;
        if k >= values.len() {
            return Err(bad(format!("row {}: step {k} beyond the horizon", line + 2)));
        }
        values[k] = v;
    }
    if let Some(k) = values.iter().position(|v| v.is_nan()) {
        return Err(bad(format!("no value for step {k}")));
    }
    Ok(Profile::new(values, Unit::Kwh))
}
