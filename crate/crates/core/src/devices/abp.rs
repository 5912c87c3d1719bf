use dap_milp::{LinExpr, Model, Relation, VarId};

use super::{fixed_binary, mask, DeviceEmission};
use crate::error::DapError;
use crate::types::{Profile, TimeGrid};

/// Appliance with ordered, uninterruptible phases.
#[derive(Clone, Debug)]
pub struct AbpParams {
    pub name: String,
    /// Energy per phase [kWh].
    pub energy: Vec<f64>,
    /// Active steps per phase.
    pub duration: Vec<usize>,
    pub p_min: Vec<f64>,
    pub p_max: Vec<f64>,
    /// Maximal idle steps before phase j; entry 0 is ignored.
    pub max_delay: Vec<usize>,
    pub up: Profile,
}

impl AbpParams {
    pub fn n_phases(&self) -> usize {
        self.energy.len()
    }

    pub fn validate(&self, grid: &TimeGrid) -> Result<Vec<bool>, DapError> {
        let n = self.n_phases();
        let name = &self.name;
        if n == 0 {
            return Err(DapError::params(name, "no phases"));
        }
        for (what, len) in [
            ("duration", self.duration.len()),
            ("p_min", self.p_min.len()),
            ("p_max", self.p_max.len()),
            ("max_delay", self.max_delay.len()),
        ] {
            if len != n {
                return Err(DapError::params(name, format!("{what} has {len} entries, expected {n}")));
            }
        }
        let up = mask(&self.up, grid, name)?;
        let dt = grid.dt();
        for j in 0..n {
            let (e, d) = (self.energy[j], self.duration[j] as f64);
            if !(0.0 <= self.p_min[j] && self.p_min[j] <= self.p_max[j]) || e < 0.0 {
                return Err(DapError::params(name, format!("phase {}: bad power limits", j + 1)));
            }
            if e > self.p_max[j] * d * dt + 1e-9 || e < self.p_min[j] * d * dt - 1e-9 {
                return Err(DapError::params(
                    name,
                    format!(
                        "phase {}: {e} kWh not reachable in {} steps within [{}, {}] kW",
                        j + 1,
                        self.duration[j],
                        self.p_min[j],
                        self.p_max[j]
                    ),
                ));
            }
        }
        let need: usize = self.duration.iter().sum();
        let avail = up.iter().filter(|&&u| u).count();
        if need > avail {
            return Err(DapError::params(
                name,
                format!("phases need {need} steps, UP allows {avail}"),
            ));
        }
        Ok(up)
    }
}

/// Variables of one ABP, indexed `[phase][step]`.
#[derive(Clone, Debug)]
pub struct AbpVars {
    pub p: Vec<Vec<VarId>>,
    pub x: Vec<Vec<VarId>>,
    pub s: Vec<Vec<VarId>>,
    /// Transition indicators; `None` for the first phase.
    pub t: Vec<Option<Vec<VarId>>>,
}

impl AbpVars {
    /// Total ABP power per step.
    pub fn power(&self, values: &[f64]) -> Vec<f64> {
        let steps = self.p[0].len();
        (0..steps)
            .map(|k| self.p.iter().map(|ph| values[ph[k].index()]).sum())
            .collect()
    }
}

pub fn emit_abp(
    model: &mut Model,
    p: &AbpParams,
    grid: &TimeGrid,
) -> Result<DeviceEmission<AbpVars>, DapError> {
    let up = p.validate(grid)?;
    let steps = grid.steps();
    let dt = grid.dt();
    let first_up = up.iter().position(|&u| u).unwrap_or(steps);
    let last_up = up.iter().rposition(|&u| u).unwrap_or(0);
    let tag = &p.name;

    let mut vars = AbpVars {
        p: Vec::new(),
        x: Vec::new(),
        s: Vec::new(),
        t: Vec::new(),
    };
    for j in 0..p.n_phases() {
        let mut pj = Vec::with_capacity(steps);
        let mut xj = Vec::with_capacity(steps);
        let mut sj = Vec::with_capacity(steps);
        for k in 0..steps {
            let hi = if up[k] { p.p_max[j] } else { 0.0 };
            pj.push(model.continuous(0.0, hi, format!("{tag}.p[{j}][{k}]")));
            xj.push(model.binary_masked(up[k], format!("{tag}.x[{j}][{k}]")));
            // A phase with work to do cannot be finished before the window
            // opens and must be finished once it has closed.
            let label = format!("{tag}.s[{j}][{k}]");
            sj.push(if p.duration[j] > 0 && k <= first_up {
                fixed_binary(model, 0.0, label)
            } else if p.duration[j] > 0 && k > last_up {
                fixed_binary(model, 1.0, label)
            } else {
                model.binary(label)
            });
        }
        vars.p.push(pj);
        vars.x.push(xj);
        vars.s.push(sj);
    }
    for j in 0..p.n_phases() {
        if j == 0 {
            vars.t.push(None);
            continue;
        }
        // The transition row pins t to s[j-1] - x - s, so t is integral
        // whenever the binaries are and needs no branching of its own.
        let both_fixed = p.duration[j] > 0 && p.duration[j - 1] > 0;
        let tj = (0..steps)
            .map(|k| {
                let hi = if both_fixed && (k <= first_up || k > last_up) { 0.0 } else { 1.0 };
                model.continuous(0.0, hi, format!("{tag}.t[{j}][{k}]"))
            })
            .collect();
        vars.t.push(Some(tj));
    }

    let row = |model: &mut Model, e: LinExpr, rel, rhs, label: String| {
        model.add_constraint(e, rel, rhs, label).map(|_| ())
    };
    for j in 0..p.n_phases() {
        let (pj, xj, sj) = (&vars.p[j], &vars.x[j], &vars.s[j]);
        let energy = LinExpr::sum(pj.iter().map(|&v| v * dt));
        row(model, energy, Relation::Eq, p.energy[j], format!("{tag}.energy[{j}]"))?;
        let on = LinExpr::sum(xj.iter().map(|&v| v.into()));
        row(model, on, Relation::Eq, p.duration[j] as f64, format!("{tag}.duration[{j}]"))?;
        for k in 0..steps {
            row(model, pj[k] - xj[k] * p.p_max[j], Relation::Le, 0.0, format!("{tag}.pmax[{j}][{k}]"))?;
            if p.p_min[j] > 0.0 {
                row(model, pj[k] - xj[k] * p.p_min[j], Relation::Ge, 0.0, format!("{tag}.pmin[{j}][{k}]"))?;
            }
            row(model, xj[k] + sj[k], Relation::Le, 1.0, format!("{tag}.excl[{j}][{k}]"))?;
            if k > 0 {
                row(
                    model,
                    xj[k - 1] - xj[k] - sj[k],
                    Relation::Le,
                    0.0,
                    format!("{tag}.stop[{j}][{k}]"),
                )?;
                row(model, sj[k - 1] - sj[k], Relation::Le, 0.0, format!("{tag}.done[{j}][{k}]"))?;
            }
            if j > 0 {
                let prev = vars.s[j - 1][k];
                row(model, xj[k] - prev, Relation::Le, 0.0, format!("{tag}.order[{j}][{k}]"))?;
                let t = vars.t[j].as_ref().expect("phase > 0 has transitions")[k];
                row(
                    model,
                    t - prev + xj[k] + sj[k],
                    Relation::Eq,
                    0.0,
                    format!("{tag}.trans[{j}][{k}]"),
                )?;
            }
        }
        if let Some(tj) = &vars.t[j] {
            let idle = LinExpr::sum(tj.iter().map(|&v| v.into()));
            row(model, idle, Relation::Le, p.max_delay[j] as f64, format!("{tag}.delay[{j}]"))?;
        }
    }

    let power = (0..steps)
        .map(|k| LinExpr::sum(vars.p.iter().map(|ph| ph[k].into())))
        .collect();
    Ok(DeviceEmission::without_reserve(power, vars))
}
