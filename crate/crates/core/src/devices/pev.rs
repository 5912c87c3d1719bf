use dap_milp::{LinExpr, Model, Relation, VarId};

use super::{mask, DeviceEmission};
use crate::error::DapError;
use crate::types::{Profile, TimeGrid};

#[derive(Clone, Debug)]
pub struct PevParams {
    pub name: String,
    /// Nominal battery energy [kWh].
    pub e_nom: f64,
    /// Recharge efficiency, at most 1.
    pub eta: f64,
    pub p_max: f64,
    /// Required recharge as a fraction of `e_nom`.
    pub dsoc: f64,
    pub up: Profile,
}

impl PevParams {
    /// Grid-side energy needed to meet the recharge target [kWh].
    pub fn required_energy(&self) -> f64 {
        self.dsoc * self.e_nom / self.eta
    }

    pub fn validate(&self, grid: &TimeGrid) -> Result<Vec<bool>, DapError> {
        let name = &self.name;
        if !(0.0..=1.0).contains(&self.dsoc) {
            return Err(DapError::params(name, format!("dSoC {} outside [0, 1]", self.dsoc)));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) || !(self.e_nom > 0.0) || !(self.p_max >= 0.0) {
            return Err(DapError::params(name, "need 0 < eta <= 1, e_nom > 0, p_max >= 0"));
        }
        let up = mask(&self.up, grid, name)?;
        let window = up.iter().filter(|&&u| u).count() as f64;
        let deliverable = self.p_max * grid.dt() * window;
        if self.required_energy() > deliverable + 1e-9 {
            return Err(DapError::params(
                name,
                format!(
                    "recharge needs {:.4} kWh, plug-in window delivers at most {:.4} kWh",
                    self.required_energy(),
                    deliverable
                ),
            ));
        }
        Ok(up)
    }
}

#[derive(Clone, Debug)]
pub struct PevVars {
    pub p: Vec<VarId>,
    pub x: Vec<VarId>,
}

pub fn emit_pev(
    model: &mut Model,
    p: &PevParams,
    grid: &TimeGrid,
) -> Result<DeviceEmission<PevVars>, DapError> {
    let up = p.validate(grid)?;
    let tag = &p.name;
    let mut vars = PevVars {
        p: Vec::new(),
        x: Vec::new(),
    };
    for (k, &u) in up.iter().enumerate() {
        let hi = if u { p.p_max } else { 0.0 };
        let pk = model.continuous(0.0, hi, format!("{tag}.p[{k}]"));
        let xk = model.binary_masked(u, format!("{tag}.x[{k}]"));
        model.add_constraint(pk - xk * p.p_max, Relation::Le, 0.0, format!("{tag}.pmax[{k}]"))?;
        vars.p.push(pk);
        vars.x.push(xk);
    }
    let charged = LinExpr::sum(vars.p.iter().map(|&v| v * (grid.dt() * p.eta)));
    model.add_constraint(charged, Relation::Eq, p.dsoc * p.e_nom, format!("{tag}.energy"))?;
    let power = vars.p.iter().map(|&v| v.into()).collect();
    Ok(DeviceEmission::without_reserve(power, vars))
}
