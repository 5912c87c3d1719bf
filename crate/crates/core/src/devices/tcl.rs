use dap_milp::{LinExpr, Model, Relation, VarId};

use super::{mask, quantile_gauss, DeviceEmission, ReserveSplit};
use crate::error::DapError;
use crate::types::{Forecast, Profile, TimeGrid, Unit};

/// Cooling unit with first-order RC dynamics.
#[derive(Clone, Debug)]
pub struct TclParams {
    pub name: String,
    /// Thermal resistance [degC/kW].
    pub r: f64,
    /// Thermal capacitance [kWh/degC].
    pub c: f64,
    pub eta_c: f64,
    pub p_max: f64,
    pub theta_min: f64,
    pub theta_max: f64,
    pub theta0: f64,
    pub up: Profile,
    pub ext: Forecast,
}

impl TclParams {
    pub fn alpha(&self, dt: f64) -> f64 {
        (-dt / (self.c * self.r)).exp()
    }

    pub fn validate(&self, grid: &TimeGrid) -> Result<Vec<bool>, DapError> {
        let name = &self.name;
        if !(self.r > 0.0 && self.c > 0.0 && self.eta_c > 0.0 && self.p_max > 0.0) {
            return Err(DapError::params(name, "R, C, eta_c and p_max must be positive"));
        }
        if !(self.theta_min < self.theta_max) {
            return Err(DapError::params(name, "empty comfort band"));
        }
        self.ext.check(grid, Unit::Celsius, &format!("{name} external temperature"))?;
        mask(&self.up, grid, name)
    }

    /// One step of the thermal recursion.
    pub fn next_theta(&self, theta: f64, p: f64, ext: f64, dt: f64) -> f64 {
        let a = self.alpha(dt);
        let b = 1.0 - a;
        a * theta - b * self.r * self.eta_c * p + b * ext
    }

    /// Temperature trajectory of length `T + 1` starting from `theta0`.
    pub fn trajectory(&self, p: &[f64], ext: &[f64], dt: f64) -> Vec<f64> {
        let mut th = vec![self.theta0];
        for k in 0..p.len() {
            th.push(self.next_theta(th[k], p[k], ext[k], dt));
        }
        th
    }

    /// Comfort bounds at step `k >= 1` after chance-constraint tightening.
    pub fn tightened_band(&self, k: usize, q: f64) -> (f64, f64) {
        let margin = self.ext.sigma.get(k - 1) * q;
        (self.theta_min + margin, self.theta_max - margin)
    }
}

#[derive(Clone, Debug)]
pub struct TclVars {
    pub p: Vec<VarId>,
    pub x: Vec<VarId>,
    pub up: Vec<VarId>,
    pub dn: Vec<VarId>,
    pub split: ReserveSplit,
    /// Base temperature under the mean forecast, length `T + 1`.
    pub theta: Vec<LinExpr>,
    /// Over-bound temperature (driven by the downward variation).
    pub theta_over: Vec<LinExpr>,
    /// Under-bound temperature (driven by the upward variation).
    pub theta_under: Vec<LinExpr>,
}

pub fn emit_tcl(
    model: &mut Model,
    p: &TclParams,
    grid: &TimeGrid,
    r: f64,
) -> Result<DeviceEmission<TclVars>, DapError> {
    let up = p.validate(grid)?;
    let q = quantile_gauss(r)?;
    let steps = grid.steps();
    let dt = grid.dt();
    for k in 1..=steps {
        let (lo, hi) = p.tightened_band(k, q);
        if lo > hi {
            return Err(DapError::params(
                &p.name,
                format!("comfort band narrower than the tightening at step {k}"),
            ));
        }
    }
    let tag = &p.name;
    let cap: Vec<f64> = up.iter().map(|&u| if u { p.p_max } else { 0.0 }).collect();
    let mut vars = TclVars {
        p: Vec::new(),
        x: Vec::new(),
        up: Vec::new(),
        dn: Vec::new(),
        split: ReserveSplit::new(model, tag, &cap, &cap),
        theta: Vec::new(),
        theta_over: Vec::new(),
        theta_under: Vec::new(),
    };
    for k in 0..steps {
        let pk = model.continuous(0.0, cap[k], format!("{tag}.p[{k}]"));
        let xk = model.binary_masked(up[k], format!("{tag}.x[{k}]"));
        let upk = model.continuous(0.0, cap[k], format!("{tag}.up[{k}]"));
        let dnk = model.continuous(-cap[k], 0.0, format!("{tag}.dn[{k}]"));
        model.add_constraint(pk - xk * p.p_max, Relation::Le, 0.0, format!("{tag}.pmax[{k}]"))?;
        model.add_constraint(
            pk + upk - xk * p.p_max,
            Relation::Le,
            0.0,
            format!("{tag}.up_max[{k}]"),
        )?;
        model.add_constraint(pk + dnk, Relation::Ge, 0.0, format!("{tag}.dn_min[{k}]"))?;
        let s = &vars.split;
        model.add_constraint(
            s.up_flx[k] + s.up_unc[k] - upk,
            Relation::Eq,
            0.0,
            format!("{tag}.up_split[{k}]"),
        )?;
        model.add_constraint(
            s.dn_flx[k] + s.dn_unc[k] - dnk,
            Relation::Eq,
            0.0,
            format!("{tag}.dn_split[{k}]"),
        )?;
        vars.p.push(pk);
        vars.x.push(xk);
        vars.up.push(upk);
        vars.dn.push(dnk);
    }

    let a = p.alpha(dt);
    let b = 1.0 - a;
    let gain = -b * p.r * p.eta_c;
    let ext = p.ext.mean.values();
    let trajectory = |extra: Option<&[VarId]>| {
        let mut out = vec![LinExpr::constant(p.theta0)];
        for k in 0..steps {
            let mut next = out[k].clone().scaled(a) + vars.p[k] * gain;
            next.add_constant(b * ext[k]);
            if let Some(e) = extra {
                next += e[k] * gain;
            }
            out.push(next);
        }
        out
    };
    let theta = trajectory(None);
    let theta_over = trajectory(Some(&vars.dn));
    let theta_under = trajectory(Some(&vars.up));
    for k in 1..=steps {
        let (lo, hi) = p.tightened_band(k, q);
        model.add_constraint(theta_over[k].clone(), Relation::Le, hi, format!("{tag}.comfort_max[{k}]"))?;
        model.add_constraint(theta_under[k].clone(), Relation::Ge, lo, format!("{tag}.comfort_min[{k}]"))?;
    }
    vars.theta = theta;
    vars.theta_over = theta_over;
    vars.theta_under = theta_under;

    let power = vars.p.iter().map(|&v| v.into()).collect();
    let [flx_up, flx_dn, unc_up, unc_dn] = vars.split.exprs();
    Ok(DeviceEmission {
        power,
        flx_up,
        flx_dn,
        unc_up,
        unc_dn,
        vars,
    })
}
