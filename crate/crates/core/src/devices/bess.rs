use dap_milp::{LinExpr, Model, Relation, VarId};

use super::{DeviceEmission, ReserveSplit};
use crate::error::DapError;
use crate::types::TimeGrid;

#[derive(Clone, Debug)]
pub struct BessParams {
    pub name: String,
    pub e_nom: f64,
    /// Charging efficiency, at most 1.
    pub eta_ch: f64,
    /// Discharging efficiency, at least 1 (applied to negative power).
    pub eta_dsc: f64,
    pub p_max_ch: f64,
    /// Discharge limit, non-positive.
    pub p_min_dsc: f64,
    pub soc_min: f64,
    pub soc_max: f64,
    pub soc0: f64,
    /// Daily charge and discharge cycle caps.
    pub l_ch: f64,
    pub l_dsc: f64,
}

impl BessParams {
    pub fn validate(&self) -> Result<(), DapError> {
        let bad = |msg: &str| Err(DapError::params(&self.name, msg));
        if !(self.e_nom > 0.0) {
            return bad("e_nom must be positive");
        }
        if !(self.eta_ch > 0.0 && self.eta_ch <= 1.0) || !(self.eta_dsc >= 1.0) {
            return bad("need 0 < eta_ch <= 1 and eta_dsc >= 1");
        }
        if !(self.p_min_dsc <= 0.0 && 0.0 <= self.p_max_ch) {
            return bad("need p_min_dsc <= 0 <= p_max_ch");
        }
        if !(self.soc_min <= self.soc0 && self.soc0 <= self.soc_max) {
            return bad("need soc_min <= soc0 <= soc_max");
        }
        if !(self.l_ch >= 0.0 && self.l_dsc >= 0.0) {
            return bad("cycle caps must be non-negative");
        }
        Ok(())
    }

    /// One step of the SoC recursion.
    pub fn next_soc(&self, soc: f64, p_ch: f64, p_dsc: f64, dt: f64) -> f64 {
        soc + dt / self.e_nom * (self.eta_ch * p_ch + self.eta_dsc * p_dsc)
    }

    /// SoC trajectory of length `T + 1` starting from `soc0`.
    pub fn trajectory(&self, p_ch: &[f64], p_dsc: &[f64], dt: f64) -> Vec<f64> {
        let mut soc = vec![self.soc0];
        for k in 0..p_ch.len() {
            soc.push(self.next_soc(soc[k], p_ch[k], p_dsc[k], dt));
        }
        soc
    }

    pub fn charge_cycles(&self, p_ch: &[f64], dt: f64) -> f64 {
        self.eta_ch * dt / self.e_nom * p_ch.iter().sum::<f64>()
    }

    pub fn discharge_cycles(&self, p_dsc: &[f64], dt: f64) -> f64 {
        -self.eta_dsc * dt / self.e_nom * p_dsc.iter().sum::<f64>()
    }
}

/// Variables of one BESS. `up_*`/`dn_*` are the maximal variations that
/// produce the over-bound and under-bound SoC trajectories.
#[derive(Clone, Debug)]
pub struct BessVars {
    pub p_ch: Vec<VarId>,
    pub p_dsc: Vec<VarId>,
    pub x_ch: Vec<VarId>,
    pub x_dsc: Vec<VarId>,
    pub up_ch: Vec<VarId>,
    pub up_dsc: Vec<VarId>,
    pub dn_ch: Vec<VarId>,
    pub dn_dsc: Vec<VarId>,
    pub xu_ch: Vec<VarId>,
    pub xu_dsc: Vec<VarId>,
    pub xd_ch: Vec<VarId>,
    pub xd_dsc: Vec<VarId>,
    pub split: ReserveSplit,
    /// Base, over-bound and under-bound SoC, each of length `T + 1`.
    pub soc: Vec<LinExpr>,
    pub soc_up: Vec<LinExpr>,
    pub soc_dn: Vec<LinExpr>,
}

pub fn emit_bess(
    model: &mut Model,
    p: &BessParams,
    grid: &TimeGrid,
) -> Result<DeviceEmission<BessVars>, DapError> {
    p.validate()?;
    let steps = grid.steps();
    let dt = grid.dt();
    let tag = &p.name;
    let (pmax, pmin) = (p.p_max_ch, p.p_min_dsc);
    let mut col = |lo: f64, hi: f64, name: &str| -> Vec<VarId> {
        (0..steps)
            .map(|k| model.continuous(lo, hi, format!("{tag}.{name}[{k}]")))
            .collect()
    };
    let p_ch = col(0.0, pmax, "p_ch");
    let p_dsc = col(pmin, 0.0, "p_dsc");
    let up_ch = col(0.0, pmax, "up_ch");
    let up_dsc = col(0.0, -pmin, "up_dsc");
    let dn_ch = col(-pmax, 0.0, "dn_ch");
    let dn_dsc = col(pmin, 0.0, "dn_dsc");
    let mut bins = |name: &str| -> Vec<VarId> {
        (0..steps).map(|k| model.binary(format!("{tag}.{name}[{k}]"))).collect()
    };
    let x_ch = bins("x_ch");
    let x_dsc = bins("x_dsc");
    let xu_ch = bins("xu_ch");
    let xu_dsc = bins("xu_dsc");
    let xd_ch = bins("xd_ch");
    let xd_dsc = bins("xd_dsc");
    let span = pmax - pmin;
    let split = ReserveSplit::new(model, tag, &vec![span; steps], &vec![span; steps]);

    let mut rows: Vec<(LinExpr, Relation, f64, String)> = Vec::new();
    let mut push = |e: LinExpr, rel, rhs, name: &str, k: usize| {
        rows.push((e, rel, rhs, format!("{tag}.{name}[{k}]")));
    };
    for k in 0..steps {
        // Base operation.
        push(p_ch[k] - x_ch[k] * pmax, Relation::Le, 0.0, "ch_max", k);
        push(p_dsc[k] - x_dsc[k] * pmin, Relation::Ge, 0.0, "dsc_min", k);
        push(x_ch[k] + x_dsc[k], Relation::Le, 1.0, "mode", k);
        // Over-bound trajectory.
        push(p_ch[k] + up_ch[k] - xu_ch[k] * pmax, Relation::Le, 0.0, "up_ch_max", k);
        push(p_dsc[k] + up_dsc[k], Relation::Le, 0.0, "up_dsc_sign", k);
        push(p_dsc[k] + up_dsc[k] - xu_dsc[k] * pmin, Relation::Ge, 0.0, "up_dsc_min", k);
        push(xu_ch[k] + xu_dsc[k], Relation::Le, 1.0, "up_mode", k);
        // Under-bound trajectory.
        push(p_ch[k] + dn_ch[k], Relation::Ge, 0.0, "dn_ch_sign", k);
        push(p_ch[k] + dn_ch[k] - xd_ch[k] * pmax, Relation::Le, 0.0, "dn_ch_max", k);
        push(p_dsc[k] + dn_dsc[k] - xd_dsc[k] * pmin, Relation::Ge, 0.0, "dn_dsc_min", k);
        push(xd_ch[k] + xd_dsc[k], Relation::Le, 1.0, "dn_mode", k);
        // flx/unc split of the variations.
        push(
            split.up_flx[k] + split.up_unc[k] - up_ch[k] - up_dsc[k],
            Relation::Eq,
            0.0,
            "up_split",
            k,
        );
        push(
            split.dn_flx[k] + split.dn_unc[k] - dn_ch[k] - dn_dsc[k],
            Relation::Eq,
            0.0,
            "dn_split",
            k,
        );
    }

    let a_ch = dt / p.e_nom * p.eta_ch;
    let a_dsc = dt / p.e_nom * p.eta_dsc;
    let trajectory = |extra_ch: Option<&[VarId]>, extra_dsc: Option<&[VarId]>| {
        let mut out = vec![LinExpr::constant(p.soc0)];
        for k in 0..steps {
            let mut next = out[k].clone() + p_ch[k] * a_ch + p_dsc[k] * a_dsc;
            if let Some(e) = extra_ch {
                next += e[k] * a_ch;
            }
            if let Some(e) = extra_dsc {
                next += e[k] * a_dsc;
            }
            out.push(next);
        }
        out
    };
    let soc = trajectory(None, None);
    let soc_up = trajectory(Some(&up_ch), Some(&up_dsc));
    let soc_dn = trajectory(Some(&dn_ch), Some(&dn_dsc));
    for k in 1..=steps {
        push(soc_up[k].clone(), Relation::Le, p.soc_max, "soc_up_max", k);
        push(soc_dn[k].clone(), Relation::Ge, p.soc_min, "soc_dn_min", k);
    }
    let charged = LinExpr::sum((0..steps).map(|k| (p_ch[k] + up_ch[k]) * a_ch));
    push(charged, Relation::Le, p.l_ch, "cycles_ch", 0);
    let discharged = LinExpr::sum((0..steps).map(|k| (p_dsc[k] + dn_dsc[k]) * -a_dsc));
    push(discharged, Relation::Le, p.l_dsc, "cycles_dsc", 0);
    for (e, rel, rhs, label) in rows {
        model.add_constraint(e, rel, rhs, label)?;
    }

    let power = (0..steps).map(|k| p_ch[k] + p_dsc[k]).collect();
    let [flx_up, flx_dn, unc_up, unc_dn] = split.exprs();
    Ok(DeviceEmission {
        power,
        flx_up,
        flx_dn,
        unc_up,
        unc_dn,
        vars: BessVars {
            p_ch,
            p_dsc,
            x_ch,
            x_dsc,
            up_ch,
            up_dsc,
            dn_ch,
            dn_dsc,
            xu_ch,
            xu_dsc,
            xd_ch,
            xd_dsc,
            split,
            soc,
            soc_up,
            soc_dn,
        },
    })
}
