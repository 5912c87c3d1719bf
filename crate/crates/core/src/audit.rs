//! Independent re-verification of an [`LuPlan`] against the raw device
//! parameters. Nothing here reads the MILP; trajectories are re-simulated
//! forward from the initial states.

use std::collections::BTreeMap;
use std::fmt;

use crate::devices::{emit_fixed, quantile_gauss};
use crate::lu_dap::{LuConfig, LuPlan};
use crate::types::TimeGrid;

/// Largest violation per constraint family (0 when satisfied).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AuditReport {
    pub families: BTreeMap<&'static str, f64>,
}

impl AuditReport {
    fn record(&mut self, family: &'static str, violation: f64) {
        let v = violation.max(0.0);
        let slot = self.families.entry(family).or_insert(0.0);
        if v > *slot || v.is_nan() {
            *slot = v;
        }
    }

    pub fn max_violation(&self) -> f64 {
        self.families.values().fold(0.0, |a, &b| if b.is_nan() { f64::INFINITY } else { a.max(b) })
    }

    pub fn is_clean(&self, tol: f64) -> bool {
        self.max_violation() <= tol
    }

    /// Families whose violation exceeds `tol`.
    pub fn failures(&self, tol: f64) -> Vec<(&'static str, f64)> {
        self.families
            .iter()
            .filter(|(_, &v)| !(v <= tol))
            .map(|(&k, &v)| (k, v))
            .collect()
    }
}

impl fmt::Display for AuditReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.families {
            writeln!(f, "{k:<16} {v:.3e}")?;
        }
        Ok(())
    }
}

fn outside(v: f64, lo: f64, hi: f64) -> f64 {
    (lo - v).max(v - hi).max(0.0)
}

/// Re-evaluates every constraint family of `plan` from `cfg`.
pub fn audit_plan(plan: &LuPlan, cfg: &LuConfig, grid: &TimeGrid) -> AuditReport {
    let mut rep = AuditReport::default();
    let steps = grid.steps();
    let dt = grid.dt();
    let q = quantile_gauss(cfg.r).unwrap_or(f64::NAN);
    let shape_ok = plan.e_hat.len() == steps
        && plan.abps.len() == cfg.abps.len()
        && plan.pevs.len() == cfg.pevs.len()
        && plan.besses.len() == cfg.besses.len()
        && plan.tcls.len() == cfg.tcls.len();
    rep.record("shape", if shape_ok { 0.0 } else { f64::INFINITY });
    if !shape_ok {
        return rep;
    }

    // Device power from the schedules plus the fixed profiles.
    let fixed = match emit_fixed(&cfg.fixed, grid) {
        Ok(f) => f,
        Err(_) => {
            rep.record("fixed", f64::INFINITY);
            return rep;
        }
    };
    let mut power = fixed.power.clone();
    let mut flx_up = vec![0.0; steps];
    let mut flx_dn = vec![0.0; steps];
    let mut unc_up = vec![0.0; steps];
    let mut unc_dn = vec![0.0; steps];

    for (a, s) in cfg.abps.iter().zip(&plan.abps) {
        audit_abp(&mut rep, a, s, grid);
        for k in 0..steps {
            power[k] += s.power(k);
        }
    }
    for (p, s) in cfg.pevs.iter().zip(&plan.pevs) {
        let mut energy = 0.0;
        for k in 0..steps {
            let cap = if p.up.get(k) > 0.5 { p.p_max } else { 0.0 };
            rep.record("pev_power", outside(s.power[k], 0.0, cap));
            energy += s.power[k] * dt;
            power[k] += s.power[k];
        }
        rep.record("pev_energy", (energy * p.eta - p.dsoc * p.e_nom).abs());
    }
    for (b, s) in cfg.besses.iter().zip(&plan.besses) {
        let (pmax, pmin) = (b.p_max_ch, b.p_min_dsc);
        let mut over_ch = Vec::with_capacity(steps);
        let mut over_dsc = Vec::with_capacity(steps);
        let mut under_ch = Vec::with_capacity(steps);
        let mut under_dsc = Vec::with_capacity(steps);
        for k in 0..steps {
            let (ch, dsc) = (s.p_ch[k], s.p_dsc[k]);
            let (uc, ud) = (ch + s.up_ch[k], dsc + s.up_dsc[k]);
            let (lc, ld) = (ch + s.dn_ch[k], dsc + s.dn_dsc[k]);
            for (c, d) in [(ch, dsc), (uc, ud), (lc, ld)] {
                rep.record("bess_power", outside(c, 0.0, pmax).max(outside(d, pmin, 0.0)));
                rep.record("bess_mode", c.min(-d));
            }
            // Variations only move power in their own direction.
            rep.record(
                "bess_direction",
                (-s.up_ch[k]).max(-s.up_dsc[k]).max(s.dn_ch[k]).max(s.dn_dsc[k]),
            );
            let up = s.up_ch[k] + s.up_dsc[k];
            let dn = s.dn_ch[k] + s.dn_dsc[k];
            rep.record("split", (s.split.up(k) - up).abs().max((s.split.dn(k) - dn).abs()));
            rep.record(
                "split_sign",
                [-s.split.up_flx[k], -s.split.up_unc[k], s.split.dn_flx[k], s.split.dn_unc[k]]
                    .into_iter()
                    .fold(0.0, f64::max),
            );
            flx_up[k] += s.split.up_flx[k];
            unc_up[k] += s.split.up_unc[k];
            flx_dn[k] += s.split.dn_flx[k];
            unc_dn[k] += s.split.dn_unc[k];
            power[k] += ch + dsc;
            over_ch.push(uc);
            over_dsc.push(ud);
            under_ch.push(lc);
            under_dsc.push(ld);
        }
        let base = b.trajectory(&s.p_ch, &s.p_dsc, dt);
        let over = b.trajectory(&over_ch, &over_dsc, dt);
        let under = b.trajectory(&under_ch, &under_dsc, dt);
        for (sim, reported) in [(&base, &s.soc), (&over, &s.soc_up), (&under, &s.soc_dn)] {
            for k in 0..=steps {
                rep.record("soc_bounds", outside(sim[k], b.soc_min, b.soc_max));
                rep.record("soc_trajectory", (sim[k] - reported[k]).abs());
            }
        }
        rep.record("bess_cycles", b.charge_cycles(&over_ch, dt) - b.l_ch);
        rep.record("bess_cycles", b.discharge_cycles(&under_dsc, dt) - b.l_dsc);
    }
    for (t, s) in cfg.tcls.iter().zip(&plan.tcls) {
        let ext = t.ext.mean.values();
        let mut hot = Vec::with_capacity(steps);
        let mut cold = Vec::with_capacity(steps);
        for k in 0..steps {
            let cap = if t.up.get(k) > 0.5 { t.p_max } else { 0.0 };
            let (p, u, d) = (s.p[k], s.up[k], s.dn[k]);
            rep.record("tcl_power", outside(p, 0.0, cap).max(outside(p + u, 0.0, cap)).max(outside(p + d, 0.0, cap)));
            rep.record("tcl_direction", (-u).max(d));
            rep.record("split", (s.split.up(k) - u).abs().max((s.split.dn(k) - d).abs()));
            rep.record(
                "split_sign",
                [-s.split.up_flx[k], -s.split.up_unc[k], s.split.dn_flx[k], s.split.dn_unc[k]]
                    .into_iter()
                    .fold(0.0, f64::max),
            );
            flx_up[k] += s.split.up_flx[k];
            unc_up[k] += s.split.up_unc[k];
            flx_dn[k] += s.split.dn_flx[k];
            unc_dn[k] += s.split.dn_unc[k];
            power[k] += p;
            hot.push(p + d);
            cold.push(p + u);
        }
        let base = t.trajectory(&s.p, ext, dt);
        let over = t.trajectory(&hot, ext, dt);
        let under = t.trajectory(&cold, ext, dt);
        for k in 0..=steps {
            rep.record("theta_trajectory", (base[k] - s.theta[k]).abs());
            rep.record("theta_trajectory", (over[k] - s.theta_over[k]).abs());
            rep.record("theta_trajectory", (under[k] - s.theta_under[k]).abs());
        }
        for k in 1..=steps {
            let (lo, hi) = t.tightened_band(k, q);
            rep.record("comfort", outside(over[k], f64::NEG_INFINITY, hi));
            rep.record("comfort", outside(under[k], lo, f64::INFINITY));
        }
    }

    // LU level.
    let sigma = fixed.sigma_unc();
    let mut cost = 0.0;
    for k in 0..steps {
        let (imp, exp) = (plan.e_imp.get(k), plan.e_exp.get(k));
        rep.record("balance", (plan.e_hat.get(k) - power[k] * dt).abs());
        rep.record("balance", (plan.e_hat.get(k) - imp - exp).abs());
        rep.record("partition", outside(imp, 0.0, cfg.p_max * dt).max(outside(exp, cfg.p_min * dt, 0.0)));
        rep.record("partition", imp.min(-exp));
        rep.record("reserve_sum", (plan.de_up.get(k) - flx_up[k] * dt).abs());
        rep.record("reserve_sum", (plan.de_dn.get(k) - flx_dn[k] * dt).abs());
        rep.record("reserve_sum", (plan.unc_up[k] - unc_up[k]).abs().max((plan.unc_dn[k] - unc_dn[k]).abs()));
        rep.record("unc_coverage", sigma[k] * q - unc_up[k]);
        rep.record("unc_coverage", unc_dn[k] + sigma[k] * q);
        rep.record("lu_cap", power[k] + flx_up[k] + unc_up[k] - cfg.p_max);
        rep.record("lu_cap", cfg.p_min - (power[k] + flx_dn[k] + unc_dn[k]));
        if cfg.equal_reserve {
            rep.record("equal_reserve", (plan.de_up.get(k) + plan.de_dn.get(k)).abs());
        }
        cost += cfg.prices.c_imp.get(k) * imp + cfg.prices.c_exp.get(k) * exp
            - cfg.prices.c_flx.get(k) * (plan.de_up.get(k) - plan.de_dn.get(k));
    }
    rep.record("objective", (cost - plan.objective).abs());
    rep
}

fn audit_abp(
    rep: &mut AuditReport,
    a: &crate::devices::AbpParams,
    s: &crate::lu_dap::AbpSchedule,
    grid: &TimeGrid,
) {
    let steps = grid.steps();
    let dt = grid.dt();
    let mut spans: Vec<Option<(usize, usize)>> = Vec::new();
    for j in 0..a.n_phases() {
        let on = &s.phase_on[j];
        let p = &s.phase_power[j];
        let mut energy = 0.0;
        for k in 0..steps {
            let (lo, hi) = if on[k] { (a.p_min[j], a.p_max[j]) } else { (0.0, 0.0) };
            rep.record("abp_power", outside(p[k], lo, hi));
            if on[k] && a.up.get(k) < 0.5 {
                rep.record("abp_window", 1.0);
            }
            energy += p[k] * dt;
        }
        rep.record("abp_energy", (energy - a.energy[j]).abs());
        let active: Vec<usize> = (0..steps).filter(|&k| on[k]).collect();
        rep.record("abp_duration", (active.len() as f64 - a.duration[j] as f64).abs());
        let span = active.first().map(|&f| (f, *active.last().unwrap()));
        if let Some((f, l)) = span {
            // Uninterrupted: the block has no holes.
            rep.record("abp_contiguity", (l - f + 1 - active.len()) as f64);
        }
        if j > 0 && a.duration[j] > 0 && a.duration[j - 1] > 0 {
            if let (Some((_, prev_last)), Some((first, _))) = (spans[j - 1], span) {
                if first <= prev_last {
                    rep.record("abp_order", (prev_last + 1 - first) as f64);
                } else {
                    let idle = first - prev_last - 1;
                    rep.record("abp_delay", idle as f64 - a.max_delay[j] as f64);
                }
            }
        }
        spans.push(span);
    }
}
