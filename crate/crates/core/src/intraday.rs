//! Intra-day replay of a planned day under realized forecasts.
//!
//! Each LU follows its plan plus its DR reference. BESSs and TCLs deliver
//! the DR share in proportion to their planned flx variation and compensate
//! the forecast error of the fixed profiles in proportion to their planned
//! unc variation. Error beyond the planned unc capacity is not clipped away
//! silently: it stays on the grid connection and is reported as imbalance.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::aggregator::DispatchSignal;
use crate::error::DapError;
use crate::lu_dap::{LuConfig, LuPlan};
use crate::types::TimeGrid;

/// Tolerance above which a bound excursion counts as a violation.
pub const VIOLATION_TOL: f64 = 1e-6;

/// Realized inputs of one LU.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LuRealization {
    /// Realized generation per RES source [kW].
    pub res: Vec<Vec<f64>>,
    /// Realized non-controllable demand [kW].
    pub ncd: Vec<f64>,
    /// Realized external temperature per TCL [degC].
    pub ext: Vec<Vec<f64>>,
}

impl LuRealization {
    /// Realized minus forecast fixed power [kW] (load convention).
    pub fn error(&self, cfg: &LuConfig, k: usize) -> f64 {
        let mut e = self.ncd[k] - cfg.fixed.ncd.mean.get(k);
        for (r, f) in self.res.iter().zip(&cfg.fixed.res) {
            e -= r[k] - f.mean.get(k);
        }
        e
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Realization {
    pub seed: u64,
    pub lus: Vec<LuRealization>,
}

/// Draws every forecast of every LU as independent per-step Gaussians.
/// The draw order is fixed (LU, then RES sources, NCD, TCLs; step-major
/// inside each series), so one seed always gives the same day.
pub fn realize(cfgs: &[LuConfig], grid: &TimeGrid, seed: u64) -> Realization {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let steps = grid.steps();
    let mut draw = |mean: &[f64], sigma: &[f64]| -> Vec<f64> {
        (0..steps)
            .map(|k| {
                let z: f64 = StandardNormal.sample(&mut rng);
                mean[k] + sigma[k] * z
            })
            .collect()
    };
    let lus = cfgs
        .iter()
        .map(|c| LuRealization {
            res: c
                .fixed
                .res
                .iter()
                .map(|f| draw(f.mean.values(), f.sigma.values()))
                .collect(),
            ncd: draw(c.fixed.ncd.mean.values(), c.fixed.ncd.sigma.values()),
            ext: c
                .tcls
                .iter()
                .map(|t| draw(t.ext.mean.values(), t.ext.sigma.values()))
                .collect(),
        })
        .collect();
    Realization { seed, lus }
}

/// Realization equal to the forecasts.
pub fn expected(cfgs: &[LuConfig]) -> Realization {
    Realization {
        seed: 0,
        lus: cfgs
            .iter()
            .map(|c| LuRealization {
                res: c.fixed.res.iter().map(|f| f.mean.values().to_vec()).collect(),
                ncd: c.fixed.ncd.mean.values().to_vec(),
                ext: c.tcls.iter().map(|t| t.ext.mean.values().to_vec()).collect(),
            })
            .collect(),
    }
}

/// Violation counters for one constraint family.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Tally {
    pub count: usize,
    pub max: f64,
}

impl Tally {
    fn add(&mut self, v: f64) {
        if v > VIOLATION_TOL {
            self.count += 1;
        }
        self.max = self.max.max(v);
    }

    fn merge(&mut self, o: &Tally) {
        self.count += o.count;
        self.max = self.max.max(o.max);
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Violations {
    pub soc: Tally,
    pub cycles: Tally,
    pub device_power: Tally,
    pub lu_cap: Tally,
    /// Soft: the comfort band holds only in probability.
    pub comfort: Tally,
    /// Steps whose realized exchange missed the reference.
    pub imbalance: Tally,
}

impl Violations {
    /// Violations of hard physical limits.
    pub fn hard(&self) -> usize {
        self.soc.count + self.cycles.count + self.device_power.count + self.lu_cap.count
    }

    fn merge(&mut self, o: &Violations) {
        self.soc.merge(&o.soc);
        self.cycles.merge(&o.cycles);
        self.device_power.merge(&o.device_power);
        self.lu_cap.merge(&o.lu_cap);
        self.comfort.merge(&o.comfort);
        self.imbalance.merge(&o.imbalance);
    }
}

/// One LU over one simulated day.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LuDay {
    pub realized_kwh: Vec<f64>,
    /// Realized minus (planned + reference) exchange [kWh].
    pub imbalance_kwh: Vec<f64>,
    /// Largest comfort-band excursion over the TCLs, per step [degC].
    pub comfort_violation: Vec<f64>,
    /// Largest SoC-band excursion over the BESSs, per step [pu].
    pub soc_violation: Vec<f64>,
    /// Realized SoC per BESS, length `T + 1`.
    pub soc: Vec<Vec<f64>>,
    /// Realized temperature per TCL, length `T + 1`.
    pub theta: Vec<Vec<f64>>,
    /// Realized BESS charge/discharge power.
    pub p_ch: Vec<Vec<f64>>,
    pub p_dsc: Vec<Vec<f64>>,
    /// Realized TCL power.
    pub p_tcl: Vec<Vec<f64>>,
    /// Realized energy cost net of the reserve payment [EUR].
    pub cost: f64,
    pub violations: Violations,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimReport {
    pub seed: u64,
    pub lus: Vec<LuDay>,
    pub requested_kwh: Vec<f64>,
    /// Aggregate realized deviation from the aggregate plan [kWh].
    pub delivered_kwh: Vec<f64>,
    pub violations: Violations,
}

impl SimReport {
    /// Largest |delivered - requested| over the day [kWh].
    pub fn delivery_gap(&self) -> f64 {
        self.delivered_kwh
            .iter()
            .zip(&self.requested_kwh)
            .map(|(d, r)| (d - r).abs())
            .fold(0.0, f64::max)
    }
}

/// Per-device deviation commands of one LU, `[device][step]` in kW.
struct Commands {
    bess: Vec<Vec<f64>>,
    tcl: Vec<Vec<f64>>,
}

/// Commands delivering `reference` (kWh per step) and compensating
/// `error` (kW per step) by proportional use of the planned variations.
fn proportional_commands(plan: &LuPlan, dt: f64, reference: &[f64], error: &[f64]) -> Commands {
    let steps = reference.len();
    let mut cmd = Commands {
        bess: vec![vec![0.0; steps]; plan.besses.len()],
        tcl: vec![vec![0.0; steps]; plan.tcls.len()],
    };
    let splits = plan
        .besses
        .iter()
        .map(|b| &b.split)
        .chain(plan.tcls.iter().map(|t| &t.split));
    let splits: Vec<_> = splits.collect();
    let ratio = |want: f64, have: f64| if have == 0.0 { 0.0 } else { (want / have).clamp(0.0, 1.0) };
    for k in 0..steps {
        let dr = reference[k] / dt;
        let need = -error[k];
        let flx_up: f64 = splits.iter().map(|s| s.up_flx[k]).sum();
        let flx_dn: f64 = splits.iter().map(|s| s.dn_flx[k]).sum();
        let unc_up: f64 = splits.iter().map(|s| s.up_unc[k]).sum();
        let unc_dn: f64 = splits.iter().map(|s| s.dn_unc[k]).sum();
        let (l_up, l_dn) = if dr >= 0.0 { (ratio(dr, flx_up), 0.0) } else { (0.0, ratio(dr, flx_dn)) };
        let (m_up, m_dn) = if need >= 0.0 { (ratio(need, unc_up), 0.0) } else { (0.0, ratio(need, unc_dn)) };
        for (i, s) in splits.iter().enumerate() {
            let d = l_up * s.up_flx[k] + l_dn * s.dn_flx[k] + m_up * s.up_unc[k] + m_dn * s.dn_unc[k];
            if i < plan.besses.len() {
                cmd.bess[i][k] = d;
            } else {
                cmd.tcl[i - plan.besses.len()][k] = d;
            }
        }
    }
    cmd
}

fn outside(v: f64, lo: f64, hi: f64) -> f64 {
    (lo - v).max(v - hi).max(0.0)
}

/// Integrates one LU forward under `cmd`, auditing against raw parameters.
fn integrate(
    cfg: &LuConfig,
    plan: &LuPlan,
    grid: &TimeGrid,
    real: &LuRealization,
    reference: &[f64],
    error: &[f64],
    cmd: &Commands,
) -> LuDay {
    let steps = grid.steps();
    let dt = grid.dt();
    let mut v = Violations::default();
    let mut device_dev = vec![0.0; steps];
    let mut soc_violation = vec![0.0_f64; steps];
    let mut comfort_violation = vec![0.0_f64; steps];

    let mut socs = Vec::new();
    let mut p_chs = Vec::new();
    let mut p_dscs = Vec::new();
    for (i, (b, s)) in cfg.besses.iter().zip(&plan.besses).enumerate() {
        let mut p_ch = Vec::with_capacity(steps);
        let mut p_dsc = Vec::with_capacity(steps);
        for k in 0..steps {
            let up = s.up_ch[k] + s.up_dsc[k];
            let dn = s.dn_ch[k] + s.dn_dsc[k];
            let d = cmd.bess[i][k].clamp(dn, up);
            // Upward: stop discharging before charging more. Downward: stop
            // charging before discharging more. Both keep the SoC between
            // the planned under- and over-bound trajectories.
            let (r_ch, r_dsc) = if d >= 0.0 {
                let r = d.min(s.up_dsc[k]);
                (d - r, r)
            } else {
                let r = d.max(s.dn_ch[k]);
                (r, d - r)
            };
            let (c, x) = (s.p_ch[k] + r_ch, s.p_dsc[k] + r_dsc);
            v.device_power.add(outside(c, 0.0, b.p_max_ch).max(outside(x, b.p_min_dsc, 0.0)).max(c.min(-x)));
            device_dev[k] += r_ch + r_dsc;
            p_ch.push(c);
            p_dsc.push(x);
        }
        let soc = b.trajectory(&p_ch, &p_dsc, dt);
        for k in 1..=steps {
            let e = outside(soc[k], b.soc_min, b.soc_max);
            v.soc.add(e);
            soc_violation[k - 1] = soc_violation[k - 1].max(e);
        }
        v.cycles.add(b.charge_cycles(&p_ch, dt) - b.l_ch);
        v.cycles.add(b.discharge_cycles(&p_dsc, dt) - b.l_dsc);
        socs.push(soc);
        p_chs.push(p_ch);
        p_dscs.push(p_dsc);
    }

    let mut thetas = Vec::new();
    let mut p_tcls = Vec::new();
    for (i, (t, s)) in cfg.tcls.iter().zip(&plan.tcls).enumerate() {
        let mut p = Vec::with_capacity(steps);
        for k in 0..steps {
            let d = cmd.tcl[i][k].clamp(s.dn[k], s.up[k]);
            let cap = if t.up.get(k) > 0.5 { t.p_max } else { 0.0 };
            let pk = s.p[k] + d;
            v.device_power.add(outside(pk, 0.0, cap));
            device_dev[k] += d;
            p.push(pk);
        }
        let theta = t.trajectory(&p, &real.ext[i], dt);
        for k in 1..=steps {
            let e = outside(theta[k], t.theta_min, t.theta_max);
            v.comfort.add(e);
            comfort_violation[k - 1] = comfort_violation[k - 1].max(e);
        }
        thetas.push(theta);
        p_tcls.push(p);
    }

    let mut realized_kwh = Vec::with_capacity(steps);
    let mut imbalance_kwh = Vec::with_capacity(steps);
    let mut cost = 0.0;
    for k in 0..steps {
        let commanded = plan.power[k] + device_dev[k];
        v.lu_cap.add(outside(commanded, cfg.p_min, cfg.p_max));
        let e = (commanded + error[k]) * dt;
        let miss = e - (plan.e_hat.get(k) + reference[k]);
        v.imbalance.add(miss.abs());
        realized_kwh.push(e);
        imbalance_kwh.push(miss);
        let pr = &cfg.prices;
        cost += pr.c_imp.get(k) * e.max(0.0) + pr.c_exp.get(k) * e.min(0.0)
            - pr.c_flx.get(k) * (plan.de_up.get(k) - plan.de_dn.get(k));
    }

    LuDay {
        realized_kwh,
        imbalance_kwh,
        comfort_violation,
        soc_violation,
        soc: socs,
        theta: thetas,
        p_ch: p_chs,
        p_dsc: p_dscs,
        p_tcl: p_tcls,
        cost,
        violations: v,
    }
}

/// Simulates one day of the whole fleet.
pub fn run_day(
    cfgs: &[LuConfig],
    plans: &[LuPlan],
    signal: &DispatchSignal,
    real: &Realization,
    grid: &TimeGrid,
) -> Result<SimReport, DapError> {
    let n = plans.len();
    for (what, len) in [("configs", cfgs.len()), ("dispatch shares", signal.shares.len()), ("realizations", real.lus.len())] {
        if len != n {
            return Err(DapError::LengthMismatch {
                what: what.into(),
                expected: n,
                found: len,
            });
        }
    }
    if plans.iter().any(|p| p.grid != *grid) {
        return Err(DapError::MixedGrids);
    }
    let steps = grid.steps();
    let dt = grid.dt();
    let mut lus = Vec::with_capacity(n);
    let mut delivered = vec![0.0; steps];
    let mut violations = Violations::default();
    for h in 0..n {
        let (cfg, plan, r) = (&cfgs[h], &plans[h], &real.lus[h]);
        let reference = signal.shares[h].values();
        let error: Vec<f64> = (0..steps).map(|k| r.error(cfg, k)).collect();
        let cmd = proportional_commands(plan, dt, reference, &error);
        let day = integrate(cfg, plan, grid, r, reference, &error, &cmd);
        for k in 0..steps {
            delivered[k] += day.realized_kwh[k] - plan.e_hat.get(k);
        }
        violations.merge(&day.violations);
        lus.push(day);
    }
    Ok(SimReport {
        seed: real.seed,
        lus,
        requested_kwh: signal.request.values().to_vec(),
        delivered_kwh: delivered,
        violations,
    })
}

/// Runs one day per realization, in parallel.
pub fn run_fleet(
    cfgs: &[LuConfig],
    plans: &[LuPlan],
    signal: &DispatchSignal,
    realizations: &[Realization],
    grid: &TimeGrid,
) -> Result<FleetReport, DapError> {
    let runs = realizations
        .par_iter()
        .map(|r| run_day(cfgs, plans, signal, r, grid))
        .collect::<Result<Vec<_>, _>>()?;
    let mut violations = Violations::default();
    for r in &runs {
        violations.merge(&r.violations);
    }
    let max_delivery_gap = runs.iter().map(|r| r.delivery_gap()).fold(0.0, f64::max);
    Ok(FleetReport {
        runs,
        violations,
        max_delivery_gap,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FleetReport {
    pub runs: Vec<SimReport>,
    pub violations: Violations,
    pub max_delivery_gap: f64,
}

/// Direction of a full-variation replay.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Extreme {
    Up,
    Down,
}

/// Applies every planned variation component (flx and unc) of one LU in
/// one direction at every step, under the forecast inputs.
pub fn replay_extreme(cfg: &LuConfig, plan: &LuPlan, grid: &TimeGrid, dir: Extreme) -> LuDay {
    let steps = grid.steps();
    let dt = grid.dt();
    let pick = |up: f64, dn: f64| if dir == Extreme::Up { up } else { dn };
    let cmd = Commands {
        bess: plan
            .besses
            .iter()
            .map(|b| (0..steps).map(|k| pick(b.split.up(k), b.split.dn(k))).collect())
            .collect(),
        tcl: plan
            .tcls
            .iter()
            .map(|t| (0..steps).map(|k| pick(t.split.up(k), t.split.dn(k))).collect())
            .collect(),
    };
    let reference: Vec<f64> = (0..steps)
        .map(|k| pick(plan.de_up.get(k), plan.de_dn.get(k)) + pick(plan.unc_up[k], plan.unc_dn[k]) * dt)
        .collect();
    let real = &expected(std::slice::from_ref(cfg)).lus[0];
    integrate(cfg, plan, grid, real, &reference, &vec![0.0; steps], &cmd)
}
