//! Scenario files and fleet generation.
//!
//! A scenario is a JSON document. Every field is optional except `H` and
//! `seed`; omitted fields take the simulation parameters of the reference
//! 200-house study, rescaled to the chosen time grid.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::devices::{AbpParams, BessParams, FixedProfiles, PevParams, TclParams};
use crate::error::DapError;
use crate::lu_dap::{LuConfig, SolverChoice};
use crate::types::{Forecast, PriceSet, Profile, TimeGrid, Unit};

fn default_steps() -> usize {
    24
}
fn default_dt() -> f64 {
    1.0
}
fn default_r() -> f64 {
    0.05
}
fn default_runs() -> usize {
    20
}
fn default_node_limit() -> usize {
    crate::lu_dap::DEFAULT_NODE_LIMIT
}
fn default_mip_gap() -> f64 {
    crate::lu_dap::DEFAULT_REL_GAP
}
fn default_max_binaries() -> usize {
    2_000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    #[serde(rename = "H")]
    pub houses: usize,
    pub seed: u64,
    #[serde(rename = "T", default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "AbpSpec::defaults")]
    pub abp: Vec<AbpSpec>,
    #[serde(default)]
    pub pev: Option<PevSpec>,
    #[serde(default)]
    pub bess: Option<BessSpec>,
    #[serde(default)]
    pub tcl: Option<TclSpec>,
    #[serde(default)]
    pub pv: PvSpec,
    #[serde(default)]
    pub ncd: NcdSpec,
    #[serde(default)]
    pub weather: WeatherSpec,
    #[serde(default)]
    pub lu: LuLimits,
    #[serde(default)]
    pub prices: PriceSpec,
    #[serde(default = "default_r")]
    pub r: f64,
    #[serde(default)]
    pub equal_reserve: bool,
    /// Requested DR deviation per step as a fraction of the aggregate band:
    /// positive entries scale the positive reserve, negative entries the
    /// negative reserve. Defaults to [`default_dr`].
    #[serde(default)]
    pub dr: Option<Vec<f64>>,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub solver: SolverSpec,
    /// Branch-and-bound node budget per LU for the builtin solver.
    #[serde(default = "default_node_limit")]
    pub node_limit: usize,
    #[serde(default = "default_mip_gap")]
    pub mip_gap: f64,
    #[serde(default)]
    pub disable: Vec<DeviceKind>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeviceKind {
    Abp,
    Pev,
    Bess,
    Tcl,
    Pv,
    Ncd,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbpSpec {
    pub name: String,
    pub energy: Vec<f64>,
    /// Phase durations in quarter-hours, rescaled to the grid.
    pub quarter_hours: Vec<usize>,
    pub p_max: Vec<f64>,
    #[serde(default)]
    pub p_min: Option<Vec<f64>>,
    /// Allowed window [start, end) in hours.
    pub window: [f64; 2],
    /// Maximal pause between phases [h].
    #[serde(default = "AbpSpec::default_delay")]
    pub max_delay_h: f64,
}

impl AbpSpec {
    fn default_delay() -> f64 {
        2.0
    }

    pub fn defaults() -> Vec<AbpSpec> {
        let make = |name: &str, window| AbpSpec {
            name: name.into(),
            energy: vec![0.11, 0.2, 0.07, 0.8],
            quarter_hours: vec![3, 1, 2, 2],
            p_max: vec![0.15, 1.6, 0.15, 1.6],
            p_min: None,
            window,
            max_delay_h: 2.0,
        };
        vec![make("dishwasher", [13.0, 24.0]), make("washer", [8.0, 20.0])]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PevSpec {
    pub e_nom: f64,
    pub eta: f64,
    pub p_max: f64,
    pub dsoc: [f64; 2],
    /// Departure hour range; the car is plugged in from midnight until then.
    pub depart: [f64; 2],
    /// Arrival hour range; plugged in from then until midnight.
    pub arrive: [f64; 2],
}

impl Default for PevSpec {
    fn default() -> Self {
        Self {
            e_nom: 15.0,
            eta: 0.9,
            p_max: 3.3,
            dsoc: [0.1, 0.4],
            depart: [6.0, 9.0],
            arrive: [17.0, 21.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BessSpec {
    pub e_nom: f64,
    pub eta_ch: f64,
    pub eta_dsc: f64,
    pub p_max_ch: f64,
    pub p_min_dsc: f64,
    pub soc_min: f64,
    pub soc_max: f64,
    pub soc0: [f64; 2],
    pub l_ch: f64,
    pub l_dsc: f64,
}

impl Default for BessSpec {
    fn default() -> Self {
        Self {
            e_nom: 5.0,
            eta_ch: 0.9,
            eta_dsc: 1.1,
            p_max_ch: 3.0,
            p_min_dsc: -3.0,
            soc_min: 0.1,
            soc_max: 0.9,
            soc0: [0.3, 0.7],
            l_ch: 1.0,
            l_dsc: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TclSpec {
    /// [degC/kW]
    pub r: f64,
    /// [kWh/degC]
    pub c: f64,
    pub eta_c: f64,
    pub p_max: f64,
    pub sigma_ex: f64,
    pub setpoint: [f64; 2],
    /// Half-width of the comfort band around the setpoint.
    pub band: f64,
    /// Initial temperature spread around the setpoint.
    pub theta0_spread: f64,
    /// Hours [start, end) during which the unit is switched off.
    pub off_hours: Vec<[f64; 2]>,
}

impl Default for TclSpec {
    fn default() -> Self {
        Self {
            r: 2.5,
            c: 4.0,
            eta_c: 2.0,
            p_max: 2.0,
            sigma_ex: 0.1,
            setpoint: [24.5, 25.5],
            band: 2.0,
            theta0_spread: 1.0,
            off_hours: vec![[0.0, 8.0], [20.0, 24.0]],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PvSpec {
    pub rated: f64,
    pub sunrise: f64,
    pub sunset: f64,
    /// Forecast standard deviation as a fraction of the forecast mean.
    pub sigma_frac: f64,
}

impl Default for PvSpec {
    fn default() -> Self {
        Self {
            rated: 1.0,
            sunrise: 6.0,
            sunset: 18.0,
            sigma_frac: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NcdSpec {
    pub night: f64,
    pub day: f64,
    pub evening: f64,
    pub sigma: f64,
}

impl Default for NcdSpec {
    fn default() -> Self {
        Self {
            night: 0.3,
            day: 0.5,
            evening: 0.8,
            sigma: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeatherSpec {
    pub mean: f64,
    pub amplitude: f64,
    pub peak_hour: f64,
}

impl Default for WeatherSpec {
    fn default() -> Self {
        Self {
            mean: 27.0,
            amplitude: 5.0,
            peak_hour: 15.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LuLimits {
    pub p_max: f64,
    pub p_min: f64,
}

impl Default for LuLimits {
    fn default() -> Self {
        Self {
            p_max: 3.0,
            p_min: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PriceSpec {
    pub c_imp: f64,
    pub c_exp: f64,
    pub c_flx: f64,
    pub c_flx_agt: f64,
}

impl PriceSpec {
    pub fn price_set(&self, grid: &TimeGrid) -> PriceSet {
        PriceSet::flat(grid, self.c_imp, self.c_exp, self.c_flx, self.c_flx_agt)
    }
}

impl Default for PriceSpec {
    fn default() -> Self {
        Self {
            c_imp: 0.2,
            c_exp: 0.0,
            c_flx: 1.0,
            c_flx_agt: 30.0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "lowercase")]
pub enum SolverSpec {
    #[default]
    Builtin,
    Lpfile {
        dir: PathBuf,
        #[serde(default)]
        command: Option<String>,
    },
}

impl ScenarioSpec {
    pub fn minimal(houses: usize, seed: u64) -> Self {
        serde_json::from_value(serde_json::json!({ "H": houses, "seed": seed }))
            .expect("defaults deserialize")
    }

    pub fn grid(&self) -> Result<TimeGrid, DapError> {
        TimeGrid::new(self.steps, self.dt)
    }

    pub fn pev_spec(&self) -> PevSpec {
        self.pev.clone().unwrap_or_default()
    }

    pub fn bess_spec(&self) -> BessSpec {
        self.bess.clone().unwrap_or_default()
    }

    pub fn tcl_spec(&self) -> TclSpec {
        self.tcl.clone().unwrap_or_default()
    }

    fn enabled(&self, kind: DeviceKind) -> bool {
        !self.disable.contains(&kind)
    }

    pub fn solver_choice(&self) -> SolverChoice {
        match &self.solver {
            SolverSpec::Builtin => SolverChoice::Builtin {
                node_limit: self.node_limit,
                max_binaries: default_max_binaries(),
                rel_gap: self.mip_gap,
            },
            SolverSpec::Lpfile { dir, command } => SolverChoice::LpFile {
                dir: dir.clone(),
                command: command.clone(),
            },
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.houses == 0 {
            return Err("H must be at least 1".into());
        }
        self.grid().map_err(|e| e.to_string())?;
        if !(self.r > 0.0 && self.r < 0.5) {
            return Err(format!("r = {} outside (0, 0.5)", self.r));
        }
        let range = |name: &str, r: [f64; 2], lo: f64, hi: f64| {
            if r[0] <= r[1] && r[0] >= lo && r[1] <= hi {
                Ok(())
            } else {
                Err(format!("{name} range {:?} must be ordered and within [{lo}, {hi}]", r))
            }
        };
        let pev = self.pev_spec();
        range("pev.dsoc", pev.dsoc, 0.0, 1.0)?;
        range("pev.depart", pev.depart, 0.0, 24.0)?;
        range("pev.arrive", pev.arrive, 0.0, 24.0)?;
        let bess = self.bess_spec();
        range("bess.soc0", bess.soc0, bess.soc_min, bess.soc_max)?;
        let tcl = self.tcl_spec();
        range("tcl.setpoint", tcl.setpoint, -50.0, 100.0)?;
        if !(tcl.band > 0.0 && tcl.theta0_spread >= 0.0 && tcl.theta0_spread <= tcl.band) {
            return Err("tcl.band must be positive and cover tcl.theta0_spread".into());
        }
        for w in &tcl.off_hours {
            range("tcl.off_hours", *w, 0.0, 24.0)?;
        }
        for a in &self.abp {
            range(&format!("abp {} window", a.name), a.window, 0.0, 24.0)?;
            let n = a.energy.len();
            if a.quarter_hours.len() != n || a.p_max.len() != n || a.p_min.as_ref().is_some_and(|p| p.len() != n) {
                return Err(format!("abp {}: phase arrays differ in length", a.name));
            }
        }
        if let Some(dr) = &self.dr {
            if dr.len() != self.steps {
                return Err(format!("dr has {} entries, expected T = {}", dr.len(), self.steps));
            }
            if dr.iter().any(|f| !(-1.0..=1.0).contains(f)) {
                return Err("dr fractions must lie in [-1, 1]".into());
            }
        }
        Ok(())
    }

    /// DR request fractions per step.
    pub fn dr_fractions(&self) -> Vec<f64> {
        match &self.dr {
            Some(v) => v.clone(),
            None => default_dr(&self.grid().expect("validated grid")),
        }
    }
}

/// Half of the positive band from 10:00 to 14:00, half of the negative band
/// from 15:00 to 19:00, nothing otherwise.
pub fn default_dr(grid: &TimeGrid) -> Vec<f64> {
    (0..grid.steps())
        .map(|k| {
            let h = grid.hour(k);
            if (10.0..14.0).contains(&h) {
                0.5
            } else if (15.0..19.0).contains(&h) {
                -0.5
            } else {
                0.0
            }
        })
        .collect()
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioSpec, DapError> {
    let path = path.as_ref();
    let err = |msg: String| DapError::Scenario {
        path: path.to_path_buf(),
        msg,
    };
    let text = std::fs::read_to_string(path).map_err(|source| DapError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let spec: ScenarioSpec = serde_json::from_str(&text).map_err(|e| err(e.to_string()))?;
    spec.validate().map_err(err)?;
    Ok(spec)
}

fn step_mid(grid: &TimeGrid, k: usize) -> f64 {
    grid.hour(k) + 0.5 * grid.dt()
}

/// Availability mask that is 1 on steps whose start lies in any window.
fn window_mask(grid: &TimeGrid, windows: &[[f64; 2]]) -> Profile {
    Profile::from_fn(grid, Unit::Pu, |k| {
        let h = grid.hour(k);
        let inside = windows.iter().any(|w| h >= w[0] - 1e-9 && h < w[1] - 1e-9);
        if inside {
            1.0
        } else {
            0.0
        }
    })
}

pub fn pv_forecast(grid: &TimeGrid, pv: &PvSpec) -> Forecast {
    let mean = Profile::from_fn(grid, Unit::Kw, |k| {
        let h = step_mid(grid, k);
        if h <= pv.sunrise || h >= pv.sunset {
            0.0
        } else {
            pv.rated * (PI * (h - pv.sunrise) / (pv.sunset - pv.sunrise)).sin()
        }
    });
    let sigma = mean.map(Unit::Kw, |m| m * pv.sigma_frac);
    Forecast { mean, sigma }
}

pub fn ncd_forecast(grid: &TimeGrid, ncd: &NcdSpec) -> Forecast {
    let mean = Profile::from_fn(grid, Unit::Kw, |k| {
        let h = grid.hour(k);
        if (7.0..17.0).contains(&h) {
            ncd.day
        } else if (17.0..23.0).contains(&h) {
            ncd.evening
        } else {
            ncd.night
        }
    });
    Forecast {
        sigma: Profile::constant(grid, ncd.sigma, Unit::Kw),
        mean,
    }
}

pub fn temperature_forecast(grid: &TimeGrid, w: &WeatherSpec, sigma: f64) -> Forecast {
    let mean = Profile::from_fn(grid, Unit::Celsius, |k| {
        let h = step_mid(grid, k);
        w.mean + w.amplitude * (2.0 * PI * (h - w.peak_hour) / 24.0).cos()
    });
    Forecast {
        sigma: Profile::constant(grid, sigma, Unit::Celsius),
        mean,
    }
}

fn draw(rng: &mut ChaCha8Rng, r: [f64; 2]) -> f64 {
    if r[1] > r[0] {
        rng.gen_range(r[0]..r[1])
    } else {
        r[0]
    }
}

const MAX_RESAMPLES: usize = 20;

/// Randomized LU configurations, deterministic in `spec.seed`.
pub fn generate_fleet(spec: &ScenarioSpec) -> Result<Vec<LuConfig>, DapError> {
    let grid = spec.grid()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut fleet = Vec::with_capacity(spec.houses);
    for h in 0..spec.houses {
        let mut last_err = None;
        let mut accepted = None;
        for _ in 0..MAX_RESAMPLES {
            let cfg = sample_house(spec, &grid, h, &mut rng);
            match check_house(&cfg, &grid) {
                Ok(()) => {
                    accepted = Some(cfg);
                    break;
                }
                Err(e) => last_err = Some(e),
            }
        }
        match accepted {
            Some(cfg) => fleet.push(cfg),
            None => {
                return Err(DapError::Lu {
                    index: h,
                    source: Box::new(last_err.expect("at least one attempt")),
                })
            }
        }
    }
    Ok(fleet)
}

fn check_house(cfg: &LuConfig, grid: &TimeGrid) -> Result<(), DapError> {
    cfg.validate(grid)?;
    for a in &cfg.abps {
        a.validate(grid)?;
    }
    for p in &cfg.pevs {
        p.validate(grid)?;
    }
    for b in &cfg.besses {
        b.validate()?;
    }
    for t in &cfg.tcls {
        t.validate(grid)?;
    }
    cfg.fixed.validate(grid)
}

fn sample_house(spec: &ScenarioSpec, grid: &TimeGrid, h: usize, rng: &mut ChaCha8Rng) -> LuConfig {
    let name = format!("lu{h:03}");
    let dt = grid.dt();
    // Draw every random quantity in a fixed order so that disabling a device
    // does not reshuffle the others.
    let pev = spec.pev_spec();
    let dsoc = draw(rng, pev.dsoc);
    let depart = draw(rng, pev.depart);
    let arrive = draw(rng, pev.arrive);
    let bess = spec.bess_spec();
    let soc0 = draw(rng, bess.soc0);
    let tcl = spec.tcl_spec();
    let setpoint = draw(rng, tcl.setpoint);
    let theta0 = setpoint + draw(rng, [-tcl.theta0_spread, tcl.theta0_spread]);

    let abps = if spec.enabled(DeviceKind::Abp) {
        spec.abp
            .iter()
            .map(|a| AbpParams {
                name: format!("{name}.{}", a.name),
                energy: a.energy.clone(),
                duration: a
                    .quarter_hours
                    .iter()
                    .map(|&q| grid.steps_for(q as f64 * 0.25))
                    .collect(),
                p_min: a.p_min.clone().unwrap_or_else(|| vec![0.0; a.energy.len()]),
                p_max: a.p_max.clone(),
                max_delay: vec![grid.steps_for(a.max_delay_h); a.energy.len()],
                up: window_mask(grid, &[a.window]),
            })
            .collect()
    } else {
        Vec::new()
    };
    let pevs = if spec.enabled(DeviceKind::Pev) {
        // Snap plug times to the grid.
        let depart = (depart / dt).round() * dt;
        let arrive = (arrive / dt).round() * dt;
        vec![PevParams {
            name: format!("{name}.pev"),
            e_nom: pev.e_nom,
            eta: pev.eta,
            p_max: pev.p_max,
            dsoc,
            up: window_mask(grid, &[[0.0, depart], [arrive, 24.0]]),
        }]
    } else {
        Vec::new()
    };
    let besses = if spec.enabled(DeviceKind::Bess) {
        vec![BessParams {
            name: format!("{name}.bess"),
            e_nom: bess.e_nom,
            eta_ch: bess.eta_ch,
            eta_dsc: bess.eta_dsc,
            p_max_ch: bess.p_max_ch,
            p_min_dsc: bess.p_min_dsc,
            soc_min: bess.soc_min,
            soc_max: bess.soc_max,
            soc0,
            l_ch: bess.l_ch,
            l_dsc: bess.l_dsc,
        }]
    } else {
        Vec::new()
    };
    let tcls = if spec.enabled(DeviceKind::Tcl) {
        let mut on = vec![[0.0, 24.0]];
        for off in &tcl.off_hours {
            on = on
                .into_iter()
                .flat_map(|w| {
                    let mut parts = Vec::new();
                    if off[0] > w[0] {
                        parts.push([w[0], off[0].min(w[1])]);
                    }
                    if off[1] < w[1] {
                        parts.push([off[1].max(w[0]), w[1]]);
                    }
                    parts.into_iter().filter(|p| p[1] > p[0])
                })
                .collect();
        }
        vec![TclParams {
            name: format!("{name}.tcl"),
            r: tcl.r,
            c: tcl.c,
            eta_c: tcl.eta_c,
            p_max: tcl.p_max,
            theta_min: setpoint - tcl.band,
            theta_max: setpoint + tcl.band,
            theta0,
            up: window_mask(grid, &on),
            ext: temperature_forecast(grid, &spec.weather, tcl.sigma_ex),
        }]
    } else {
        Vec::new()
    };
    let fixed = FixedProfiles {
        res: if spec.enabled(DeviceKind::Pv) {
            vec![pv_forecast(grid, &spec.pv)]
        } else {
            Vec::new()
        },
        upd: Vec::new(),
        ncd: if spec.enabled(DeviceKind::Ncd) {
            ncd_forecast(grid, &spec.ncd)
        } else {
            Forecast::exact(Profile::zeros(grid, Unit::Kw))
        },
    };
    let pr = &spec.prices;
    LuConfig {
        name,
        abps,
        pevs,
        besses,
        tcls,
        fixed,
        p_min: spec.lu.p_min,
        p_max: spec.lu.p_max,
        prices: pr.price_set(grid),
        r: spec.r,
        equal_reserve: spec.equal_reserve,
    }
}
