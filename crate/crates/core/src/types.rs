//! Time grid, unit-tagged profiles, prices and forecasts.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::DapError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    steps: usize,
    dt: f64,
}

impl TimeGrid {
    pub fn new(steps: usize, dt: f64) -> Result<Self, DapError> {
        if steps == 0 || !(dt > 0.0) || ((steps as f64) * dt - 24.0).abs() > 1e-9 {
            return Err(DapError::InvalidGrid { steps, dt });
        }
        Ok(Self { steps, dt })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Step length in hours.
    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Clock hour at the start of step `k`.
    pub fn hour(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    /// Number of whole steps needed to cover `hours`.
    pub fn steps_for(&self, hours: f64) -> usize {
        (hours / self.dt - 1e-9).ceil().max(0.0) as usize
    }
}

pub fn make_time_grid(steps: usize, dt: f64) -> Result<TimeGrid, DapError> {
    TimeGrid::new(steps, dt)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Unit {
    #[serde(rename = "kW")]
    Kw,
    #[serde(rename = "kWh")]
    Kwh,
    #[serde(rename = "degC")]
    Celsius,
    #[serde(rename = "EUR/kWh")]
    EurPerKwh,
    #[serde(rename = "pu")]
    Pu,
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Unit::Kw => "kW",
            Unit::Kwh => "kWh",
            Unit::Celsius => "degC",
            Unit::EurPerKwh => "EUR/kWh",
            Unit::Pu => "pu",
        })
    }
}

/// Per-step series carrying its unit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    values: Vec<f64>,
    unit: Unit,
}

impl Profile {
    pub fn new(values: Vec<f64>, unit: Unit) -> Self {
        Self { values, unit }
    }

    pub fn constant(grid: &TimeGrid, value: f64, unit: Unit) -> Self {
        Self::new(vec![value; grid.steps()], unit)
    }

    pub fn zeros(grid: &TimeGrid, unit: Unit) -> Self {
        Self::constant(grid, 0.0, unit)
    }

    pub fn from_fn(grid: &TimeGrid, unit: Unit, f: impl FnMut(usize) -> f64) -> Self {
        Self::new((0..grid.steps()).map(f).collect(), unit)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn unit(&self) -> Unit {
        self.unit
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, k: usize) -> f64 {
        self.values[k]
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn map(&self, unit: Unit, f: impl Fn(f64) -> f64) -> Self {
        Self::new(self.values.iter().map(|&v| f(v)).collect(), unit)
    }

    /// Checks length against `grid` and the unit tag.
    pub fn check(&self, grid: &TimeGrid, unit: Unit, what: &str) -> Result<(), DapError> {
        if self.values.len() != grid.steps() {
            return Err(DapError::LengthMismatch {
                what: what.to_string(),
                expected: grid.steps(),
                found: self.values.len(),
            });
        }
        if self.unit != unit {
            return Err(DapError::UnitMismatch {
                what: what.to_string(),
                expected: unit,
                found: self.unit,
            });
        }
        Ok(())
    }
}

/// Converts a power profile to per-step energies.
pub fn profile_energy(p: &Profile, grid: &TimeGrid) -> Result<Profile, DapError> {
    p.check(grid, Unit::Kw, "power profile")?;
    Ok(p.map(Unit::Kwh, |v| v * grid.dt()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriceSet {
    pub c_imp: Profile,
    pub c_exp: Profile,
    /// Reserve price paid by the aggregator to each LU.
    pub c_flx: Profile,
    /// Reserve price paid to the aggregator by the market.
    pub c_flx_agt: Profile,
}

impl PriceSet {
    pub fn flat(grid: &TimeGrid, c_imp: f64, c_exp: f64, c_flx: f64, c_flx_agt: f64) -> Self {
        let p = |v| Profile::constant(grid, v, Unit::EurPerKwh);
        Self {
            c_imp: p(c_imp),
            c_exp: p(c_exp),
            c_flx: p(c_flx),
            c_flx_agt: p(c_flx_agt),
        }
    }

    pub fn validate(&self, grid: &TimeGrid) -> Result<(), DapError> {
        for (name, p) in [
            ("c_imp", &self.c_imp),
            ("c_exp", &self.c_exp),
            ("c_flx", &self.c_flx),
            ("c_flx_agt", &self.c_flx_agt),
        ] {
            p.check(grid, Unit::EurPerKwh, name)?;
            if p.values().iter().any(|&v| !(v >= 0.0)) {
                return Err(DapError::params("prices", format!("{name} must be non-negative")));
            }
        }
        Ok(())
    }
}

/// Gaussian forecast: per-step mean and standard deviation in the same unit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Forecast {
    pub mean: Profile,
    pub sigma: Profile,
}

impl Forecast {
    pub fn new(mean: Profile, sigma: Profile) -> Result<Self, DapError> {
        if mean.len() != sigma.len() {
            return Err(DapError::LengthMismatch {
                what: "forecast sigma".into(),
                expected: mean.len(),
                found: sigma.len(),
            });
        }
        if mean.unit() != sigma.unit() {
            return Err(DapError::UnitMismatch {
                what: "forecast sigma".into(),
                expected: mean.unit(),
                found: sigma.unit(),
            });
        }
        if sigma.values().iter().any(|&s| !(s >= 0.0)) {
            return Err(DapError::params("forecast", "sigma must be non-negative"));
        }
        Ok(Self { mean, sigma })
    }

    /// Forecast with no uncertainty.
    pub fn exact(mean: Profile) -> Self {
        let sigma = mean.map(mean.unit(), |_| 0.0);
        Self { mean, sigma }
    }

    pub fn check(&self, grid: &TimeGrid, unit: Unit, what: &str) -> Result<(), DapError> {
        self.mean.check(grid, unit, what)?;
        self.sigma.check(grid, unit, what)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(make_time_grid(96, 0.25).unwrap().steps(), 96);
        assert_eq!(make_time_grid(24, 1.0).unwrap().steps(), 24);
        assert!(make_time_grid(10, 0.25).is_err());
        assert!(make_time_grid(0, 1.0).is_err());
        assert!(make_time_grid(24, -1.0).is_err());
    }

    #[test]
    fn energy_from_power() {
        let g = make_time_grid(96, 0.25).unwrap();
        let mut v = vec![0.0; 96];
        v[0] = 2.0;
        v[1] = 2.0;
        v[2] = -3.0;
        let e = profile_energy(&Profile::new(v, Unit::Kw), &g).unwrap();
        assert_eq!(&e.values()[..3], &[0.5, 0.5, -0.75]);
        assert!(e.values()[3..].iter().all(|&x| x == 0.0));
        assert_eq!(e.unit(), Unit::Kwh);

        let wrong = Profile::zeros(&g, Unit::Kwh);
        assert!(matches!(profile_energy(&wrong, &g), Err(DapError::UnitMismatch { .. })));
        let short = Profile::new(vec![1.0], Unit::Kw);
        assert!(matches!(profile_energy(&short, &g), Err(DapError::LengthMismatch { .. })));
    }

    #[test]
    fn negative_sigma_rejected() {
        let g = make_time_grid(24, 1.0).unwrap();
        let mean = Profile::zeros(&g, Unit::Kw);
        let sigma = Profile::constant(&g, -0.1, Unit::Kw);
        assert!(Forecast::new(mean, sigma).is_err());
    }
}
