use crate::error::DapError;
use crate::types::{Forecast, Profile, TimeGrid, Unit};

/// Non-controllable power: renewable generation, user-planned devices and
/// the aggregated non-controllable demand.
#[derive(Clone, Debug)]
pub struct FixedProfiles {
    pub res: Vec<Forecast>,
    pub upd: Vec<Profile>,
    pub ncd: Forecast,
}

impl FixedProfiles {
    pub fn none(grid: &TimeGrid) -> Self {
        Self {
            res: Vec::new(),
            upd: Vec::new(),
            ncd: Forecast::exact(Profile::zeros(grid, Unit::Kw)),
        }
    }

    pub fn validate(&self, grid: &TimeGrid) -> Result<(), DapError> {
        for (i, f) in self.res.iter().enumerate() {
            f.check(grid, Unit::Kw, &format!("res[{i}]"))?;
            if f.mean.values().iter().any(|&v| v < 0.0) {
                return Err(DapError::params(format!("res[{i}]"), "negative generation forecast"));
            }
        }
        for (i, u) in self.upd.iter().enumerate() {
            u.check(grid, Unit::Kw, &format!("upd[{i}]"))?;
            if u.values().iter().any(|&v| v < 0.0) {
                return Err(DapError::params(format!("upd[{i}]"), "negative planned consumption"));
            }
        }
        self.ncd.check(grid, Unit::Kw, "ncd")
    }
}

/// Constant contribution of the fixed profiles.
#[derive(Clone, Debug, PartialEq)]
pub struct FixedEmission {
    /// `-sum(res) + sum(upd) + ncd` per step [kW].
    pub power: Vec<f64>,
    /// Variance of the LU forecast error per step [kW^2].
    pub variance: Vec<f64>,
}

impl FixedEmission {
    pub fn sigma_unc(&self) -> Vec<f64> {
        self.variance.iter().map(|v| v.sqrt()).collect()
    }
}

pub fn emit_fixed(f: &FixedProfiles, grid: &TimeGrid) -> Result<FixedEmission, DapError> {
    f.validate(grid)?;
    let steps = grid.steps();
    let mut power = f.ncd.mean.values().to_vec();
    let mut variance: Vec<f64> = f.ncd.sigma.values().iter().map(|s| s * s).collect();
    for res in &f.res {
        for k in 0..steps {
            power[k] -= res.mean.get(k);
            variance[k] += res.sigma.get(k).powi(2);
        }
    }
    for upd in &f.upd {
        for k in 0..steps {
            power[k] += upd.get(k);
        }
    }
    Ok(FixedEmission { power, variance })
}
