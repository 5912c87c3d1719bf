//! Pooling LU plans and splitting DR requests among them.

use serde::Serialize;

use crate::error::DapError;
use crate::lu_dap::LuPlan;
use crate::types::{PriceSet, Profile, Unit};

/// Band tolerance when checking a request against the aggregate reserve.
pub const BAND_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AggregatePlan {
    pub e_agt: Profile,
    pub de_up_agt: Profile,
    pub de_dn_agt: Profile,
    /// Programmed income of the aggregator [EUR].
    pub income: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DispatchSignal {
    /// Requested aggregate deviation [kWh].
    pub request: Profile,
    /// Per-LU references, in plan order [kWh].
    pub shares: Vec<Profile>,
}

/// Sums the LU profiles and evaluates the aggregator income
/// `sum_k (c_flx_agt - c_flx) (dE_up_agt - dE_dn_agt)`.
pub fn aggregate(plans: &[LuPlan], prices: &PriceSet) -> Result<AggregatePlan, DapError> {
    let steps = prices.c_flx.len();
    if let Some(first) = plans.first() {
        if plans.iter().any(|p| p.grid != first.grid) {
            return Err(DapError::MixedGrids);
        }
        if first.grid.steps() != steps {
            return Err(DapError::LengthMismatch {
                what: "prices".into(),
                expected: first.grid.steps(),
                found: steps,
            });
        }
    }
    let sum = |f: &dyn Fn(&LuPlan) -> &Profile| {
        let mut out = vec![0.0; steps];
        for p in plans {
            for (o, v) in out.iter_mut().zip(f(p).values()) {
                *o += v;
            }
        }
        Profile::new(out, Unit::Kwh)
    };
    let e_agt = sum(&|p| &p.e_hat);
    let de_up_agt = sum(&|p| &p.de_up);
    let de_dn_agt = sum(&|p| &p.de_dn);
    let income = (0..steps)
        .map(|k| {
            (prices.c_flx_agt.get(k) - prices.c_flx.get(k)) * (de_up_agt.get(k) - de_dn_agt.get(k))
        })
        .sum();
    Ok(AggregatePlan {
        e_agt,
        de_up_agt,
        de_dn_agt,
        income,
    })
}

/// Splits `request` among the LUs in proportion to their share of the
/// aggregate reserve in the requested direction.
pub fn dispatch(agg: &AggregatePlan, plans: &[LuPlan], request: &Profile) -> Result<DispatchSignal, DapError> {
    let steps = agg.de_up_agt.len();
    if request.len() != steps {
        return Err(DapError::LengthMismatch {
            what: "DR request".into(),
            expected: steps,
            found: request.len(),
        });
    }
    for k in 0..steps {
        let (v, lo, hi) = (request.get(k), agg.de_dn_agt.get(k), agg.de_up_agt.get(k));
        if !(v >= lo - BAND_TOL && v <= hi + BAND_TOL) {
            return Err(DapError::OutOfBand { step: k, value: v, lo, hi });
        }
    }
    let ratio = |own: f64, total: f64| if total == 0.0 { 0.0 } else { own / total };
    let shares = plans
        .iter()
        .map(|p| {
            let v = (0..steps)
                .map(|k| {
                    let r = request.get(k);
                    let up = ratio(p.de_up.get(k), agg.de_up_agt.get(k));
                    let dn = ratio(p.de_dn.get(k), agg.de_dn_agt.get(k));
                    up * r.max(0.0) + dn * r.min(0.0)
                })
                .collect();
            Profile::new(v, Unit::Kwh)
        })
        .collect();
    Ok(DispatchSignal {
        request: request.clone(),
        shares,
    })
}

/// Request that takes `fractions[k]` of the aggregate band at step `k`:
/// positive fractions scale the positive reserve, negative ones the
/// negative reserve.
pub fn request_from_fractions(agg: &AggregatePlan, fractions: &[f64]) -> Profile {
    let v = fractions
        .iter()
        .enumerate()
        .map(|(k, &f)| {
            if f >= 0.0 {
                f * agg.de_up_agt.get(k)
            } else {
                -f * agg.de_dn_agt.get(k)
            }
        })
        .collect();
    Profile::new(v, Unit::Kwh)
}
