//! Device models. Each `emit_*` function adds the device's variables and
//! constraints to a [`Model`] and returns its per-step contributions to LU
//! net power and reserve capability, plus typed handles to its variables.

mod abp;
mod bess;
mod fixed;
mod pev;
mod tcl;

pub use abp::{emit_abp, AbpParams, AbpVars};
pub use bess::{emit_bess, BessParams, BessVars};
pub use fixed::{emit_fixed, FixedEmission, FixedProfiles};
pub use pev::{emit_pev, PevParams, PevVars};
pub use tcl::{emit_tcl, TclParams, TclVars};

use dap_milp::{LinExpr, Model, VarId, VarKind};

use crate::error::DapError;
use crate::types::{Profile, TimeGrid, Unit};

/// What a device contributes to the LU problem.
///
/// Reserve terms follow the load convention: `*_up` are non-negative
/// (more consumption), `*_dn` non-positive. They are empty vectors of zero
/// expressions for devices that cannot offer reserve.
#[derive(Clone, Debug)]
pub struct DeviceEmission<V> {
    pub power: Vec<LinExpr>,
    pub flx_up: Vec<LinExpr>,
    pub flx_dn: Vec<LinExpr>,
    pub unc_up: Vec<LinExpr>,
    pub unc_dn: Vec<LinExpr>,
    pub vars: V,
}

impl<V> DeviceEmission<V> {
    fn without_reserve(power: Vec<LinExpr>, vars: V) -> Self {
        let zeros = vec![LinExpr::new(); power.len()];
        Self {
            flx_up: zeros.clone(),
            flx_dn: zeros.clone(),
            unc_up: zeros.clone(),
            unc_dn: zeros,
            power,
            vars,
        }
    }
}

/// Reserve split variables of one BESS or TCL at every step: the maximal
/// upward/downward variation divided into a paid part (`flx`) and a part
/// held back for forecast errors (`unc`).
#[derive(Clone, Debug)]
pub struct ReserveSplit {
    pub up_flx: Vec<VarId>,
    pub up_unc: Vec<VarId>,
    pub dn_flx: Vec<VarId>,
    pub dn_unc: Vec<VarId>,
}

impl ReserveSplit {
    fn new(model: &mut Model, tag: &str, up_cap: &[f64], dn_cap: &[f64]) -> Self {
        let mut s = Self {
            up_flx: Vec::new(),
            up_unc: Vec::new(),
            dn_flx: Vec::new(),
            dn_unc: Vec::new(),
        };
        for k in 0..up_cap.len() {
            s.up_flx.push(model.continuous(0.0, up_cap[k], format!("{tag}.up_flx[{k}]")));
            s.up_unc.push(model.continuous(0.0, up_cap[k], format!("{tag}.up_unc[{k}]")));
            s.dn_flx.push(model.continuous(-dn_cap[k], 0.0, format!("{tag}.dn_flx[{k}]")));
            s.dn_unc.push(model.continuous(-dn_cap[k], 0.0, format!("{tag}.dn_unc[{k}]")));
        }
        s
    }

    fn exprs(&self) -> [Vec<LinExpr>; 4] {
        let f = |v: &[VarId]| v.iter().map(|&x| LinExpr::from(x)).collect();
        [f(&self.up_flx), f(&self.dn_flx), f(&self.up_unc), f(&self.dn_unc)]
    }
}

/// `sqrt(2) * erfinv(1 - 2r)`: the standard normal quantile at `1 - r`.
pub fn quantile_gauss(r: f64) -> Result<f64, DapError> {
    if !(r > 0.0 && r < 0.5) {
        return Err(DapError::params("reliability", format!("r = {r} outside (0, 0.5)")));
    }
    Ok(-normal_quantile(r))
}

/// Wichura's AS241 (PPND16), accurate to about 1e-16.
fn normal_quantile(p: f64) -> f64 {
    const A: [f64; 8] = [
        3.387_132_872_796_366_5,
        1.331_416_678_917_843_8e2,
        1.971_590_950_306_551_3e3,
        1.373_169_376_550_946e4,
        4.592_195_393_154_987e4,
        6.726_577_092_700_87e4,
        3.343_057_558_358_813e4,
        2.509_080_928_730_122_7e3,
    ];
    const B: [f64; 8] = [
        1.0,
        4.231_333_070_160_091e1,
        6.871_870_074_920_579e2,
        5.394_196_021_424_751e3,
        2.121_379_430_158_659_7e4,
        3.930_789_580_009_271e4,
        2.872_908_573_572_194_3e4,
        5.226_495_278_852_545e3,
    ];
    const C: [f64; 8] = [
        1.423_437_110_749_683_5,
        4.630_337_846_156_546,
        5.769_497_221_460_691,
        3.647_848_324_763_204_5,
        1.270_458_252_452_368_4,
        2.417_807_251_774_506e-1,
        2.272_384_498_926_918_4e-2,
        7.745_450_142_783_414e-4,
    ];
    const D: [f64; 8] = [
        1.0,
        2.053_191_626_637_759,
        1.676_384_830_183_803_8,
        6.897_673_349_851e-1,
        1.481_039_764_274_800_8e-1,
        1.519_866_656_361_645_7e-2,
        5.475_938_084_995_345e-4,
        1.050_750_071_644_416_9e-9,
    ];
    const E: [f64; 8] = [
        6.657_904_643_501_103,
        5.463_784_911_164_114,
        1.784_826_539_917_291_3,
        2.965_605_718_285_048_7e-1,
        2.653_218_952_657_612_4e-2,
        1.242_660_947_388_078_4e-3,
        2.711_555_568_743_487_6e-5,
        2.010_334_399_292_288_1e-7,
    ];
    const F: [f64; 8] = [
        1.0,
        5.998_322_065_558_88e-1,
        1.369_298_809_227_358e-1,
        1.487_536_129_085_061_5e-2,
        7.868_691_311_456_133e-4,
        1.846_318_317_510_054_8e-5,
        1.421_511_758_316_446e-7,
        2.044_263_103_389_939_8e-15,
    ];
    let poly = |c: &[f64; 8], x: f64| c.iter().rev().fold(0.0, |acc, &v| acc * x + v);
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q * poly(&A, r) / poly(&B, r);
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let r = (-r.ln()).sqrt();
    let val = if r <= 5.0 {
        let r = r - 1.6;
        poly(&C, r) / poly(&D, r)
    } else {
        let r = r - 5.0;
        poly(&E, r) / poly(&F, r)
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

/// Reads a 0/1 availability profile.
pub(crate) fn mask(up: &Profile, grid: &TimeGrid, device: &str) -> Result<Vec<bool>, DapError> {
    up.check(grid, Unit::Pu, &format!("{device} UP mask"))?;
    up.values()
        .iter()
        .map(|&v| {
            if v == 0.0 {
                Ok(false)
            } else if v == 1.0 {
                Ok(true)
            } else {
                Err(DapError::params(device, format!("UP mask entry {v} is not 0 or 1")))
            }
        })
        .collect()
}

pub(crate) fn fixed_binary(model: &mut Model, value: f64, label: String) -> VarId {
    model
        .add_var(VarKind::Binary, value, value, label)
        .expect("0 or 1 is a valid binary bound")
}
