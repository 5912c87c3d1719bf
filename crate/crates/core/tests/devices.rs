use dap_core::devices::{
    emit_abp, emit_bess, emit_fixed, emit_pev, emit_tcl, quantile_gauss, AbpParams, BessParams, FixedProfiles,
    PevParams, TclParams,
};
use dap_core::types::{make_time_grid, Forecast, Profile, TimeGrid, Unit};
use dap_milp::{solve_lp, solve_milp, LinExpr, Model, Relation, SolverOptions, Status};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn grid(steps: usize, dt: f64) -> TimeGrid {
    make_time_grid(steps, dt).unwrap()
}

fn window(grid: &TimeGrid, from: usize, to: usize) -> Profile {
    Profile::from_fn(grid, Unit::Pu, |k| if (from..to).contains(&k) { 1.0 } else { 0.0 })
}

fn opts() -> SolverOptions {
    SolverOptions {
        max_binaries: 5_000,
        ..SolverOptions::default()
    }
}

fn random_cost(model: &mut Model, power: &[LinExpr], rng: &mut ChaCha8Rng) {
    let obj = LinExpr::sum(power.iter().map(|p| p.clone().scaled(rng.gen_range(0.1..1.0))));
    model.set_objective(obj).unwrap();
}

fn dishwasher_phase(grid: &TimeGrid) -> AbpParams {
    AbpParams {
        name: "dw".into(),
        energy: vec![0.8],
        duration: vec![2],
        p_min: vec![0.0],
        p_max: vec![1.6],
        max_delay: vec![0],
        up: window(grid, 40, 52),
    }
}

#[test]
fn tight_abp_phase_runs_at_rated_power() {
    let g = grid(96, 0.25);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..5 {
        let mut m = Model::new();
        let em = emit_abp(&mut m, &dishwasher_phase(&g), &g).unwrap();
        random_cost(&mut m, &em.power, &mut rng);
        let sol = solve_milp(&m, 10_000, &opts()).unwrap();
        assert_eq!(sol.status, Status::Optimal);
        let p = em.vars.power(&sol.values);
        let active: Vec<f64> = p.iter().copied().filter(|&v| v > 1e-6).collect();
        assert_eq!(active.len(), 2);
        for v in active {
            assert!((v - 1.6).abs() < 1e-6, "{v}");
        }
    }
}

#[test]
fn zero_energy_phase_is_feasible() {
    let g = grid(24, 1.0);
    let abp = AbpParams {
        name: "z".into(),
        energy: vec![0.0],
        duration: vec![1],
        p_min: vec![0.0],
        p_max: vec![1.0],
        max_delay: vec![0],
        up: Profile::constant(&g, 1.0, Unit::Pu),
    };
    let mut m = Model::new();
    let em = emit_abp(&mut m, &abp, &g).unwrap();
    m.set_objective(LinExpr::sum(em.power.iter().cloned())).unwrap();
    let sol = solve_milp(&m, 1_000, &opts()).unwrap();
    assert_eq!(sol.status, Status::Optimal);
    assert!(em.vars.power(&sol.values).iter().all(|&v| v.abs() < 1e-9));
}

#[test]
fn unreachable_abp_energy_is_rejected() {
    let g = grid(24, 1.0);
    let mut abp = AbpParams {
        name: "bad".into(),
        energy: vec![3.0],
        duration: vec![1],
        p_min: vec![0.0],
        p_max: vec![1.0],
        max_delay: vec![0],
        up: Profile::constant(&g, 1.0, Unit::Pu),
    };
    assert!(emit_abp(&mut Model::new(), &abp, &g).is_err());
    abp.energy = vec![1.0];
    abp.duration = vec![25];
    assert!(emit_abp(&mut Model::new(), &abp, &g).is_err());
}

/// Two phases of two steps each on an 8-step day. Every placement of the
/// two blocks is checked against the MILP by pinning the activation
/// binaries; the oracle accepts it iff phase 2 follows phase 1 with at most
/// `delay` idle steps and both blocks lie inside the UP window.
fn check_placements(delay: usize, up_from: usize, up_to: usize) {
    let g = grid(8, 3.0);
    let abp = AbpParams {
        name: "toy".into(),
        energy: vec![6.0, 3.0],
        duration: vec![2, 2],
        p_min: vec![0.0, 0.0],
        p_max: vec![2.0, 2.0],
        max_delay: vec![0, delay],
        up: window(&g, up_from, up_to),
    };
    let mut base = Model::new();
    let em = emit_abp(&mut base, &abp, &g).unwrap();
    base.set_objective(LinExpr::sum(em.power.iter().cloned())).unwrap();
    let mut feasible = 0;
    for a in 0..=6 {
        for b in 0..=6 {
            let expected = b >= a + 2 && b - (a + 2) <= delay && a >= up_from && b + 2 <= up_to;
            let mut m = base.clone();
            for k in 0..8 {
                let on1 = (a..a + 2).contains(&k) as u8 as f64;
                let on2 = (b..b + 2).contains(&k) as u8 as f64;
                // Rows rather than bounds, so the UP mask stays in force.
                m.add_constraint(LinExpr::from(em.vars.x[0][k]), Relation::Eq, on1, "pin").unwrap();
                m.add_constraint(LinExpr::from(em.vars.x[1][k]), Relation::Eq, on2, "pin").unwrap();
            }
            let sol = solve_milp(&m, 1_000, &opts()).unwrap();
            assert_eq!(
                sol.status == Status::Optimal,
                expected,
                "delay {delay}, phase 1 at {a}, phase 2 at {b}: {:?}",
                sol.status
            );
            feasible += expected as usize;
        }
    }
    assert!(feasible > 0);
}

#[test]
fn zero_delay_forces_back_to_back_phases() {
    check_placements(0, 0, 8);
}

#[test]
fn delay_bound_matches_enumeration() {
    check_placements(1, 0, 8);
    check_placements(2, 0, 8);
    check_placements(3, 1, 7);
}

#[test]
fn pev_meets_its_energy_target() {
    let g = grid(24, 1.0);
    let pev = PevParams {
        name: "ev".into(),
        e_nom: 15.0,
        eta: 0.9,
        p_max: 3.3,
        dsoc: 0.3,
        up: window(&g, 0, 7),
    };
    assert!((pev.required_energy() - 5.0).abs() < 1e-12);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..5 {
        let mut m = Model::new();
        let em = emit_pev(&mut m, &pev, &g).unwrap();
        random_cost(&mut m, &em.power, &mut rng);
        let sol = solve_milp(&m, 1_000, &opts()).unwrap();
        assert_eq!(sol.status, Status::Optimal);
        let p: Vec<f64> = em.power.iter().map(|e| e.eval(&sol.values)).collect();
        assert!((p.iter().sum::<f64>() * g.dt() - 5.0).abs() < 1e-6);
        for (k, &v) in p.iter().enumerate() {
            assert!(v >= -1e-9 && v <= 3.3 + 1e-9);
            if k >= 7 {
                assert!(v.abs() < 1e-9);
            }
        }
        assert!(em.flx_up.iter().chain(&em.unc_dn).all(|e| e.is_empty()));
    }
}

#[test]
fn pev_zero_recharge_and_window_bound() {
    let g = grid(96, 0.25);
    let mut pev = PevParams {
        name: "ev".into(),
        e_nom: 11.0,
        eta: 1.0,
        p_max: 3.3,
        dsoc: 0.0,
        up: window(&g, 10, 14),
    };
    let mut m = Model::new();
    let em = emit_pev(&mut m, &pev, &g).unwrap();
    m.set_objective(LinExpr::sum(em.power.iter().cloned())).unwrap();
    let sol = solve_milp(&m, 1_000, &opts()).unwrap();
    assert!(sol.is_optimal());
    assert!(em.power.iter().all(|e| e.eval(&sol.values).abs() < 1e-9));

    // The 4-step window delivers at most 3.3 kWh.
    pev.dsoc = 3.3 / 11.0;
    assert!(emit_pev(&mut Model::new(), &pev, &g).is_ok());
    pev.dsoc = 3.4 / 11.0;
    assert!(emit_pev(&mut Model::new(), &pev, &g).is_err());
}

fn battery() -> BessParams {
    BessParams {
        name: "b".into(),
        e_nom: 5.0,
        eta_ch: 0.9,
        eta_dsc: 1.1,
        p_max_ch: 2.0,
        p_min_dsc: -2.0,
        soc_min: 0.2,
        soc_max: 0.9,
        soc0: 0.5,
        l_ch: 1.0,
        l_dsc: 1.0,
    }
}

#[test]
fn soc_recursion_examples() {
    let b = battery();
    assert!((b.next_soc(0.5, 2.0, 0.0, 0.25) - 0.59).abs() < 1e-12);
    assert!((b.next_soc(0.5, 0.0, -2.0, 0.25) - 0.39).abs() < 1e-12);
}

#[test]
fn idle_battery_keeps_all_three_trajectories_flat() {
    let g = grid(24, 1.0);
    let mut m = Model::new();
    let em = emit_bess(&mut m, &battery(), &g).unwrap();
    let v = &em.vars;
    for vars in [&v.p_ch, &v.p_dsc, &v.up_ch, &v.up_dsc, &v.dn_ch, &v.dn_dsc] {
        for &x in vars {
            m.set_bounds(x, 0.0, 0.0).unwrap();
        }
    }
    m.set_objective(LinExpr::new()).unwrap();
    let sol = solve_lp(&m.relaxed(), &opts()).unwrap();
    assert!(sol.is_optimal());
    for traj in [&v.soc, &v.soc_up, &v.soc_dn] {
        assert_eq!(traj.len(), 25);
        for e in traj {
            assert!((e.eval(&sol.values) - 0.5).abs() < 1e-9);
        }
    }
}

fn ordered(lo: &[f64], mid: &[f64], hi: &[f64]) -> bool {
    lo.iter().zip(mid).zip(hi).all(|((l, m), h)| *l <= m + 1e-7 && *m <= h + 1e-7)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// Under any objective the under/base/over SoC trajectories stay ordered
    /// and inside the SoC band, and the cycle caps hold on the extremes.
    #[test]
    fn bess_trajectories_are_ordered(seed in 0u64..1_000, soc0 in 0.25f64..0.85) {
        let g = grid(4, 6.0);
        let mut b = battery();
        b.soc0 = soc0;
        b.e_nom = 20.0;
        let mut m = Model::new();
        let em = emit_bess(&mut m, &b, &g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut obj = LinExpr::new();
        for k in 0..4 {
            obj = obj + em.power[k].clone().scaled(rng.gen_range(-1.0..1.0));
            obj = obj + em.flx_up[k].clone().scaled(-rng.gen_range(0.0..1.0));
            obj = obj + em.flx_dn[k].clone().scaled(rng.gen_range(0.0..1.0));
        }
        m.set_objective(obj).unwrap();
        let sol = solve_milp(&m, 5_000, &opts()).unwrap();
        prop_assert_eq!(sol.status, Status::Optimal);
        let ev = |t: &[LinExpr]| t.iter().map(|e| e.eval(&sol.values)).collect::<Vec<f64>>();
        let (base, over, under) = (ev(&em.vars.soc), ev(&em.vars.soc_up), ev(&em.vars.soc_dn));
        prop_assert!(ordered(&under, &base, &over));
        for s in base.iter().chain(&over).chain(&under) {
            prop_assert!(*s >= b.soc_min - 1e-7 && *s <= b.soc_max + 1e-7);
        }
        let val = |v: &[dap_milp::VarId]| v.iter().map(|&x| sol.value(x)).collect::<Vec<f64>>();
        let (pc, pd) = (val(&em.vars.p_ch), val(&em.vars.p_dsc));
        let (uc, dd) = (val(&em.vars.up_ch), val(&em.vars.dn_dsc));
        let over_ch: Vec<f64> = pc.iter().zip(&uc).map(|(a, b)| a + b).collect();
        let under_dsc: Vec<f64> = pd.iter().zip(&dd).map(|(a, b)| a + b).collect();
        prop_assert!(b.charge_cycles(&over_ch, 6.0) <= b.l_ch + 1e-7);
        prop_assert!(b.discharge_cycles(&under_dsc, 6.0) <= b.l_dsc + 1e-7);
        for k in 0..4 {
            prop_assert!(pc[k].min(-pd[k]) <= 1e-7);
        }
    }
}

fn cooler(grid: &TimeGrid, sigma: f64) -> TclParams {
    TclParams {
        name: "ac".into(),
        r: 2.5,
        c: 4.0,
        eta_c: 3.0,
        p_max: 2.0,
        theta_min: 21.0,
        theta_max: 25.0,
        theta0: 23.0,
        up: Profile::constant(grid, 1.0, Unit::Pu),
        ext: Forecast::new(
            Profile::constant(grid, 30.0, Unit::Celsius),
            Profile::constant(grid, sigma, Unit::Celsius),
        )
        .unwrap(),
    }
}

#[test]
fn thermal_coefficient_and_fixed_point() {
    let g = grid(96, 0.25);
    let t = cooler(&g, 0.0);
    assert!((t.alpha(0.25) - (-0.025f64).exp()).abs() < 1e-15);
    assert!((t.alpha(0.25) - 0.97531).abs() < 5e-6);
    let ext = vec![t.theta0; 96];
    let th = t.trajectory(&vec![0.0; 96], &ext, 0.25);
    assert!(th.iter().all(|&v| (v - t.theta0).abs() < 1e-12));
}

#[test]
fn comfort_band_tightening() {
    let g = grid(24, 1.0);
    let t = cooler(&g, 0.1);
    let q = quantile_gauss(0.05).unwrap();
    let (lo, hi) = t.tightened_band(1, q);
    assert!((lo - 21.164485).abs() < 1e-6);
    assert!((hi - 24.835515).abs() < 1e-6);

    let mut narrow = cooler(&g, 1.5);
    narrow.theta_min = 22.0;
    narrow.theta_max = 24.0;
    assert!(emit_tcl(&mut Model::new(), &narrow, &g, 0.05).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn tcl_trajectories_are_ordered(seed in 0u64..1_000, ext in 24.0f64..32.0) {
        let g = grid(6, 4.0);
        let mut t = cooler(&g, 0.1);
        t.ext.mean = Profile::constant(&g, ext, Unit::Celsius);
        let mut m = Model::new();
        let em = emit_tcl(&mut m, &t, &g, 0.05).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut obj = LinExpr::new();
        for k in 0..6 {
            obj = obj + em.power[k].clone().scaled(rng.gen_range(0.0..1.0));
            obj = obj + em.flx_up[k].clone().scaled(-rng.gen_range(0.0..1.0));
            obj = obj + em.flx_dn[k].clone().scaled(rng.gen_range(0.0..1.0));
        }
        m.set_objective(obj).unwrap();
        let sol = solve_milp(&m, 5_000, &opts()).unwrap();
        prop_assert_eq!(sol.status, Status::Optimal);
        let ev = |t: &[LinExpr]| t.iter().map(|e| e.eval(&sol.values)).collect::<Vec<f64>>();
        let (base, over, under) = (ev(&em.vars.theta), ev(&em.vars.theta_over), ev(&em.vars.theta_under));
        prop_assert!(ordered(&under, &base, &over));
        let q = quantile_gauss(0.05).unwrap();
        for k in 1..=6 {
            let (lo, hi) = t.tightened_band(k, q);
            prop_assert!(over[k] <= hi + 1e-7 && under[k] >= lo - 1e-7);
        }
    }
}

#[test]
fn fixed_profiles_combine() {
    let g = grid(2, 12.0);
    let kw = |v: f64| Profile::constant(&g, v, Unit::Kw);
    let f = FixedProfiles {
        res: vec![Forecast::new(kw(1.0), kw(0.04f64.sqrt())).unwrap()],
        upd: vec![kw(0.2)],
        ncd: Forecast::new(kw(0.5), kw(0.05f64.sqrt())).unwrap(),
    };
    let e = emit_fixed(&f, &g).unwrap();
    for k in 0..2 {
        assert!((e.power[k] + 0.3).abs() < 1e-12);
        assert!((e.variance[k] - 0.09).abs() < 1e-12);
        assert!((e.sigma_unc()[k] - 0.3).abs() < 1e-12);
    }
    let none = emit_fixed(&FixedProfiles::none(&g), &g).unwrap();
    assert_eq!(none.power, vec![0.0, 0.0]);
    assert_eq!(none.variance, vec![0.0, 0.0]);
}

#[test]
fn quantile_reference_values() {
    assert!((quantile_gauss(0.05).unwrap() - 1.644854).abs() < 1e-6);
    assert!((quantile_gauss(0.25).unwrap() - 0.674490).abs() < 1e-6);
    assert!(quantile_gauss(0.5 - 1e-12).unwrap().abs() < 1e-10);
    for r in [0.0, 0.5, -0.1, 0.7, f64::NAN] {
        assert!(quantile_gauss(r).is_err());
    }
}

proptest! {
    #[test]
    fn quantile_inverts_erf(r in 1e-6f64..0.4999) {
        let q = quantile_gauss(r).unwrap();
        let lhs = statrs::function::erf::erf(q / std::f64::consts::SQRT_2);
        prop_assert!((lhs - (1.0 - 2.0 * r)).abs() < 1e-9, "r={} q={} erf={}", r, q, lhs);
    }
}
