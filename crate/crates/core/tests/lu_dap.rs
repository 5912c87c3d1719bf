use std::process::Command;

use dap_core::audit::audit_plan;
use dap_core::devices::{BessParams, FixedProfiles, TclParams};
use dap_core::lu_dap::{build_lu_dap, solve_lu_dap, LuConfig, LuPlan, SolverChoice};
use dap_core::scenario::{generate_fleet, ScenarioSpec};
use dap_core::types::{make_time_grid, Forecast, PriceSet, Profile, TimeGrid, Unit};
use dap_core::DapError;
use dap_milp::{solve_milp, SolverOptions};
use proptest::prelude::*;

fn exact() -> SolverChoice {
    SolverChoice::Builtin {
        node_limit: 1_000_000,
        max_binaries: 2_000,
        rel_gap: 0.0,
    }
}

fn empty_lu(grid: &TimeGrid, c_flx: f64) -> LuConfig {
    LuConfig {
        name: "lu".into(),
        abps: vec![],
        pevs: vec![],
        besses: vec![],
        tcls: vec![],
        fixed: FixedProfiles::none(grid),
        p_min: 0.0,
        p_max: 3.0,
        prices: PriceSet::flat(grid, 0.2, 0.0, c_flx, 30.0),
        r: 0.05,
        equal_reserve: false,
    }
}

fn battery(soc0: f64) -> BessParams {
    BessParams {
        name: "bess".into(),
        e_nom: 5.0,
        eta_ch: 0.95,
        eta_dsc: 1.05,
        p_max_ch: 2.0,
        p_min_dsc: -2.0,
        soc_min: 0.2,
        soc_max: 0.9,
        soc0,
        l_ch: 1.0,
        l_dsc: 1.0,
    }
}

fn cooler(grid: &TimeGrid, sigma: f64) -> TclParams {
    TclParams {
        name: "ac".into(),
        r: 2.5,
        c: 4.0,
        eta_c: 3.0,
        p_max: 1.5,
        theta_min: 22.0,
        theta_max: 26.0,
        theta0: 24.0,
        up: Profile::constant(grid, 1.0, Unit::Pu),
        ext: Forecast::new(
            Profile::from_fn(grid, Unit::Celsius, |k| 27.0 + k as f64),
            Profile::constant(grid, sigma, Unit::Celsius),
        )
        .unwrap(),
    }
}

fn load(grid: &TimeGrid, kw: f64, sigma: f64) -> FixedProfiles {
    FixedProfiles {
        ncd: Forecast::new(
            Profile::constant(grid, kw, Unit::Kw),
            Profile::constant(grid, sigma, Unit::Kw),
        )
        .unwrap(),
        ..FixedProfiles::none(grid)
    }
}

fn assert_clean(plan: &LuPlan, cfg: &LuConfig, grid: &TimeGrid) {
    let rep = audit_plan(plan, cfg, grid);
    assert!(rep.is_clean(1e-6), "audit:\n{rep}");
}

#[test]
fn fixed_load_only_costs_its_energy() {
    let g = make_time_grid(96, 0.25).unwrap();
    let mut cfg = empty_lu(&g, 1.0);
    cfg.fixed = load(&g, 1.0, 0.0);
    let plan = solve_lu_dap(&cfg, &g, &SolverChoice::default()).unwrap();
    assert!((plan.objective - 4.8).abs() < 1e-9, "{}", plan.objective);
    assert_eq!(plan.total_reserve(), 0.0);
    assert!(plan.e_hat.values().iter().all(|&e| (e - 0.25).abs() < 1e-12));
    assert_clean(&plan, &cfg, &g);
}

#[test]
fn battery_without_export_offers_no_negative_reserve() {
    let g = make_time_grid(24, 1.0).unwrap();
    let mut cfg = empty_lu(&g, 1.0);
    cfg.besses = vec![battery(0.5)];
    let plan = solve_lu_dap(&cfg, &g, &SolverChoice::default()).unwrap();
    assert!(plan.de_dn.values().iter().all(|&v| v.abs() < 1e-9), "{:?}", plan.de_dn);
    assert!(plan.de_up.sum() > 0.0);
    assert_clean(&plan, &cfg, &g);
}

#[test]
fn equal_reserve_is_echoed() {
    let g = make_time_grid(24, 1.0).unwrap();
    let mut cfg = empty_lu(&g, 1.0);
    cfg.besses = vec![battery(0.5)];
    cfg.fixed = load(&g, 0.8, 0.0);
    cfg.equal_reserve = true;
    let plan = solve_lu_dap(&cfg, &g, &SolverChoice::default()).unwrap();
    for k in 0..24 {
        assert!((plan.de_up.get(k) + plan.de_dn.get(k)).abs() < 1e-9);
    }
    assert!(plan.de_up.sum() > 0.0);
    assert_clean(&plan, &cfg, &g);
}

#[test]
fn uncovered_uncertainty_is_infeasible_with_diagnostic() {
    let g = make_time_grid(24, 1.0).unwrap();
    let mut cfg = empty_lu(&g, 1.0);
    cfg.fixed = load(&g, 1.0, 0.2);
    match solve_lu_dap(&cfg, &g, &SolverChoice::default()) {
        Err(DapError::Infeasible { diagnostic }) => assert!(diagnostic.contains("step 0"), "{diagnostic}"),
        other => panic!("expected infeasible, got {other:?}"),
    }
}

fn small_lu(c_flx: f64, soc0: f64, load_kw: f64) -> (LuConfig, TimeGrid) {
    let g = make_time_grid(6, 4.0).unwrap();
    let mut cfg = empty_lu(&g, c_flx);
    cfg.besses = vec![battery(soc0)];
    cfg.tcls = vec![cooler(&g, 0.0)];
    cfg.fixed = load(&g, load_kw, 0.0);
    cfg.p_min = -3.0;
    (cfg, g)
}

#[test]
fn idle_uncertainty_capacity_is_never_chosen() {
    let (cfg, g) = small_lu(1.0, 0.5, 0.6);
    let plan = solve_lu_dap(&cfg, &g, &exact()).unwrap();
    assert!(plan.stats.proven);
    assert!(plan.unc_up.iter().chain(&plan.unc_dn).all(|v| v.abs() < 1e-7));

    // Forcing the split variables to zero changes nothing.
    let mut lu = build_lu_dap(&cfg, &g).unwrap();
    let s = (&lu.besses[0].split, &lu.tcls[0].split);
    let unc: Vec<_> = [s.0, s.1]
        .iter()
        .flat_map(|s| s.up_unc.iter().chain(&s.dn_unc).copied().collect::<Vec<_>>())
        .collect();
    for v in unc {
        lu.model.set_bounds(v, 0.0, 0.0).unwrap();
    }
    let opts = SolverOptions {
        max_binaries: 2_000,
        ..SolverOptions::default()
    };
    let forced = solve_milp(&lu.model, 1_000_000, &opts).unwrap();
    assert!(forced.is_optimal());
    assert!((forced.objective - plan.objective).abs() < 1e-6);
}

#[test]
fn default_house_respects_the_import_cap() {
    let spec = ScenarioSpec::minimal(1, 7);
    let g = spec.grid().unwrap();
    assert_eq!(g.steps(), 24);
    let cfg = &generate_fleet(&spec).unwrap()[0];
    let plan = solve_lu_dap(cfg, &g, &spec.solver_choice()).unwrap();
    let dt = g.dt();
    for k in 0..24 {
        let over = plan.power[k] + plan.de_up.get(k) / dt + plan.unc_up[k];
        let under = plan.power[k] + plan.de_dn.get(k) / dt + plan.unc_dn[k];
        assert!(over <= 3.0 + 1e-6, "step {k}: {over}");
        assert!(under >= cfg.p_min - 1e-6, "step {k}: {under}");
        assert!(plan.de_up.get(k) >= 0.0 && plan.de_dn.get(k) <= 0.0);
        assert!(plan.e_imp.get(k) >= 0.0 && plan.e_exp.get(k) <= 0.0);
        assert!((plan.e_hat.get(k) - plan.e_imp.get(k) - plan.e_exp.get(k)).abs() < 1e-9);
    }
    assert_clean(&plan, cfg, &g);
}

fn highs_available() -> bool {
    Command::new("python3")
        .args(["-c", "import highspy"])
        .status()
        .map(|s| s.success())
        .unwrap_or(false)
}

#[test]
fn builtin_matches_external_solver() {
    if !highs_available() {
        eprintln!("highspy not installed; skipping");
        return;
    }
    let script = concat!(env!("CARGO_MANIFEST_DIR"), "/../../scripts/highs_solve.py");
    let dir = tempfile::tempdir().unwrap();
    for (c_flx, soc0) in [(0.5, 0.3), (1.0, 0.5), (2.0, 0.8)] {
        let (cfg, g) = small_lu(c_flx, soc0, 0.5);
        let ours = solve_lu_dap(&cfg, &g, &exact()).unwrap();
        let ext = SolverChoice::LpFile {
            dir: dir.path().to_path_buf(),
            command: Some(format!("python3 {script} {{lp}} {{sol}}")),
        };
        let theirs = solve_lu_dap(&cfg, &g, &ext).unwrap();
        assert!((ours.objective - theirs.objective).abs() < 1e-5, "{} vs {}", ours.objective, theirs.objective);
        assert_clean(&theirs, &cfg, &g);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    /// A higher reserve price never buys less reserve.
    #[test]
    fn reserve_grows_with_its_price(
        soc0 in 0.25f64..0.85,
        load_kw in 0.0f64..1.5,
        c1 in 0.0f64..2.0,
        dc in 0.1f64..2.0,
    ) {
        let (lo, g) = small_lu(c1, soc0, load_kw);
        let (hi, _) = small_lu(c1 + dc, soc0, load_kw);
        let a = solve_lu_dap(&lo, &g, &exact()).unwrap();
        let b = solve_lu_dap(&hi, &g, &exact()).unwrap();
        prop_assert!(a.stats.proven && b.stats.proven);
        prop_assert!(b.total_reserve() >= a.total_reserve() - 1e-4,
            "{} at c_flx={} vs {} at {}", a.total_reserve(), c1, b.total_reserve(), c1 + dc);
        for (p, c) in [(&a, &lo), (&b, &hi)] {
            let rep = audit_plan(p, c, &g);
            prop_assert!(rep.is_clean(1e-6), "{}", rep);
        }
    }
}
