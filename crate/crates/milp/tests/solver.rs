mod support;

use std::path::Path;
use std::process::Command;

use dap_milp::{
    read_solution_file, solve_lp, solve_milp, write_lp_file, LinExpr, MilpError, Model, Relation,
    SolverOptions, Status,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use support::{exhaustive_binaries, random_instance, vertex_enumeration};

fn knapsack() -> Model {
    let mut m = Model::new();
    let x1 = m.binary("x1");
    let x2 = m.binary("x2");
    m.add_constraint(x1 + x2, Relation::Le, 1.0, "cap").unwrap();
    m.set_objective(-(x1 * 3.0 + x2 * 2.0)).unwrap();
    m
}

#[test]
fn lp_single_active_constraint() {
    let mut m = Model::new();
    let x = m.continuous(f64::NEG_INFINITY, f64::INFINITY, "x");
    m.add_constraint(x, Relation::Ge, 3.0, "c").unwrap();
    m.set_objective(x).unwrap();
    let s = solve_lp(&m, &SolverOptions::default()).unwrap();
    assert_eq!(s.status, Status::Optimal);
    assert!((s.value(x) - 3.0).abs() < 1e-9);
    assert!((s.objective - 3.0).abs() < 1e-9);
}

#[test]
fn lp_two_simplex() {
    let mut m = Model::new();
    let x = m.continuous(0.0, 1.0, "x");
    let y = m.continuous(0.0, 1.0, "y");
    m.add_constraint(x + y, Relation::Le, 1.0, "c").unwrap();
    m.set_objective(-(LinExpr::from(x) + y)).unwrap();
    let s = solve_lp(&m, &SolverOptions::default()).unwrap();
    assert!((s.objective + 1.0).abs() < 1e-9);
}

#[test]
fn lp_matches_vertex_enumeration_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut checked = 0;
    for _ in 0..60 {
        let inst = random_instance(&mut rng, 5, 0, 8);
        let oracle = vertex_enumeration(&inst.model);
        let s = solve_lp(&inst.model, &SolverOptions::default()).unwrap();
        match oracle {
            Some(z) => {
                assert_eq!(s.status, Status::Optimal);
                assert!((s.objective - z).abs() < 1e-6, "lp {} vs oracle {z}", s.objective);
                checked += 1;
            }
            None => assert_eq!(s.status, Status::Infeasible),
        }
    }
    assert!(checked > 30, "too few feasible instances: {checked}");
}

#[test]
fn milp_knapsack() {
    let m = knapsack();
    let s = solve_milp(&m, 1000, &SolverOptions::default()).unwrap();
    assert_eq!(s.status, Status::Optimal);
    assert_eq!(s.values, vec![1.0, 0.0]);
    assert!((s.objective + 3.0).abs() < 1e-9);
}

#[test]
fn milp_with_binaries_fixed_by_constraints_equals_lp() {
    let mut m = Model::new();
    let b1 = m.binary("b1");
    let b2 = m.binary("b2");
    let x = m.continuous(0.0, 10.0, "x");
    m.add_constraint(b1, Relation::Eq, 1.0, "fix1").unwrap();
    m.add_constraint(b2, Relation::Le, 0.0, "fix2").unwrap();
    m.add_constraint(x - b1 * 4.0 + b2, Relation::Ge, 0.5, "link").unwrap();
    m.set_objective(x * 2.0 + b1).unwrap();
    let opts = SolverOptions::default();
    let lp = solve_lp(&m, &opts).unwrap();
    let ip = solve_milp(&m, 100, &opts).unwrap();
    assert_eq!(ip.status, Status::Optimal);
    assert!((lp.objective - ip.objective).abs() < 1e-9);
    assert_eq!(ip.nodes, 1);
}

#[test]
fn milp_matches_exhaustive_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let opts = SolverOptions::default();
    for n_bin in [1, 3, 6, 9, 12] {
        for _ in 0..6 {
            let inst = random_instance(&mut rng, 6, n_bin, 7);
            let oracle = exhaustive_binaries(&inst.model);
            let s = solve_milp(&inst.model, 100_000, &opts).unwrap();
            match oracle {
                Some(z) => {
                    assert_eq!(s.status, Status::Optimal);
                    assert!((s.objective - z).abs() < 1e-6, "{} vs {z}", s.objective);
                    let (viol, _) = inst.model.max_violation(&s.values);
                    assert!(viol <= 1e-6);
                    assert!(inst.model.max_integrality_gap(&s.values) <= 1e-6);
                }
                None => assert_eq!(s.status, Status::Infeasible),
            }
        }
    }
}

#[test]
fn node_limit_returns_incumbent_status() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let inst = random_instance(&mut rng, 4, 14, 10);
    let s = solve_milp(&inst.model, 1, &SolverOptions::default()).unwrap();
    assert!(matches!(s.status, Status::NodeLimit | Status::Optimal | Status::Infeasible));
    if s.status == Status::NodeLimit && !s.values.is_empty() {
        assert!(inst.model.max_violation(&s.values).0 <= 1e-6);
    }
}

#[test]
fn binary_ceiling_is_enforced() {
    let mut m = Model::new();
    for i in 0..5 {
        m.binary(format!("b{i}"));
    }
    let opts = SolverOptions {
        max_binaries: 4,
        ..SolverOptions::default()
    };
    assert!(matches!(
        solve_milp(&m, 10, &opts),
        Err(MilpError::TooManyBinaries { found: 5, limit: 4 })
    ));
}

#[test]
fn solution_import_rejects_bad_points() {
    let m = knapsack();
    let dir = tempdir();
    let path = dir.join("bad.sol");
    std::fs::write(&path, "v0 1\nv1 1\n").unwrap();
    match read_solution_file(&path, &m) {
        Err(MilpError::InfeasibleImport { index, .. }) => assert_eq!(index, 0),
        other => panic!("expected infeasible import, got {other:?}"),
    }
    std::fs::write(&path, "v0 1\n").unwrap();
    assert!(matches!(read_solution_file(&path, &m), Err(MilpError::MissingValues(_))));
    std::fs::write(&path, "v0 1\nv1 0\nx7 2\n").unwrap();
    assert!(matches!(read_solution_file(&path, &m), Err(MilpError::Parse { line: 3, .. })));
    std::fs::write(&path, "# comment\nv0 1 # trailing\n\nv1 0\n").unwrap();
    let s = read_solution_file(&path, &m).unwrap();
    assert!((s.objective + 3.0).abs() < 1e-12);
}

fn tempdir() -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("dap-milp-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn highs_available() -> bool {
    Command::new("python3")
        .args(["-c", "import highspy"])
        .status()
        .map(|s| s.success())
        .unwrap_or(false)
}

#[test]
fn external_solver_round_trip() {
    if !highs_available() {
        eprintln!("skipping: python3 with highspy not available");
        return;
    }
    let script = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scripts/highs_solve.py");
    let dir = tempdir();
    let lp = dir.join("knapsack.lp");
    let sol = dir.join("knapsack.sol");
    let m = knapsack();
    write_lp_file(&m, &lp).unwrap();
    let status = Command::new("python3").arg(&script).arg(&lp).arg(&sol).status().unwrap();
    assert!(status.success());
    let s = read_solution_file(&sol, &m).unwrap();
    assert!((s.objective + 3.0).abs() < 1e-9);

    // Random instances: builtin and external agree.
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let opts = SolverOptions::default();
    for _ in 0..5 {
        let inst = random_instance(&mut rng, 5, 8, 6);
        let ours = solve_milp(&inst.model, 100_000, &opts).unwrap();
        write_lp_file(&inst.model, &lp).unwrap();
        let _ = std::fs::remove_file(&sol);
        let ok = Command::new("python3").arg(&script).arg(&lp).arg(&sol).status().unwrap();
        if ours.status == Status::Optimal {
            assert!(ok.success());
            let theirs = read_solution_file(&sol, &inst.model).unwrap();
            assert!((theirs.objective - ours.objective).abs() < 1e-6);
        } else {
            assert!(!ok.success());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn reported_objective_is_recomputable(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = random_instance(&mut rng, 8, 0, 6);
        let s = solve_lp(&inst.model, &SolverOptions::default()).unwrap();
        if s.status == Status::Optimal {
            let recomputed = inst.model.objective().eval(&s.values);
            prop_assert!((recomputed - s.objective).abs() < 1e-7);
            prop_assert!(inst.model.max_violation(&s.values).0 <= 1e-6);
        }
    }

    #[test]
    fn incumbent_trace_never_increases(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = random_instance(&mut rng, 5, 8, 7);
        let s = solve_milp(&inst.model, 100_000, &SolverOptions::default()).unwrap();
        for w in s.incumbent_trace.windows(2) {
            prop_assert!(w[1] <= w[0]);
        }
        if s.status == Status::Optimal {
            prop_assert_eq!(*s.incumbent_trace.last().unwrap(), s.objective);
        }
    }
}
