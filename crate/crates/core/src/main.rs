use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use dap_core::lu_dap::SolverChoice;
use dap_core::pipeline::{read_request, run_pipeline, summary, write_outputs, Stage};
use dap_core::scenario::load_scenario;

/// Decentralized day-ahead planning for a DR aggregator.
#[derive(Parser)]
#[command(name = "dap", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve every LU and aggregate the plans.
    Plan(Common),
    /// Plan, then split a DR request among the LUs.
    Dispatch {
        #[command(flatten)]
        common: Common,
        /// CSV with columns step,dE_ref_kWh; defaults to the scenario's DR.
        #[arg(long)]
        dr: Option<PathBuf>,
    },
    /// Plan, dispatch and simulate N days.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        runs: Option<usize>,
    },
    /// The whole chain with the scenario's settings.
    Full(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario file (JSON).
    spec: PathBuf,
    /// `builtin` or `lpfile:<dir>`.
    #[arg(long)]
    solver: Option<String>,
    /// Shell command for the LP-file bridge; `{lp}` and `{sol}` are replaced.
    #[arg(long)]
    lp_command: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn solver_choice(c: &Common, spec: &dap_core::scenario::ScenarioSpec) -> anyhow::Result<SolverChoice> {
    let mut choice = match c.solver.as_deref() {
        None => spec.solver_choice(),
        Some("builtin") => match spec.solver_choice() {
            b @ SolverChoice::Builtin { .. } => b,
            SolverChoice::LpFile { .. } => SolverChoice::Builtin {
                node_limit: spec.node_limit,
                max_binaries: 2_000,
                rel_gap: spec.mip_gap,
            },
        },
        Some(s) => match s.strip_prefix("lpfile:") {
            Some(dir) if !dir.is_empty() => SolverChoice::LpFile {
                dir: dir.into(),
                command: None,
            },
            _ => bail!("--solver must be 'builtin' or 'lpfile:<dir>', got '{s}'"),
        },
    };
    if let Some(cmd) = &c.lp_command {
        match &mut choice {
            SolverChoice::LpFile { command, .. } => *command = Some(cmd.clone()),
            SolverChoice::Builtin { .. } => bail!("--lp-command needs --solver lpfile:<dir>"),
        }
    }
    Ok(choice)
}

fn run(cli: Cli) -> anyhow::Result<usize> {
    let (common, stage_of): (&Common, Box<dyn Fn(&dap_core::scenario::ScenarioSpec) -> anyhow::Result<Stage>>) =
        match &cli.cmd {
            Cmd::Plan(c) => (c, Box::new(|_| Ok(Stage::Plan))),
            Cmd::Dispatch { common, dr } => (
                common,
                Box::new(move |spec| {
                    let req = match dr {
                        Some(p) => Some(read_request(p, &spec.grid()?)?),
                        None => None,
                    };
                    Ok(Stage::Dispatch(req))
                }),
            ),
            Cmd::Simulate { common, runs } => (
                common,
                Box::new(move |spec| Ok(Stage::Simulate { runs: runs.unwrap_or(spec.runs) })),
            ),
            Cmd::Full(c) => (c, Box::new(|spec| Ok(Stage::Simulate { runs: spec.runs }))),
        };
    let mut spec = load_scenario(&common.spec)?;
    if let Some(seed) = common.seed {
        spec.seed = seed;
    }
    let solver = solver_choice(common, &spec)?;
    let stage = stage_of(&spec)?;
    let out = run_pipeline(&spec, &stage, &solver)?;
    let files = write_outputs(&out, &common.out)
        .with_context(|| format!("writing results to {}", common.out.display()))?;
    print!("{}", summary(&out));
    for f in files {
        log::info!("wrote {}", f.display());
    }
    Ok(out.hard_violations())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(n) => {
            eprintln!("{n} hard violations");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
