use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use degenpde::config::{load_spec, parse_axis, run_spec, sweep_spec, Overrides};
use degenpde::experiments::{run_experiment, ExperimentOptions, EXPERIMENTS};
use degenpde::report::Outcome;
use degenpde::solver::Mode;
use degenpde::Error;

#[derive(Parser)]
#[command(name = "degenpde", version, about = "Verification batches for degenerate parabolic problems on singular manifolds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Directory receiving the CSV and JSON reports.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fill the wall_ms column (makes the CSV run-dependent).
    #[arg(long)]
    timings: bool,
}

#[derive(Args, Clone)]
struct SuiteArgs {
    #[command(flatten)]
    common: Common,
    /// Base refinement level of the suite.
    #[arg(long)]
    grid: Option<usize>,
}

#[derive(Args, Clone)]
struct OverrideArgs {
    /// Cells per axis; a list gives a refinement run.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<usize>>,
    #[arg(long)]
    dt: Option<f64>,
    /// Number of time levels, each halving dt.
    #[arg(long)]
    dt_levels: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    lambda: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    /// direct, desingularized or both.
    #[arg(long, value_parser = parse_mode)]
    mode: Option<Mode>,
    #[arg(long)]
    t_min: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a problem-spec file, optionally over refinement levels.
    Run {
        spec: PathBuf,
        #[command(flatten)]
        overrides: OverrideArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Run a named verification suite.
    Verify {
        suite: String,
        #[command(flatten)]
        args: SuiteArgs,
    },
    /// Cartesian sweep over parameter axes, e.g. `--axes alpha=1,2 --axes lambda=0,1`.
    Sweep {
        spec: PathBuf,
        #[arg(long = "axes", required = true)]
        axes: Vec<String>,
        #[command(flatten)]
        overrides: OverrideArgs,
        #[command(flatten)]
        common: Common,
    },
    /// List the registered suites.
    List,
    /// Shorthand for `verify verify-tensor`.
    VerifyTensor(SuiteArgs),
    /// Shorthand for `verify verify-transform`.
    VerifyTransform(SuiteArgs),
    /// Shorthand for `verify verify-norms`.
    VerifyNorms(SuiteArgs),
    /// Shorthand for `verify poincare-identity`.
    PoincareIdentity(SuiteArgs),
    /// Shorthand for `verify cusp-convergence`.
    CuspConvergence(SuiteArgs),
    /// Shorthand for `verify maxreg-sweep`.
    MaxregSweep(SuiteArgs),
    /// Shorthand for `verify semigroup-check`.
    SemigroupCheck(SuiteArgs),
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    match s {
        "direct" => Ok(Mode::Direct),
        "desingularized" => Ok(Mode::Desingularized),
        "both" => Ok(Mode::Both),
        _ => Err(format!("expected direct, desingularized or both, got `{s}`")),
    }
}

impl OverrideArgs {
    fn into_overrides(self, seed: u64) -> Overrides {
        Overrides {
            grid: self.grid,
            dt: self.dt,
            dt_levels: self.dt_levels,
            alpha: self.alpha,
            lambda: self.lambda,
            p: self.p,
            theta: self.theta,
            mode: self.mode,
            t_min: self.t_min,
            seed: Some(seed),
        }
    }
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into())
}

fn write(path: PathBuf, text: &str) -> Result<(), Error> {
    fs::write(&path, text).map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))
}

/// Writes `<name>.csv`, `<name>.json` and one `<name>_<table>.csv` per table.
fn emit(outcome: &Outcome, common: &Common) -> Result<(), Error> {
    fs::create_dir_all(&common.out)
        .map_err(|e| Error::Config(format!("cannot create {}: {e}", common.out.display())))?;
    let name = &outcome.experiment;
    write(common.out.join(format!("{name}.csv")), &outcome.runs_csv(common.timings)?)?;
    write(common.out.join(format!("{name}.json")), &outcome.summary_json()?)?;
    for t in &outcome.tables {
        write(common.out.join(format!("{name}_{}.csv", t.name)), &t.to_csv()?)?;
    }
    Ok(())
}

fn suite(name: &str, args: SuiteArgs) -> Result<(Outcome, Common), Error> {
    let opts = ExperimentOptions {
        seed: args.common.seed,
        grid: args.grid,
    };
    Ok((run_experiment(name, &opts)?, args.common))
}

fn execute(command: Command) -> Result<(Outcome, Common), Error> {
    match command {
        Command::Run { spec, overrides, common } => {
            let file = load_spec(&spec)?;
            let ov = overrides.into_overrides(common.seed);
            Ok((run_spec(&stem(&spec), &file, &ov)?, common))
        }
        Command::Sweep {
            spec,
            axes,
            overrides,
            common,
        } => {
            let file = load_spec(&spec)?;
            let axes = axes.iter().map(|a| parse_axis(a)).collect::<Result<Vec<_>, _>>()?;
            let ov = overrides.into_overrides(common.seed);
            Ok((sweep_spec(&format!("{}_sweep", stem(&spec)), &file, &ov, &axes)?, common))
        }
        Command::Verify { suite: name, args } => suite(&name, args),
        Command::List => unreachable!("handled before dispatch"),
        Command::VerifyTensor(a) => suite("verify-tensor", a),
        Command::VerifyTransform(a) => suite("verify-transform", a),
        Command::VerifyNorms(a) => suite("verify-norms", a),
        Command::PoincareIdentity(a) => suite("poincare-identity", a),
        Command::CuspConvergence(a) => suite("cusp-convergence", a),
        Command::MaxregSweep(a) => suite("maxreg-sweep", a),
        Command::SemigroupCheck(a) => suite("semigroup-check", a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Command::List = cli.command {
        for name in EXPERIMENTS {
            println!("{name}");
        }
        return ExitCode::SUCCESS;
    }
    let (outcome, common) = match execute(cli.command) {
        Ok(v) => v,
        Err(e @ Error::Schema { .. }) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    // reports are written even when invariants fail
    if let Err(e) = emit(&outcome, &common) {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    print!("{}", outcome.render());
    for t in &outcome.tables {
        println!("\n[{}]", t.name);
        print!("{}", t.to_csv().unwrap_or_default());
    }
    let failures = outcome.failures();
    if failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        for f in failures {
            eprintln!("failed invariant: {}", f.id);
        }
        ExitCode::from(1)
    }
}
