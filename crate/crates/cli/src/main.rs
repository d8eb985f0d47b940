use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use halfspace_cli::error::{CliError, EXIT_CONFIG, EXIT_PASS};
use halfspace_cli::report::markdown_report;
use halfspace_cli::run::{reports_exit_code, run_profile, run_solve, run_verify, scenario_dir};
use halfspace_cli::sweep::{run_sweep, sweep_exit_code, Axis};
use halfspace_cli::Scenario;
use halfspace_core::CheckReport;

/// Environment variable naming the output directory.
const OUT_ENV: &str = "HALFSPACE_OUT";

#[derive(Parser)]
#[command(name = "halfspace", version, about = "Profiles, strip solves and verification suites for singular half-space problems")]
struct Cli {
    /// Output directory; defaults to $HALFSPACE_OUT, then ./results.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Reserved; every computation is deterministic.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate the 1D profile and run the profile-level checks.
    Profile { scenario: PathBuf },
    /// Solve the strip problem and write the field and solver trace.
    Solve { scenario: PathBuf },
    /// Run the scenario's check list; exit 0 iff every check passes.
    Verify { scenario: PathBuf },
    /// Run `verify` for each value of one scenario key.
    Sweep {
        template: PathBuf,
        /// `key=v1,v2,...`; a bare key must be unique in the template,
        /// otherwise use a dotted path such as `profile.M`.
        #[arg(long)]
        axis: String,
    },
    /// Summarize every report below a results directory as markdown.
    Report { dir: PathBuf },
}

fn out_root(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("results"))
}

fn print_reports(reports: &[CheckReport]) {
    for r in reports {
        println!("{} {}", if r.passed { "PASS" } else { "FAIL" }, r.check_name);
    }
}

fn load(path: &Path) -> Result<Scenario, CliError> {
    Scenario::load(path)
}

fn execute(cli: Cli) -> Result<u8, CliError> {
    let root = out_root(cli.out);
    match cli.command {
        Command::Profile { scenario } => {
            let sc = load(&scenario)?;
            let reports = run_profile(&sc, &scenario_dir(&root, &sc))?;
            print_reports(&reports);
            Ok(reports_exit_code(&reports))
        }
        Command::Solve { scenario } => {
            let sc = load(&scenario)?;
            let dir = scenario_dir(&root, &sc);
            let (field, solution) = run_solve(&sc, &dir)?;
            match solution {
                Some(s) => println!(
                    "solved {} nodes, residual {:e}{}",
                    field.values().len(),
                    s.residual,
                    if s.roundoff_limited { " (rounding-limited)" } else { "" }
                ),
                None => println!("synthetic field with {} nodes", field.values().len()),
            }
            println!("wrote {}", dir.display());
            Ok(EXIT_PASS)
        }
        Command::Verify { scenario } => {
            let sc = load(&scenario)?;
            let reports = run_verify(&sc, &scenario_dir(&root, &sc))?;
            print_reports(&reports);
            Ok(reports_exit_code(&reports))
        }
        Command::Sweep { template, axis } => {
            let axis: Axis = axis.parse()?;
            let cells = run_sweep(&template, &axis, &root)?;
            for c in &cells {
                let failed: Vec<&str> = c.reports.iter().filter(|r| !r.passed).map(|r| r.check_name.as_str()).collect();
                let detail = match &c.message {
                    Some(m) => m.clone(),
                    None if failed.is_empty() => "all checks pass".into(),
                    None => format!("failed: {}", failed.join(", ")),
                };
                println!("{}={}: {detail}", axis.key, c.value);
            }
            Ok(sweep_exit_code(&cells))
        }
        Command::Report { dir } => {
            print!("{}", markdown_report(&dir)?);
            Ok(EXIT_PASS)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                    EXIT_PASS
                }
                _ => EXIT_CONFIG,
            };
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
