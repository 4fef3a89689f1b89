use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use qassert::commands::{report_text, recommend_text};
use qassert::files::write_json;
use qassert::formats::{OptionsRecord, ReportFile};
use qassert::{CheckArgs, RecommendArgs, SimulateArgs, VerifyArgs};

/// Runtime assertions for OpenQASM programs.
///
/// Exit status: 0 when every assertion is satisfied, 1 when any is
/// rejected, 2 on invalid input.
#[derive(Parser)]
#[command(name = "qassert", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct PassFlags {
    /// Do not re-apply the preparation circuit after a circuit equality check.
    #[arg(long)]
    no_reapply: bool,
    /// Keep assertions that are implied by the preceding one.
    #[arg(long)]
    no_cancel: bool,
    /// Keep one slice per assertion.
    #[arg(long)]
    no_concat: bool,
    /// Leave assertions where they are written.
    #[arg(long)]
    no_move: bool,
}

impl PassFlags {
    fn options(&self) -> OptionsRecord {
        OptionsRecord {
            reapply: !self.no_reapply,
            cancel: !self.no_cancel,
            concat: !self.no_concat,
            move_assertions: !self.no_move,
        }
    }
}

#[derive(Args)]
struct TestFlags {
    /// Significance level.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Cressie-Read exponent (1 is Pearson's chi-squared).
    #[arg(long, default_value_t = 2.0 / 3.0)]
    lambda: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Cut a program into slices and write them with a `slices.json` manifest.
    Translate {
        input: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[command(flatten)]
        passes: PassFlags,
    },
    /// Sample every slice of a manifest on the built-in simulator.
    Simulate {
        manifest: PathBuf,
        #[arg(long, default_value_t = 8192)]
        shots: u64,
        #[arg(long, env = "QASSERT_SEED", default_value_t = 0)]
        seed: u64,
        /// Mix in uniform noise at each slice's fidelity under this model.
        #[arg(long, conflicts_with = "ideal")]
        device: Option<PathBuf>,
        /// Sample without noise (the default).
        #[arg(long)]
        ideal: bool,
        /// Directory for the counts files; defaults to the manifest's.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Test measured counts against the expected distributions.
    Verify {
        manifest: PathBuf,
        /// Directory holding `counts_<k>.json`; defaults to the manifest's.
        counts: Option<PathBuf>,
        /// Device model used to estimate slice fidelities.
        #[arg(long)]
        device: Option<PathBuf>,
        #[command(flatten)]
        test: TestFlags,
        /// Defaults to `report.json` next to the counts.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Recommend a number of shots for every assertion.
    Recommend {
        manifest: PathBuf,
        #[arg(long)]
        device: Option<PathBuf>,
        #[command(flatten)]
        test: TestFlags,
        #[arg(long, env = "QASSERT_SEED", default_value_t = 0)]
        seed: u64,
        /// Monte-Carlo trials per candidate shot count.
        #[arg(long, default_value_t = 200)]
        trials: usize,
        /// Largest shot count considered.
        #[arg(long, default_value_t = 65536)]
        cap: u64,
        /// Print JSON instead of a table.
        #[arg(long)]
        json: bool,
        /// Also write the JSON to this file.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Translate, simulate and verify in one step.
    Check {
        input: PathBuf,
        #[arg(long, default_value = "qassert-out")]
        out: PathBuf,
        #[arg(long, default_value_t = 8192)]
        shots: u64,
        #[arg(long, env = "QASSERT_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, conflicts_with = "ideal")]
        device: Option<PathBuf>,
        #[arg(long)]
        ideal: bool,
        #[command(flatten)]
        test: TestFlags,
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        passes: PassFlags,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Print the final state of a program as an amplitude list.
    Amplitudes { input: PathBuf },
}

fn verdict_code(report: &ReportFile) -> ExitCode {
    print!("{}", report_text(report));
    if report.all_satisfied() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Translate { input, out, passes } => {
            let path = qassert::translate(&input, &out, &passes.options())?;
            println!("wrote {}", path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Simulate {
            manifest,
            shots,
            seed,
            device,
            ideal: _,
            out,
            jobs,
        } => {
            let paths = qassert::simulate(&SimulateArgs {
                manifest,
                out,
                shots,
                seed,
                device,
                jobs,
            })?;
            for p in paths {
                println!("wrote {}", p.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify {
            manifest,
            counts,
            device,
            test,
            report,
            jobs,
        } => {
            let r = qassert::verify(&VerifyArgs {
                manifest,
                counts_dir: counts,
                device,
                alpha: test.alpha,
                lambda: test.lambda,
                report,
                jobs,
            })?;
            Ok(verdict_code(&r))
        }
        Command::Recommend {
            manifest,
            device,
            test,
            seed,
            trials,
            cap,
            json,
            out,
            jobs,
        } => {
            let r = qassert::recommend(&RecommendArgs {
                manifest,
                device,
                alpha: test.alpha,
                lambda: test.lambda,
                seed,
                trials,
                cap,
                jobs,
            })?;
            if let Some(path) = out {
                write_json(&path, &r)?;
            }
            if json {
                println!("{}", serde_json::to_string_pretty(&r)?);
            } else {
                print!("{}", recommend_text(&r));
            }
            for a in &r.assertions {
                if let Some(w) = &a.warning {
                    eprintln!("warning: assertion {}: {w}", a.id);
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Check {
            input,
            out,
            shots,
            seed,
            device,
            ideal: _,
            test,
            report,
            passes,
            jobs,
        } => {
            let r = qassert::check(&CheckArgs {
                input,
                out,
                options: passes.options(),
                shots,
                seed,
                device,
                alpha: test.alpha,
                lambda: test.lambda,
                report,
                jobs,
            })?;
            Ok(verdict_code(&r))
        }
        Command::Amplitudes { input } => {
            print!("{}", qassert::amplitudes(&input)?);
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
