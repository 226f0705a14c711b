//! Command-line driver: validates a manifest, runs it, writes artifacts and
//! a pass/fail report.
//!
//! Exit codes: 0 success, 1 invariant failure, 2 configuration error,
//! 3 runtime numerical error.

use clap::Parser;
use efriction_core::error::CoreError;
use efriction_core::manifest::{self, Command as RunCommand};
use efriction_core::run::{self, RunOptions};
use std::path::PathBuf;
use std::process::ExitCode;

#[cfg(feature = "plot")]
mod plots;

const THREADS_ENV: &str = "EFRICTION_THREADS";

#[derive(Parser, Debug)]
#[command(
    name = "efriction",
    about = "Gauge fields, electronic friction kernels and friction-dressed nuclear dynamics on small models",
    version
)]
struct Cli {
    /// Pipeline to run; must match the manifest's `command` field.
    #[arg(value_enum)]
    command: CliCommand,

    /// Path to the TOML run manifest.
    #[arg(long)]
    manifest: PathBuf,

    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    out: PathBuf,

    /// Worker threads (overrides EFRICTION_THREADS; 0 = all cores).
    #[arg(long)]
    threads: Option<usize>,

    /// Emit plots next to the series files.
    #[arg(long)]
    plot: bool,
}

#[derive(clap::ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum CliCommand {
    Geometry,
    Kernels,
    PropagateExact,
    PropagateFriction,
    Lite,
    Validate,
}

impl From<CliCommand> for RunCommand {
    fn from(c: CliCommand) -> Self {
        match c {
            CliCommand::Geometry => RunCommand::Geometry,
            CliCommand::Kernels => RunCommand::Kernels,
            CliCommand::PropagateExact => RunCommand::PropagateExact,
            CliCommand::PropagateFriction => RunCommand::PropagateFriction,
            CliCommand::Lite => RunCommand::Lite,
            CliCommand::Validate => RunCommand::Validate,
        }
    }
}

fn configure_threads(cli_threads: Option<usize>) {
    let threads = cli_threads.or_else(|| {
        std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.parse::<usize>().ok())
    });
    if let Some(n) = threads {
        // 0 lets rayon pick; a failure here means a pool already exists
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
}

fn write_failure_report(out: &PathBuf, err: &CoreError) {
    if std::fs::create_dir_all(out).is_ok() {
        let _ = std::fs::write(
            out.join("run_report.txt"),
            format!("[FAIL] run aborted - {err}\nFAILED: aborted\n"),
        );
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads(cli.threads);

    let (manifest, bytes) = match manifest::load_manifest(&cli.manifest) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("configuration error:\n{e}");
            return ExitCode::from(2);
        }
    };
    if manifest.command != RunCommand::from(cli.command) {
        eprintln!(
            "configuration error: CLI command does not match manifest command `{}`",
            manifest.command
        );
        return ExitCode::from(2);
    }

    let opts = RunOptions {
        out_dir: cli.out.clone(),
    };
    let report = match run::run(&manifest, &bytes, &opts) {
        Ok(r) => r,
        Err(e @ CoreError::ManifestInvalid(_)) | Err(e @ CoreError::ManifestParse(_)) => {
            eprintln!("configuration error:\n{e}");
            return ExitCode::from(2);
        }
        Err(e) => {
            eprintln!("runtime error: {e}");
            write_failure_report(&cli.out, &e);
            return ExitCode::from(3);
        }
    };
    print!("{}", report.render());

    if cli.plot {
        #[cfg(feature = "plot")]
        {
            if let Err(e) = plots::emit_all(&report, &cli.out) {
                eprintln!("plot error: {e}");
                return ExitCode::from(3);
            }
        }
        #[cfg(not(feature = "plot"))]
        {
            eprintln!("this build has no plot support (feature `plot` disabled)");
        }
    }

    if report.all_passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
