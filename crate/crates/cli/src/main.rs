use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use vibcascade::bound::SolveOptions;
use vibcascade::pipeline::{cmd_convert, cmd_levels, cmd_pump, cmd_rates, Pipeline};
use vibcascade::Error;

/// Vibrational levels, Einstein coefficients and radiative cascades of diatomic
/// molecules.
#[derive(Debug, Parser)]
#[command(name = "vibcascade", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct Common {
    /// pipeline configuration (TOML)
    #[arg(long)]
    config: PathBuf,
    /// output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// treat levels touching the box edge as errors
    #[arg(long)]
    strict: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve every manifold and write level tables.
    Levels(Common),
    /// Write the rate table and stick spectra between two manifolds.
    Rates {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        from: String,
        #[arg(long)]
        to: String,
    },
    /// Run the two-step conversion scenario.
    Convert(Common),
    /// Run the broadband pumping scenario.
    Pump(Common),
    /// Run the built-in analytic checks.
    Selfcheck,
}

fn load(c: &Common) -> Result<(Pipeline, SolveOptions), Error> {
    Ok((
        Pipeline::load(&c.config)?,
        SolveOptions { strict: c.strict },
    ))
}

fn report(written: &[PathBuf], out: &Path) {
    for p in written {
        println!("{}", p.strip_prefix(out).unwrap_or(p).display());
    }
}

fn run(cli: Cli) -> Result<bool, Error> {
    match cli.command {
        Command::Levels(c) => {
            let (mut p, opts) = load(&c)?;
            report(&cmd_levels(&mut p, &c.out, &opts)?, &c.out);
        }
        Command::Rates {
            common: c,
            from,
            to,
        } => {
            let (mut p, opts) = load(&c)?;
            report(&cmd_rates(&mut p, &from, &to, &c.out, &opts)?, &c.out);
        }
        Command::Convert(c) => {
            let (mut p, opts) = load(&c)?;
            report(&cmd_convert(&mut p, &c.out, &opts)?, &c.out);
        }
        Command::Pump(c) => {
            let (mut p, opts) = load(&c)?;
            report(&cmd_pump(&mut p, &c.out, &opts)?, &c.out);
        }
        Command::Selfcheck => {
            let checks = vibcascade::selfcheck::run()?;
            let mut ok = true;
            for c in &checks {
                println!(
                    "{} {}: {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.detail
                );
                ok &= c.passed;
            }
            return Ok(ok);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
