mod args;
mod commands;

use std::io::{self, Write};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use phibbp::catalog::Catalog;

use args::{Cli, Command};
use commands::{CliConfig, Sink, Status};

const USAGE_ERROR: u8 = 1;

fn run(cli: Cli) -> anyhow::Result<Status> {
    let loaded;
    let cat = if cli.identities.is_some() || cli.formulas.is_some() {
        loaded = Catalog::load(cli.identities.as_deref(), cli.formulas.as_deref())?;
        &loaded
    } else {
        Catalog::builtin()
    };
    let cfg = CliConfig { precision_bits: cli.prec, output_mode: cli.output };
    let stdout = io::stdout();
    let mut lock = stdout.lock();
    let mut sink = Sink::new(cfg.output_mode, &mut lock);
    let status = match &cli.command {
        Command::Eval { name } => commands::eval(cat, &cfg, name, &mut sink),
        Command::Digits { name, pos, count } => commands::digits(cat, name, *pos, *count, &mut sink),
        Command::Verify(args) => commands::verify(cat, &cfg, args, &mut sink),
        Command::Phinary { value, digits, group } => commands::phinary(cat, &cfg, value, *digits, *group, &mut sink),
        Command::Fib { n } => commands::fibonacci(*n, false, &mut sink),
        Command::Lucas { n } => commands::fibonacci(*n, true, &mut sink),
        Command::Catalog => commands::catalog(cat, &mut sink),
    }?;
    lock.flush()?;
    Ok(status)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(USAGE_ERROR),
            };
        }
    };
    match run(cli) {
        Ok(status) => ExitCode::from(status.code()),
        Err(e) if e.downcast_ref::<io::Error>().is_some_and(|io| io.kind() == io::ErrorKind::BrokenPipe) => {
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(USAGE_ERROR)
        }
    }
}
