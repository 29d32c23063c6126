//! `slir`: command-line front end for simulating and calibrating the SLIR model.

mod args;
mod commands;
mod error;
mod manifest;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};
use commands::Context;
use error::CliError;

fn command_name(command: &Command) -> &'static str {
    match command {
        Command::Simulate(_) => "simulate",
        Command::Fit(_) => "fit",
        Command::Forecast(_) => "forecast",
        Command::Sensitivity(_) => "sensitivity",
        Command::R0(_) => "r0",
        Command::Diagnose(_) => "diagnose",
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let ctx = Context::load(&cli)?;
    match &cli.command {
        Command::Simulate(a) => commands::simulate(ctx, a),
        Command::Fit(a) => commands::fit(ctx, a),
        Command::Forecast(a) => commands::forecast(ctx, a),
        Command::Sensitivity(a) => commands::sensitivity(ctx, a),
        Command::R0(a) => commands::r0(ctx, a),
        Command::Diagnose(a) => commands::diagnose(ctx, a),
    }
}

fn fail(err: CliError) -> ! {
    let code = err.exit_code();
    eprintln!(
        "{}",
        serde_json::to_string(&err).unwrap_or_else(|_| format!("{{\"code\":\"{}\"}}", err.code))
    );
    std::process::exit(code)
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e)
            if matches!(
                e.kind(),
                ErrorKind::DisplayHelp
                    | ErrorKind::DisplayVersion
                    | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand
            ) =>
        {
            e.exit()
        }
        Err(e) => fail(CliError::usage(e.kind().to_string()).with("detail", e.to_string())),
    };
    let name = command_name(&cli.command);
    if let Err(err) = run(cli) {
        fail(err.with("command", name));
    }
}
