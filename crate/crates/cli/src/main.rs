mod args;
mod commands;
mod failure;
mod manifest;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command, IndexCommand, SampleCommand, ScheduleCommand};
use failure::CmdResult;

fn dispatch(cmd: &Command) -> CmdResult {
    match cmd {
        Command::Index(IndexCommand::Build(a)) => commands::index_build(a),
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Schedule(ScheduleCommand::Emit(a)) => commands::schedule_emit(a),
        Command::Sample(SampleCommand::Trace(a)) => commands::sample_trace(a),
        Command::KlDiag(a) => commands::kl_diag(a),
    }
}

fn main() -> ExitCode {
    // clap exits with status 2 on malformed arguments
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match dispatch(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
