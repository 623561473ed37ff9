mod args;
mod commands;
mod failure;

use std::io::Write;
use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    // clap exits with 2 on usage errors by itself
    let cli = Cli::parse();
    let data_dir = cli.data_dir.as_deref();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let result = match cli.command {
        Command::Preprocess(a) => commands::run_preprocess(a, data_dir, &mut out),
        Command::Train(a) => commands::run_train(a, data_dir, &mut out),
        Command::Evaluate(a) => commands::run_evaluate(a, data_dir, &mut out),
        Command::ExportFilters(a) => commands::run_export(a, &mut out),
    };
    let _ = out.flush();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(failure::exit_code(&e) as u8)
        }
    }
}
