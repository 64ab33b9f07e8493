mod cli;
mod commands;
mod config;
mod output;

use std::process::ExitCode;

use clap::Parser;
use htcompress::ErrorKind;

use cli::Cli;

const THREADS_VAR: &str = "HTCOMPRESS_THREADS";

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let argv = match config::expand_config(std::env::args_os().collect()) {
        Ok(argv) => argv,
        Err(e) => return report_error(&e),
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            if code != 0 {
                output::print_error("usage", "validation", &e.kind().to_string());
            }
            return ExitCode::from(code);
        }
    };
    if let Err(e) = configure_threads() {
        return report_error(&e);
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report_error(&e),
    }
}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(value) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| anyhow::anyhow!("{THREADS_VAR} must be a positive integer, got {value:?}"))?;
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    Ok(())
}

fn report_error(e: &anyhow::Error) -> ExitCode {
    match e.downcast_ref::<htcompress::Error>() {
        Some(err) => {
            let (kind, status) = match err.kind() {
                ErrorKind::Validation => ("validation", 1),
                ErrorKind::Infeasible => ("infeasible", 2),
            };
            output::print_error(err.code(), kind, &format!("{e:#}"));
            ExitCode::from(status)
        }
        None => {
            output::print_error("invalid_input", "validation", &format!("{e:#}"));
            ExitCode::from(1)
        }
    }
}
