use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match ssvep_ensemble::cli::run(ssvep_ensemble::cli::Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        // a closed stdout (e.g. piped into `head`) is not a failure
        Err(e) if broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn broken_pipe(e: &anyhow::Error) -> bool {
    let is_pipe = |io: &std::io::Error| io.kind() == std::io::ErrorKind::BrokenPipe;
    e.chain()
        .any(|c| match c.downcast_ref::<ssvep_ensemble::Error>() {
            Some(ssvep_ensemble::Error::Io(io)) => is_pipe(io),
            _ => c.downcast_ref::<std::io::Error>().is_some_and(is_pipe),
        })
}
