use std::io::Write;
use std::process::ExitCode;

use treemcts::cli::{run, CliError};

fn main() -> ExitCode {
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match run(std::env::args_os(), &mut lock) {
        Ok(()) => {
            let _ = lock.flush();
            ExitCode::SUCCESS
        }
        Err(CliError::Usage(e)) => {
            let _ = e.print();
            match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    ExitCode::SUCCESS
                }
                _ => ExitCode::from(2),
            }
        }
        Err(e) => {
            let _ = lock.flush();
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
