use std::io;
use std::process::ExitCode;

use clap::Parser;
use mbstat_cli::{run, Cli, Status};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(Status::InvalidFlags.code() as u8)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let mut stdout = io::stdout().lock();
    match run(cli, &mut stdout) {
        Ok(status) => ExitCode::from(status.code() as u8),
        Err(failure) => {
            eprintln!("mbstat: {failure}");
            ExitCode::from(failure.status.code() as u8)
        }
    }
}
