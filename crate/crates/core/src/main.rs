use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use tiltcheck::cli::{run, Cli, EXIT_SCHEMA};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_SCHEMA) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(out) => {
            let mut stdout = std::io::stdout().lock();
            let _ = stdout.write_all(out.stdout.as_bytes());
            let _ = stdout.flush();
            ExitCode::from(out.code)
        }
        Err(e) => {
            eprintln!("tiltcheck: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
