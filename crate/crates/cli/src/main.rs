use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use slip_cli::{run, write_atomic, Cli, CliError};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli).and_then(|r| {
        if let Some((path, text)) = &r.sidecar {
            write_atomic(path, text)?;
        }
        match &r.out {
            Some(path) => write_atomic(path, &r.body)?,
            None => std::io::stdout().lock().write_all(r.body.as_bytes())?,
        }
        Ok::<_, CliError>(())
    }) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
