use std::process::ExitCode;

use clap::Parser;
use wpt_rx::cli::{self, Cli};

fn main() -> ExitCode {
    let args = Cli::parse();
    let mut out = std::io::stdout().lock();
    match cli::run(&args, &mut out) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(cli::exit_code(&e) as u8)
        }
    }
}
