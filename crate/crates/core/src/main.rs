use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = gossip_rate::cli::Cli::parse();
    match gossip_rate::cli::execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
