use std::process::ExitCode;

use clap::Parser;
use ppmi_lowrank_cli::commands::{exit_code, Outcome};
use ppmi_lowrank_cli::logging;

fn main() -> ExitCode {
    let cli = ppmi_lowrank_cli::Cli::parse();
    logging::init(&cli.log_level);
    let result = ppmi_lowrank_cli::run(&cli);
    match &result {
        Ok(Outcome::Complete) => {}
        Ok(Outcome::Incomplete { missing }) => {
            log::error!("event=incomplete missing_outputs={missing}");
        }
        Err(e) => log::error!("event=failed reason={}", logging::quote(format!("{e:#}"))),
    }
    exit_code(&result)
}
