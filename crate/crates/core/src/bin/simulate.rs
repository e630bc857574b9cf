use std::process::ExitCode;

use clap::Parser;
use onebit_mimo::cli::{execute, exit_status, resolve, SimulateArgs};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = SimulateArgs::parse();
    let result = resolve(args).and_then(|spec| execute(&spec));
    match result {
        Ok(records) => {
            log::info!("wrote {} records", records.len());
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("simulate: {err}");
            ExitCode::from(exit_status(&err) as u8)
        }
    }
}
