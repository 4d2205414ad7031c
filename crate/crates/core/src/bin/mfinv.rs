use clap::Parser;
use mfinv_core::cli::{error_json, run, Cli, EXIT_ERROR};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outcome) => {
            for p in &outcome.written {
                println!("{}", p.display());
            }
            std::process::exit(outcome.exit_code);
        }
        Err(e) => {
            if cli.error_json {
                eprintln!("{}", error_json(&e));
            } else {
                eprintln!("error: {e}");
            }
            std::process::exit(EXIT_ERROR);
        }
    }
}
