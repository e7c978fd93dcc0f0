use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use qroot_cli::{run, ExperimentConfig};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("QROOT_LOG", "warn")).init();
    let cfg = ExperimentConfig::parse();
    match run(&cfg) {
        Ok(out) => {
            let text = serde_json::to_string_pretty(&out.summary).expect("serializable");
            let _ = writeln!(std::io::stdout(), "{text}");
            for f in &out.artifacts {
                eprintln!("wrote {}", cfg.out.join(f).display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
