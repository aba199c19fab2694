use std::process::ExitCode;

use clap::Parser;
use jpa_sim::cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cfg, out) = match cli.resolve() {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    match run(&cfg, &out, cli.resume) {
        Ok(m) => {
            for j in m.jobs.iter().filter(|j| !j.ok) {
                eprintln!("job {} failed: {}", j.label, j.error.as_deref().unwrap_or("unknown"));
            }
            println!("{}: {} jobs, {} failed; outputs in {}", m.task, m.jobs.len(), m.failed_jobs(), out.display());
            if m.failed_jobs() > 0 {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
