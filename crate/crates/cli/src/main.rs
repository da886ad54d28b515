use std::process::ExitCode;

use apt_cli::{run, Cli, CliError, RunOptions};
use clap::Parser;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if e.use_stderr() => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("bad arguments").trim_start_matches("error: ");
            eprintln!("error: {}", CliError::validation(first));
            return ExitCode::from(1);
        }
        Err(e) => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: {}", CliError::validation("--threads must be positive"));
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {}", CliError::validation(format!("thread pool: {e}")));
            return ExitCode::from(1);
        }
    }
    let opts = RunOptions {
        tol: cli.tol,
        seed: cli.seed,
        rational: cli.rational,
        timing: cli.timing,
    };
    match run(cli.command, cli.spec.as_deref(), &cli.out, &opts) {
        Ok((outcome, files)) => {
            print!("{}", outcome.summary);
            for f in &files {
                println!("wrote {}", f.display());
            }
            match outcome.failure {
                None => ExitCode::SUCCESS,
                Some(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(e.exit_code() as u8)
                }
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
