use std::io::Write;
use std::process;

use clap::Parser;
use fallwatch_cli::{run, Cli, ExitCode};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp_millis()
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { ExitCode::Usage } else { ExitCode::Ok };
            let _ = e.print();
            process::exit(code as i32);
        }
    };
    let code = match run(cli) {
        Ok(()) => ExitCode::Ok,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    };
    let _ = std::io::stdout().flush();
    process::exit(code as i32);
}
