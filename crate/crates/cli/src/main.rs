use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(insertion_cli::run(std::env::args_os()))
}
