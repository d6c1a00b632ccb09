use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(dehate_cli::run(std::env::args_os()))
}
