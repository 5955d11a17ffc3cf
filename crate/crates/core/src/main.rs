use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(darboux::cli::run(std::env::args_os()))
}
