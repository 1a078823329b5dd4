use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(atelier_server::cli::main_with_args(std::env::args_os()) as u8)
}
