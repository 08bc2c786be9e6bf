use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(fmd_cli::commands::main_with_args(std::env::args_os()))
}
