use std::process::ExitCode;

fn main() -> ExitCode {
    mimo_se_cli::main_with_args(std::env::args_os())
}
