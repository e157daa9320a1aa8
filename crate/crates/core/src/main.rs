use std::process::ExitCode;

fn main() -> ExitCode {
    fedagg::cli::main_from_args(std::env::args_os())
}
