use std::process::ExitCode;

fn main() -> ExitCode {
    ewra_pipeline::cli::main_with_args(std::env::args_os())
}
