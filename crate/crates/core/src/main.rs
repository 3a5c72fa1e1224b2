use std::process::ExitCode;

fn main() -> ExitCode {
    dgdn::cli::main_with_args(std::env::args_os())
}
