use std::process::ExitCode;

fn main() -> ExitCode {
    ddhmm::cli::main_with(std::env::args_os())
}
