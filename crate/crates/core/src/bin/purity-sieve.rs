use std::process::ExitCode;

fn main() -> ExitCode {
    purity_sieve::cli::main_with_args(std::env::args_os())
}
