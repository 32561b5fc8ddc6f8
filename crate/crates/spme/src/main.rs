use std::process::ExitCode;

fn main() -> ExitCode {
    spme::cli::main()
}
