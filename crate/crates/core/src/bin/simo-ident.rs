use std::process::ExitCode;

fn main() -> ExitCode {
    simo_ident::cli::run(std::env::args_os())
}
