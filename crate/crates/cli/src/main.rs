use std::process::ExitCode;

fn main() -> ExitCode {
    fairaudit_cli::run(std::env::args_os())
}
