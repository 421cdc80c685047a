use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(spreadlab_cli::run(std::env::args_os()))
}
