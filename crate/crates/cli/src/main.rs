use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(weftcodec_cli::run(std::env::args_os()))
}
