use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(ldpgamma::run(std::env::args_os()) as u8)
}
