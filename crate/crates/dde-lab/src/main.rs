use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(dde_lab::cli::run() as u8)
}
