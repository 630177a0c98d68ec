use std::process::ExitCode;

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    let code = loopsum::cli::run(&args, &mut std::io::stdout().lock());
    ExitCode::from(code as u8)
}
