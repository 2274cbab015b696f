use std::io::Write;
use std::process::ExitCode;

fn main() -> ExitCode {
    let stdout = std::io::stdout();
    let mut out = std::io::BufWriter::new(stdout.lock());
    let code = aerocomp_cli::run(std::env::args_os(), &mut out, &mut std::io::stderr());
    if out.flush().is_err() && code == 0 {
        return ExitCode::from(3);
    }
    ExitCode::from(code as u8)
}
