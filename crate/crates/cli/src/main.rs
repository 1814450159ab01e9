use std::io;
use std::process::ExitCode;

use sphlab_cli::config::OUT_ENV;

fn main() -> ExitCode {
    let code = sphlab_cli::main_with(
        std::env::args_os(),
        std::env::var_os(OUT_ENV),
        &mut io::stdout().lock(),
        &mut io::stderr().lock(),
    );
    ExitCode::from(code)
}
