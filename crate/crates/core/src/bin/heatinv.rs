use std::io::Write;

fn main() {
    heatinv::cli::configure_threads();
    let out = heatinv::cli::run(std::env::args_os());
    let _ = std::io::stdout().write_all(out.stdout.as_bytes());
    let _ = std::io::stderr().write_all(out.stderr.as_bytes());
    std::process::exit(out.code);
}
