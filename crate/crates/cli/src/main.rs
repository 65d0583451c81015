use std::io::Write;

fn main() {
    let (code, out) = wmix_cli::main_with_args(std::env::args_os());
    std::io::stdout().write_all(&out).expect("stdout");
    std::process::exit(code);
}
