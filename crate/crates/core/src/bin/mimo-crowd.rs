use std::io;

fn main() {
    let code = mimo_crowd::cli::run(std::env::args_os(), &mut io::stdout(), &mut io::stderr());
    std::process::exit(code);
}
