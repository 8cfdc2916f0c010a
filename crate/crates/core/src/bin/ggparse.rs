use std::io;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("GGPARSE_LOG", "info")).init();
    let args: Vec<String> = std::env::args().collect();
    let code = ggparse::cli::run(&args, &mut io::stdout(), &mut io::stderr());
    std::process::exit(code);
}
