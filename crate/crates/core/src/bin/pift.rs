fn main() { std::process::exit(pift::cli::run(std::env::args_os())) }
