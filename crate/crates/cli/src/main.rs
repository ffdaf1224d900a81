fn main() {
    std::process::exit(capeuler_cli::run(std::env::args_os()));
}
