fn main() {
    std::process::exit(ningarch_cli::run(std::env::args_os()));
}
