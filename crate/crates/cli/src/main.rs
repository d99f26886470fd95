fn main() {
    std::process::exit(certbound_cli::run(std::env::args_os()));
}
