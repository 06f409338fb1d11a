fn main() {
    std::process::exit(domhand_cli::run_cli(std::env::args_os()));
}
