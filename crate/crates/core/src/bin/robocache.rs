fn main() {
    std::process::exit(robocache::cli::run_cli(std::env::args_os()));
}
