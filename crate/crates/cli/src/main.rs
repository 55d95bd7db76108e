fn main() {
    std::process::exit(locallll_cli::run(std::env::args_os()));
}
