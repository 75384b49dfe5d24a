fn main() {
    std::process::exit(quantone::cli::run(std::env::args_os()));
}
