fn main() {
    std::process::exit(frontlab::cli::run(std::env::args_os()));
}
