fn main() {
    std::process::exit(pimlab::cli::run_from(std::env::args_os()));
}
