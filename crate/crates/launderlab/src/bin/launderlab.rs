fn main() {
    std::process::exit(launderlab::cli::run(std::env::args_os()));
}
