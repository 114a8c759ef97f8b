fn main() {
    std::process::exit(xmo_core::cli::run(std::env::args_os()));
}
