fn main() {
    std::process::exit(som_core::cli::run(std::env::args_os()));
}
