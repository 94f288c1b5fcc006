fn main() {
    std::process::exit(langevin_core::cli::run(std::env::args_os()));
}
