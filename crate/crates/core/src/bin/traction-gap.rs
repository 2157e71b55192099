fn main() {
    std::process::exit(traction_gap::cli::run(std::env::args_os()));
}
