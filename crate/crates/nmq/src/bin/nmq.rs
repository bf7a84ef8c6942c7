fn main() {
    std::process::exit(nmq::cli::main_with(std::env::args_os()));
}
