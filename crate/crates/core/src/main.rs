fn main() {
    std::process::exit(ispca::cli::main_with(std::env::args_os()));
}
