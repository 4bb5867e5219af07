fn main() {
    std::process::exit(ceasefire::cli::main_with_args(std::env::args_os()));
}
