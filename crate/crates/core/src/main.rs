fn main() {
    std::process::exit(selfaug::cli::main_with_args(std::env::args_os()));
}
