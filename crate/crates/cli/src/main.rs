fn main() {
    std::process::exit(frontierlab_cli::cli::main_with_args(std::env::args_os()));
}
