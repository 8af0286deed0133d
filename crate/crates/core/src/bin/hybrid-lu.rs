fn main() {
    std::process::exit(hybrid_lu::cli::main_with_args(std::env::args_os()));
}
