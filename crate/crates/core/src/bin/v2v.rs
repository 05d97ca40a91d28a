fn main() {
    std::process::exit(hybrid_v2v::cli::main_with_args(std::env::args_os()));
}
