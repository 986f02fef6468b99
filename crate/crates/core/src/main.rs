fn main() {
    std::process::exit(tagformer::cli::main_with_args(std::env::args_os()));
}
