fn main() {
    std::process::exit(grouplasso_cli::main_with_args(std::env::args_os()));
}
