fn main() {
    std::process::exit(dynqueue::cli::main_with_args(std::env::args_os()));
}
