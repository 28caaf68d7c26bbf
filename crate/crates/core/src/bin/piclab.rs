fn main() {
    std::process::exit(piclab::cli::main_with_args(std::env::args_os()));
}
