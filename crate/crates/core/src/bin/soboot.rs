fn main() {
    std::process::exit(soboot::cli::main_with_args(std::env::args_os()));
}
