fn main() {
    std::process::exit(burden_core::cli::main_with_args(std::env::args_os()));
}
