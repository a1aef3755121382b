fn main() {
    std::process::exit(efm_core::cli::main_with_args(std::env::args_os()));
}
