fn main() {
    std::process::exit(erw::cli::main_with_args(std::env::args_os()));
}
