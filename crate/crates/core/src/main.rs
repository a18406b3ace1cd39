fn main() {
    std::process::exit(ddsig::cli::main_with_args(std::env::args_os()));
}
