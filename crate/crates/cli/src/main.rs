fn main() {
    std::process::exit(capillary_cli::main_with_args(std::env::args_os()));
}
