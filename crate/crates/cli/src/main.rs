fn main() {
    std::process::exit(sdde_cli::main_with_args(std::env::args_os()));
}
