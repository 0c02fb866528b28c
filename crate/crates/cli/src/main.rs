fn main() {
    std::process::exit(powerlap_cli::main_with_args(std::env::args_os()));
}
