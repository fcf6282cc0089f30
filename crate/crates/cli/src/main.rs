fn main() {
    std::process::exit(ipslab_cli::main_with_args(std::env::args_os()));
}
