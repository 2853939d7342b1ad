fn main() {
    std::process::exit(bayesdp_cli::main_with_args(std::env::args_os()));
}
