fn main() {
    std::process::exit(mixkern_cli::main_with_args(std::env::args_os()));
}
