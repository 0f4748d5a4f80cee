fn main() {
    std::process::exit(quadjump::cli::main_with_args(std::env::args_os()));
}
