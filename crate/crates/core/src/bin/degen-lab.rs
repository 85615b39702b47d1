fn main() {
    std::process::exit(degen_lab::cli::main_with_args(std::env::args_os()));
}
