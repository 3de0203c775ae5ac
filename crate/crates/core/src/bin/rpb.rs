fn main() {
    std::process::exit(rpb::cli::main_with_args(std::env::args_os()));
}
