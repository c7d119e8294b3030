fn main() {
    std::process::exit(nlproj::cli::main_with_args(std::env::args_os()));
}
