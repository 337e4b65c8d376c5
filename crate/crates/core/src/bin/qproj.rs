fn main() {
    std::process::exit(quasiproj::cli::main_with_args(std::env::args_os()));
}
