fn main() {
    std::process::exit(qcr::cli::main_with_args(std::env::args_os()));
}
