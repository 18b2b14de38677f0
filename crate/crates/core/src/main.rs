fn main() {
    std::process::exit(epr_hbt::cli::main_with_args(std::env::args_os()));
}
