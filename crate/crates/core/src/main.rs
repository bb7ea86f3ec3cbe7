fn main() {
    std::process::exit(fda_coarray::cli::main_with_args(std::env::args_os()));
}
