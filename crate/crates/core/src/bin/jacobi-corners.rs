fn main() {
    std::process::exit(jacobi_corners::cli::main_with_args(std::env::args_os()));
}
