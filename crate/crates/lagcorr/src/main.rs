fn main() {
    std::process::exit(lagcorr::cli::main_with_args(std::env::args_os()));
}
