fn main() {
    std::process::exit(drpca::cli::run(std::env::args_os()));
}
