fn main() {
    std::process::exit(survbma::cli::run(std::env::args_os()));
}
