fn main() {
    std::process::exit(biathlon_bayes::cli::run_from(std::env::args_os()));
}
