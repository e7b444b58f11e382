fn main() {
    std::process::exit(covpath::cli::run(std::env::args_os()));
}
