fn main() {
    std::process::exit(shapespline::experiments::cli::run(std::env::args_os()));
}
