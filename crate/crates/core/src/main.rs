fn main() {
    std::process::exit(ghrlab::cli::run(std::env::args_os()));
}
