fn main() {
    std::process::exit(margraph::cli::run(std::env::args_os()));
}
