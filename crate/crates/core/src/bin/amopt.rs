fn main() {
    std::process::exit(amopt::cli::run(std::env::args_os()));
}
