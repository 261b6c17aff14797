fn main() {
    std::process::exit(tems::cli::run(std::env::args_os()));
}
