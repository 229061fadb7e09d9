fn main() {
    std::process::exit(bdris::cli::run(std::env::args_os()));
}
