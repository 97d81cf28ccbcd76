fn main() {
    std::process::exit(loadcast::cli::run(std::env::args_os()));
}
